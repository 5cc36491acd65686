//! Acquisition followed by signal-dependent hidden actions, solved as a
//! linear program over affine pieces of the menu.
//!
//! Two formulations are available. [`Formulation::P6`] keeps one piece per
//! signal (the subtangent used under the plan). [`Formulation::P5`] keeps one
//! piece per action and extended signal, the extra signal `⊥` standing for
//! the no-acquisition belief `p_a`. Both have the same optimal value.

use serde::Serialize;

use crate::contracts::lower_envelope;
use crate::error::{Error, Result};
use crate::geometry::{AffinePiece, Belief, Menu, Plan, ProblemInstance};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::report::{Regime, SolveReport};
use crate::verify::verify_menu;
use crate::{ABS_TOL, REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    P5,
    #[default]
    P6,
}

/// A real signal or the no-acquisition placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtendedSignal {
    Signal(usize),
    Bottom,
}

/// `c_σ(p)`: cheapest action mix reaching `p` from the beliefs `p_{a,σ}`.
pub fn conditional_cost_curve(inst: &ProblemInstance, signal: usize, p: &Belief) -> Result<f64> {
    if signal >= inst.n_signals() {
        return Err(Error::Precondition(format!("signal index {signal} out of range")));
    }
    if p.len() != inst.n_outcomes() {
        return Err(Error::DimensionMismatch { expected: inst.n_outcomes(), found: p.len() });
    }
    let points: Vec<&Belief> = (0..inst.n_actions()).map(|a| inst.conditional(a, signal)).collect();
    lower_envelope(&points, inst.costs(), p.weights())?.ok_or(Error::OutsideHull)
}

/// Per signal: does the planned action sit on the conditional cost curve?
/// A `false` anywhere rules the plan out.
pub fn plan_precheck(inst: &ProblemInstance, plan: &Plan) -> Result<Vec<bool>> {
    require_acquire(inst, plan)?;
    (0..inst.n_signals())
        .map(|s| {
            let a = plan.action(s);
            let curve = conditional_cost_curve(inst, s, inst.conditional(a, s))?;
            let c = inst.costs()[a];
            Ok((c - curve).abs() <= REL_TOL * (1.0 + c))
        })
        .collect()
}

fn require_acquire(inst: &ProblemInstance, plan: &Plan) -> Result<()> {
    plan.validate(inst)?;
    if !plan.acquire {
        return Err(Error::Precondition("the general solver targets plans that acquire the signal".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GeneralSolution {
    pub formulation: Formulation,
    /// Solved pieces in formulation order: per signal for P6; per
    /// `(action, extended signal)` for P5 with `⊥` last.
    pub pieces: Vec<AffinePiece>,
    pub objective: f64,
    /// LP rows holding with equality.
    pub tight: Vec<String>,
    pub report: SolveReport,
}

impl GeneralSolution {
    pub fn menu(&self) -> &Menu {
        &self.report.menu
    }
}

/// Number of scalar parameter blocks (one slope, one intercept per piece)
/// in the P5 formulation: `2|A|(|Σ|+1)`.
pub fn p5_parameter_blocks(inst: &ProblemInstance) -> usize {
    2 * inst.n_actions() * (inst.n_signals() + 1)
}

struct Builder<'a> {
    inst: &'a ProblemInstance,
    n: usize,
    n_pieces: usize,
    lp: LinearProgram,
    labels: Vec<String>,
}

impl<'a> Builder<'a> {
    fn new(inst: &'a ProblemInstance, n_pieces: usize) -> Self {
        let n = inst.n_outcomes();
        Self { inst, n, n_pieces, lp: LinearProgram::minimize(vec![0.0; n_pieces * (n + 1)]), labels: Vec::new() }
    }

    fn width(&self) -> usize {
        self.n_pieces * (self.n + 1)
    }

    /// Coefficients of `h_k(p)`.
    fn piece_at(&self, k: usize, p: &[f64]) -> Vec<f64> {
        let mut row = vec![0.0; self.width()];
        let base = k * (self.n + 1);
        row[base..base + self.n].copy_from_slice(p);
        row[base + self.n] = -1.0;
        row
    }

    fn corner(&self, k: usize, w: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.width()];
        let base = k * (self.n + 1);
        row[base + w] = 1.0;
        row[base + self.n] = -1.0;
        row
    }

    fn push(&mut self, label: String, row: Vec<f64>, rel: Relation, rhs: f64) {
        self.lp.constrain(row, rel, rhs);
        self.labels.push(label);
    }

    fn finish(self, objective: Vec<f64>) -> Result<(Vec<AffinePiece>, f64, Vec<String>)> {
        let Builder { n, n_pieces, mut lp, labels, .. } = self;
        lp.objective = objective;
        match lp.solve()? {
            LpOutcome::Optimal { value, x } => {
                let pieces = (0..n_pieces)
                    .map(|k| {
                        let base = k * (n + 1);
                        AffinePiece::new(x[base..base + n].to_vec(), x[base + n])
                    })
                    .collect();
                let tight = lp
                    .activities(&x)
                    .iter()
                    .zip(&lp.constraints)
                    .zip(labels)
                    .filter(|((ax, c), _)| (*ax - c.rhs).abs() <= 1e-7 * (1.0 + c.rhs.abs()))
                    .map(|(_, l)| l)
                    .collect();
                Ok((pieces, value, tight))
            }
            LpOutcome::Infeasible => Err(Error::PlanNotElicitable),
            LpOutcome::Unbounded => Err(Error::UnexpectedLpStatus("unbounded in the minimum-payment program")),
        }
    }
}

fn add(acc: &mut [f64], row: &[f64], scale: f64) {
    for (a, r) in acc.iter_mut().zip(row) {
        *a += scale * r;
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `Σ_σ q(σ)·h_{piece(σ)}(p_{f(σ),σ})` and `Σ_σ q(σ)·c_{f(σ)}`.
fn plan_value(b: &Builder, plan: &Plan, piece_of: impl Fn(usize) -> usize) -> (Vec<f64>, f64) {
    let inst = b.inst;
    let mut row = vec![0.0; b.width()];
    let mut cost = 0.0;
    for s in 0..inst.n_signals() {
        let f = plan.action(s);
        add(&mut row, &b.piece_at(piece_of(s), inst.conditional(f, s).weights()), inst.q()[s]);
        cost += inst.q()[s] * inst.costs()[f];
    }
    (row, cost)
}

fn signal_label(inst: &ProblemInstance, s: ExtendedSignal) -> String {
    match s {
        ExtendedSignal::Signal(s) => inst.signals()[s].clone(),
        ExtendedSignal::Bottom => "_".into(),
    }
}

/// Compact formulation: one piece per signal.
pub fn solve_general_p6(inst: &ProblemInstance, plan: &Plan, tol: f64) -> Result<GeneralSolution> {
    require_acquire(inst, plan)?;
    let k = inst.n_signals();
    let mut b = Builder::new(inst, k);
    let (value, plan_cost) = plan_value(&b, plan, |s| s);
    let needed = plan_cost + inst.kappa();

    for s2 in 0..k {
        for a in 0..inst.n_actions() {
            let row = sub(&value, &b.piece_at(s2, inst.marginal(a).weights()));
            let label = format!("no-acquire:{}:{}", inst.actions()[a], inst.signals()[s2]);
            b.push(label, row, Relation::Ge, needed - inst.costs()[a]);
        }
    }
    for s in 0..k {
        let f = plan.action(s);
        let follow = b.piece_at(s, inst.conditional(f, s).weights());
        for a in 0..inst.n_actions() {
            for s2 in 0..k {
                if a == f && s2 == s {
                    continue;
                }
                let row = sub(&follow, &b.piece_at(s2, inst.conditional(a, s).weights()));
                let label = format!("conditional:{}:{}:{}", inst.signals()[s], inst.actions()[a], inst.signals()[s2]);
                b.push(label, row, Relation::Ge, inst.costs()[f] - inst.costs()[a]);
            }
        }
    }
    b.push("participation".into(), value.clone(), Relation::Ge, needed);
    for s in 0..k {
        for w in 0..b.n {
            let label = format!("limited-liability:{}:{}", inst.signals()[s], inst.outcomes().labels()[w]);
            b.push(label, b.corner(s, w), Relation::Ge, 0.0);
        }
    }
    for s in 0..k {
        let p = inst.conditional(plan.action(s), s).weights();
        for s2 in (0..k).filter(|&s2| s2 != s) {
            let row = sub(&b.piece_at(s, p), &b.piece_at(s2, p));
            b.push(format!("convexity:{}:{}", inst.signals()[s], inst.signals()[s2]), row, Relation::Ge, 0.0);
        }
    }

    let (pieces, objective, tight) = b.finish(value)?;
    let anchors: Vec<(Belief, usize)> = (0..k).map(|s| (inst.conditional(plan.action(s), s).clone(), s)).collect();
    assemble(inst, plan, Formulation::P6, pieces, objective, tight, anchors, tol)
}

/// Full formulation: one piece per `(action, extended signal)`.
pub fn solve_general_p5(inst: &ProblemInstance, plan: &Plan, tol: f64) -> Result<GeneralSolution> {
    require_acquire(inst, plan)?;
    let k = inst.n_signals();
    let m = inst.n_actions();
    let ext: Vec<ExtendedSignal> = (0..k).map(ExtendedSignal::Signal).chain([ExtendedSignal::Bottom]).collect();
    let idx = |a: usize, s: usize| a * (k + 1) + s;
    let belief = |a: usize, s: usize| -> &Belief {
        if s == k {
            inst.marginal(a)
        } else {
            inst.conditional(a, s)
        }
    };
    let mut b = Builder::new(inst, m * (k + 1));
    let (value, plan_cost) = plan_value(&b, plan, |s| idx(plan.action(s), s));
    let needed = plan_cost + inst.kappa();

    for a in 0..m {
        let row = sub(&value, &b.piece_at(idx(a, k), inst.marginal(a).weights()));
        b.push(format!("no-acquire:{}", inst.actions()[a]), row, Relation::Ge, needed - inst.costs()[a]);
    }
    for s in 0..k {
        let f = plan.action(s);
        let follow = b.piece_at(idx(f, s), inst.conditional(f, s).weights());
        for a in (0..m).filter(|&a| a != f) {
            let row = sub(&follow, &b.piece_at(idx(a, s), inst.conditional(a, s).weights()));
            let label = format!("conditional:{}:{}", inst.signals()[s], inst.actions()[a]);
            b.push(label, row, Relation::Ge, inst.costs()[f] - inst.costs()[a]);
        }
    }
    b.push("participation".into(), value.clone(), Relation::Ge, needed);
    for a in 0..m {
        for (s, es) in ext.iter().enumerate() {
            for w in 0..b.n {
                let label = format!(
                    "limited-liability:{}:{}:{}",
                    inst.actions()[a],
                    signal_label(inst, *es),
                    inst.outcomes().labels()[w]
                );
                b.push(label, b.corner(idx(a, s), w), Relation::Ge, 0.0);
            }
        }
    }
    for a in 0..m {
        for s in 0..=k {
            let p = belief(a, s).weights();
            let own = b.piece_at(idx(a, s), p);
            for a2 in 0..m {
                for s2 in 0..=k {
                    if (a2, s2) == (a, s) {
                        continue;
                    }
                    let row = sub(&own, &b.piece_at(idx(a2, s2), p));
                    let label = format!(
                        "convexity:{}:{}:{}:{}",
                        inst.actions()[a],
                        signal_label(inst, ext[s]),
                        inst.actions()[a2],
                        signal_label(inst, ext[s2])
                    );
                    b.push(label, row, Relation::Ge, 0.0);
                }
            }
        }
    }

    let (pieces, objective, tight) = b.finish(value)?;
    let anchors = (0..m)
        .flat_map(|a| (0..=k).map(move |s| (a, s)))
        .map(|(a, s)| (belief(a, s).clone(), idx(a, s)))
        .collect();
    assemble(inst, plan, Formulation::P5, pieces, objective, tight, anchors, tol)
}

pub fn solve_general(inst: &ProblemInstance, plan: &Plan, formulation: Formulation, tol: f64) -> Result<GeneralSolution> {
    match formulation {
        Formulation::P5 => solve_general_p5(inst, plan, tol),
        Formulation::P6 => solve_general_p6(inst, plan, tol),
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    inst: &ProblemInstance,
    plan: &Plan,
    formulation: Formulation,
    pieces: Vec<AffinePiece>,
    objective: f64,
    tight: Vec<String>,
    anchors: Vec<(Belief, usize)>,
    tol: f64,
) -> Result<GeneralSolution> {
    let mut menu = Menu::new(pieces.clone())?;
    for (p, k) in anchors {
        // round-off can leave the designated piece a hair below the max
        let k = if approx_eq_piece(&menu, &p, k) { k } else { menu.best_response(&p)?[0] };
        menu = menu.with_anchor(p, k)?;
    }
    let cert = verify_menu(&menu, inst, plan, tol)?;
    let report = SolveReport::new(Regime::General, menu, objective, cert);
    Ok(GeneralSolution { formulation, pieces, objective, tight, report })
}

fn approx_eq_piece(menu: &Menu, p: &Belief, k: usize) -> bool {
    let g = menu.eval_weights(p.weights());
    let h = menu.pieces()[k].eval_weights(p.weights());
    (g - h).abs() <= ABS_TOL + REL_TOL * g.abs()
}
