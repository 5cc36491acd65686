//! Independent checks: exhaustive agent best response, menu certificates,
//! and LP / grid oracles used to cross-check the solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::contracts::{cost_curve_eval, ContractInstance};
use crate::error::{Error, Result};
use crate::geometry::{dot, Belief, Contract, Menu, Plan, ProblemInstance};
use crate::ia::IaInstance;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::{approx_eq, DEFAULT_VERIFY_TOL};

/// One (action, contract) pick by the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Choice {
    pub action: usize,
    pub contract: usize,
}

/// Any behaviour available to the agent facing a menu.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeviationStrategy {
    NoAcquire(Choice),
    /// One choice per signal, in signal order.
    Acquire { choices: Vec<Choice> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintFamily {
    Incentive,
    Participation,
    LimitedLiability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slack {
    pub family: ConstraintFamily,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub plan_utility: f64,
    pub best_deviation_utility: f64,
    pub best_deviation: DeviationStrategy,
    pub slacks: Vec<Slack>,
    pub tol: f64,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Families with at least one slack below `-tol`.
    pub fn failed_families(&self) -> Vec<ConstraintFamily> {
        let mut out = Vec::new();
        for s in &self.slacks {
            if s.value < -self.tol && !out.contains(&s.family) {
                out.push(s.family);
            }
        }
        out
    }

    pub fn min_slack(&self, family: ConstraintFamily) -> Option<f64> {
        self.slacks
            .iter()
            .filter(|s| s.family == family)
            .map(|s| s.value)
            .reduce(f64::min)
    }

    /// Labels of slacks within `tol` of zero.
    pub fn binding(&self) -> Vec<String> {
        self.slacks
            .iter()
            .filter(|s| s.value.abs() <= self.tol)
            .map(|s| s.label.clone())
            .collect()
    }
}

fn check_dims(menu: &Menu, inst: &ProblemInstance) -> Result<()> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    if menu.dim() != inst.n_outcomes() {
        return Err(Error::DimensionMismatch { expected: inst.n_outcomes(), found: menu.dim() });
    }
    Ok(())
}

fn best_contract(menu: &Menu, p: &Belief) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, h) in menu.pieces().iter().enumerate() {
        let v = h.eval_weights(p.weights());
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Exhaustive search over every agent strategy: skip acquisition and pick an
/// (action, contract), or acquire and pick one per signal. Acquisition is
/// preferred on ties.
pub fn agent_best_response(menu: &Menu, inst: &ProblemInstance) -> Result<(DeviationStrategy, f64)> {
    check_dims(menu, inst)?;
    let mut choices = Vec::with_capacity(inst.n_signals());
    let mut acquire_utility = -inst.kappa();
    for s in 0..inst.n_signals() {
        let mut best: Option<(Choice, f64)> = None;
        for a in 0..inst.n_actions() {
            let (contract, pay) = best_contract(menu, inst.conditional(a, s));
            let u = pay - inst.costs()[a];
            if best.is_none_or(|(_, bu)| u > bu) {
                best = Some((Choice { action: a, contract }, u));
            }
        }
        let (choice, u) = best.expect("at least one action");
        acquire_utility += inst.q()[s] * u;
        choices.push(choice);
    }
    let mut best = (DeviationStrategy::Acquire { choices }, acquire_utility);
    for a in 0..inst.n_actions() {
        let (contract, pay) = best_contract(menu, inst.marginal(a));
        let u = pay - inst.costs()[a];
        if u > best.1 && !approx_eq(u, best.1) {
            best = (DeviationStrategy::NoAcquire(Choice { action: a, contract }), u);
        }
    }
    Ok(best)
}

/// Agent utility of a fully specified strategy.
pub fn strategy_utility(menu: &Menu, inst: &ProblemInstance, strategy: &DeviationStrategy) -> Result<f64> {
    check_dims(menu, inst)?;
    let pay = |c: &Choice, p: &Belief| -> Result<f64> {
        let h = menu
            .pieces()
            .get(c.contract)
            .ok_or_else(|| Error::Precondition(format!("no contract {}", c.contract)))?;
        if c.action >= inst.n_actions() {
            return Err(Error::Precondition(format!("no action {}", c.action)));
        }
        Ok(h.eval_weights(p.weights()) - inst.costs()[c.action])
    };
    match strategy {
        DeviationStrategy::NoAcquire(c) => {
            if c.action >= inst.n_actions() {
                return Err(Error::Precondition(format!("no action {}", c.action)));
            }
            pay(c, inst.marginal(c.action))
        }
        DeviationStrategy::Acquire { choices } => {
            if choices.len() != inst.n_signals() {
                return Err(Error::DimensionMismatch { expected: inst.n_signals(), found: choices.len() });
            }
            let mut u = -inst.kappa();
            for (s, c) in choices.iter().enumerate() {
                if c.action >= inst.n_actions() {
                    return Err(Error::Precondition(format!("no action {}", c.action)));
                }
                u += inst.q()[s] * pay(c, inst.conditional(c.action, s))?;
            }
            Ok(u)
        }
    }
}

/// Agent utility of following `plan` against `menu`.
pub fn plan_utility(menu: &Menu, inst: &ProblemInstance, plan: &Plan) -> Result<f64> {
    check_dims(menu, inst)?;
    plan.validate(inst)?;
    if !plan.acquire {
        let a = plan.action(0);
        return Ok(menu.eval(inst.marginal(a))? - inst.costs()[a]);
    }
    let mut u = -inst.kappa();
    for s in 0..inst.n_signals() {
        let a = plan.action(s);
        u += inst.q()[s] * (menu.eval(inst.conditional(a, s))? - inst.costs()[a]);
    }
    Ok(u)
}

/// Certifies that `menu` elicits `plan`: incentive against every deviation,
/// participation, and limited liability at every outcome.
pub fn verify_menu(menu: &Menu, inst: &ProblemInstance, plan: &Plan, tol: f64) -> Result<Certificate> {
    check_dims(menu, inst)?;
    plan.validate(inst)?;
    let u = plan_utility(menu, inst, plan)?;
    let (best_deviation, best_u) = agent_best_response(menu, inst)?;
    let mut slacks = Vec::new();

    if plan.acquire {
        for a in 0..inst.n_actions() {
            slacks.push(Slack {
                family: ConstraintFamily::Incentive,
                label: format!("incentive:no-acquire:{}", inst.actions()[a]),
                value: u - (menu.eval(inst.marginal(a))? - inst.costs()[a]),
            });
        }
        for s in (0..inst.n_signals()).filter(|&s| inst.q()[s] > 0.0) {
            let f = plan.action(s);
            let follow = menu.eval(inst.conditional(f, s))? - inst.costs()[f];
            for a in (0..inst.n_actions()).filter(|&a| a != f) {
                slacks.push(Slack {
                    family: ConstraintFamily::Incentive,
                    label: format!("incentive:{}:{}", inst.signals()[s], inst.actions()[a]),
                    value: follow - (menu.eval(inst.conditional(a, s))? - inst.costs()[a]),
                });
            }
        }
    }
    slacks.push(Slack {
        family: ConstraintFamily::Incentive,
        label: "incentive:best-response".into(),
        value: u - best_u,
    });
    slacks.push(Slack {
        family: ConstraintFamily::Participation,
        label: "participation".into(),
        value: u,
    });
    for w in 0..inst.n_outcomes() {
        slacks.push(Slack {
            family: ConstraintFamily::LimitedLiability,
            label: format!("limited-liability:{}", inst.outcomes().labels()[w]),
            value: menu.min_payment(w)?,
        });
    }
    let verdict = if slacks.iter().all(|s| s.value >= -tol) { Verdict::Pass } else { Verdict::Fail };
    Ok(Certificate {
        plan_utility: u,
        best_deviation_utility: best_u,
        best_deviation,
        slacks,
        tol,
        verdict,
    })
}

/// [`verify_menu`] at the default tolerance.
pub fn certify(menu: &Menu, inst: &ProblemInstance, plan: &Plan) -> Result<Certificate> {
    verify_menu(menu, inst, plan, DEFAULT_VERIFY_TOL)
}

/// Minimum expected payment for acquisition, computed by LP over menus with
/// one affine piece per posterior plus one at the prior.
pub fn ia_lp_oracle(inst: &IaInstance) -> Result<f64> {
    ia_lp_oracle_with_anchors(inst, &[])
}

/// [`ia_lp_oracle`] with an extra piece anchored at every simplex corner.
pub fn ia_lp_oracle_dense(inst: &IaInstance) -> Result<f64> {
    let n = inst.n_outcomes();
    let corners: Vec<Belief> = (0..n).map(|w| Belief::point_mass(n, w)).collect();
    ia_lp_oracle_with_anchors(inst, &corners)
}

fn ia_lp_oracle_with_anchors(inst: &IaInstance, extra: &[Belief]) -> Result<f64> {
    if !inst.is_nontrivial() {
        return Err(Error::Precondition("oracle requires a nontrivial instance".into()));
    }
    let n = inst.n_outcomes();
    let k_sig = inst.posteriors().len();
    // pieces: posteriors, then the prior, then extras
    let n_pieces = k_sig + 1 + extra.len();
    let width = n + 1;
    let nv = n_pieces * width;
    // h_k(p) = x_k·p − y_k; coefficients of h_k(p) in the variable vector
    let piece_at = |k: usize, p: &[f64]| -> Vec<f64> {
        let mut row = vec![0.0; nv];
        row[k * width..k * width + n].copy_from_slice(p);
        row[k * width + n] = -1.0;
        row
    };
    let mut expected = vec![0.0; nv];
    for (s, p) in inst.posteriors().iter().enumerate() {
        for (e, r) in expected.iter_mut().zip(piece_at(s, p.weights())) {
            *e += inst.q()[s] * r;
        }
    }
    let mut lp = LinearProgram::minimize(expected.clone());
    let p0 = inst.prior().weights();
    for k in 0..n_pieces {
        // E h_σ(p_σ) − h_k(p0) ≥ κ
        let row: Vec<f64> = expected.iter().zip(piece_at(k, p0)).map(|(e, h)| e - h).collect();
        lp.constrain(row, Relation::Ge, inst.kappa());
        for w in 0..n {
            let mut corner = vec![0.0; n];
            corner[w] = 1.0;
            lp.constrain(piece_at(k, &corner), Relation::Ge, 0.0);
        }
    }
    let anchors: Vec<(usize, &[f64])> = inst
        .posteriors()
        .iter()
        .enumerate()
        .map(|(s, p)| (s, p.weights()))
        .chain(extra.iter().enumerate().map(|(i, p)| (k_sig + 1 + i, p.weights())))
        .collect();
    for &(k, p) in &anchors {
        for other in (0..n_pieces).filter(|&o| o != k) {
            let row: Vec<f64> = piece_at(k, p).iter().zip(piece_at(other, p)).map(|(a, b)| a - b).collect();
            lp.constrain(row, Relation::Ge, 0.0);
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible => Err(Error::UnexpectedLpStatus("infeasible in the acquisition oracle")),
        LpOutcome::Unbounded => Err(Error::UnexpectedLpStatus("unbounded in the acquisition oracle")),
    }
}

/// Samples mixtures `λ` of actions and checks `c(Σλp_a) ≤ Σλc_a + tol`.
/// Returns the number of violating trials (zero means pass).
pub fn cost_curve_property_probe(inst: &ContractInstance, trials: usize, seed: u64, tol: f64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = inst.n_actions();
    let mut failures = 0;
    for _ in 0..trials {
        let raw: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = raw.iter().sum();
        let lambda: Vec<f64> = raw.iter().map(|x| x / total).collect();
        if mixture_violates(inst, &lambda, tol)? {
            failures += 1;
        }
    }
    Ok(failures)
}

/// True when the cost curve at the λ-mixture exceeds the mixed cost by more than `tol`.
pub fn mixture_violates(inst: &ContractInstance, lambda: &[f64], tol: f64) -> Result<bool> {
    let beliefs: Vec<&Belief> = inst.beliefs().iter().collect();
    let p = Belief::mixture(lambda, &beliefs)?;
    let mixed_cost = dot(lambda, inst.costs());
    Ok(cost_curve_eval(inst, &p)? > mixed_cost + tol)
}

/// Exhaustive search over single contracts on the grid `{0, step, 2·step, …} ≤ upper`
/// in every outcome but the last; the last payment is set to the smallest
/// grid value satisfying every constraint. Returns the cheapest feasible
/// contract and its expected payment, or `None` when no grid contract works.
pub fn grid_single_contract(inst: &ContractInstance, step: f64, upper: f64) -> Option<(Contract, f64)> {
    let n = inst.n_outcomes();
    let target = inst.target();
    let p_star = inst.beliefs()[target].weights();
    let c_star = inst.costs()[target];
    let steps = (upper / step).floor() as usize;
    let last = n - 1;
    let mut prefix = vec![0usize; last];
    let mut best: Option<(Contract, f64)> = None;
    loop {
        let head: Vec<f64> = prefix.iter().map(|&k| k as f64 * step).collect();
        if let Some(tail) = cheapest_last_payment(inst, &head, p_star, c_star, step, steps) {
            let mut pay = head.clone();
            pay.push(tail);
            let value = dot(&pay, p_star);
            if best.as_ref().is_none_or(|(_, bv)| value < *bv) {
                best = Some((Contract::new(pay).expect("finite"), value));
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == last {
                return best;
            }
            prefix[i] += 1;
            if prefix[i] <= steps {
                break;
            }
            prefix[i] = 0;
            i += 1;
        }
    }
}

fn cheapest_last_payment(
    inst: &ContractInstance,
    head: &[f64],
    p_star: &[f64],
    c_star: f64,
    step: f64,
    steps: usize,
) -> Option<f64> {
    const SLOP: f64 = 1e-12;
    let last = head.len();
    let mut lo: f64 = 0.0;
    let mut hi = steps as f64 * step;
    // each constraint reads  t_last · d ≥ r
    let mut require = |d: f64, r: f64| -> bool {
        if d > 0.0 {
            lo = lo.max(r / d);
        } else if d < 0.0 {
            hi = hi.min(r / d);
        } else if r > SLOP {
            return false;
        }
        true
    };
    let partial = |p: &[f64]| -> f64 { head.iter().zip(p).map(|(t, pw)| t * pw).sum() };
    if !require(p_star[last], c_star - partial(p_star)) {
        return None;
    }
    for (a, pa) in inst.beliefs().iter().enumerate() {
        if a == inst.target() {
            continue;
        }
        let pa = pa.weights();
        let d = p_star[last] - pa[last];
        let r = c_star - inst.costs()[a] - (partial(p_star) - partial(pa));
        if !require(d, r) {
            return None;
        }
    }
    let k = ((lo - SLOP) / step).ceil().max(0.0);
    let t = k * step;
    (t <= hi + SLOP).then_some(t)
}
