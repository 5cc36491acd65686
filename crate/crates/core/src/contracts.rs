//! Hidden action: the agent privately picks an action with outcome belief
//! `p_a` and cost `c_a`. Everything is driven by the convexified cost curve
//! `c(p) = min { Σλ(a)c_a : Σλ(a)p_a = p, λ ∈ Δ_A }`.

use crate::error::{Error, Result};
use crate::geometry::{dot, AffinePiece, Belief, Contract, Menu, OutcomeSpace, Plan, ProblemInstance};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::report::{Flag, Regime, SolveReport};
use crate::verify::verify_menu;
use crate::{approx_eq, ABS_TOL, DEFAULT_VERIFY_TOL, REL_TOL};

/// Threshold below which a strict-elicitation margin counts as zero.
pub const STRICT_MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ContractInstance {
    outcomes: OutcomeSpace,
    actions: Vec<String>,
    beliefs: Vec<Belief>,
    costs: Vec<f64>,
    target: usize,
}

impl ContractInstance {
    /// Outcomes `0, 1, …` and actions `a0, a1, …`.
    pub fn new(beliefs: Vec<Belief>, costs: Vec<f64>, target: usize) -> Result<Self> {
        let n = beliefs.first().map_or(0, Belief::len);
        let actions = (0..beliefs.len()).map(|a| format!("a{a}")).collect();
        Self::with_labels(OutcomeSpace::indexed(n)?, actions, beliefs, costs, target)
    }

    pub fn with_labels(
        outcomes: OutcomeSpace,
        actions: Vec<String>,
        beliefs: Vec<Belief>,
        costs: Vec<f64>,
        target: usize,
    ) -> Result<Self> {
        let problem = ProblemInstance::contracts(outcomes, actions, beliefs, costs)?;
        Self::from_problem(&problem, target)
    }

    /// Uses the action marginals, so multi-signal instances are read as if the
    /// signal were never acquired.
    pub fn from_problem(inst: &ProblemInstance, target: usize) -> Result<Self> {
        if target >= inst.n_actions() {
            return Err(Error::InvalidInstance(format!("target action index {target} out of range")));
        }
        Ok(Self {
            outcomes: inst.outcomes().clone(),
            actions: inst.actions().to_vec(),
            beliefs: (0..inst.n_actions()).map(|a| inst.marginal(a).clone()).collect(),
            costs: inst.costs().to_vec(),
            target,
        })
    }

    pub fn to_problem(&self) -> ProblemInstance {
        ProblemInstance::contracts(self.outcomes.clone(), self.actions.clone(), self.beliefs.clone(), self.costs.clone())
            .expect("validated on construction")
    }

    pub fn with_target(&self, target: usize) -> Result<Self> {
        if target >= self.actions.len() {
            return Err(Error::InvalidInstance(format!("target action index {target} out of range")));
        }
        Ok(Self { target, ..self.clone() })
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }
    pub fn actions(&self) -> &[String] {
        &self.actions
    }
    pub fn beliefs(&self) -> &[Belief] {
        &self.beliefs
    }
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
    pub fn target(&self) -> usize {
        self.target
    }
    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }
    fn p_star(&self) -> &[f64] {
        self.beliefs[self.target].weights()
    }
    fn c_star(&self) -> f64 {
        self.costs[self.target]
    }
    fn threshold(&self, tol: f64) -> f64 {
        tol * (1.0 + self.c_star())
    }
}

/// Cheapest mix of `points` (with `costs`) whose belief is `p`; `None` when
/// `p` is outside their hull.
pub(crate) fn lower_envelope(points: &[&Belief], costs: &[f64], p: &[f64]) -> Result<Option<f64>> {
    let k = points.len();
    let mut lp = LinearProgram::minimize(costs.to_vec()).all_nonneg();
    for (w, pw) in p.iter().enumerate() {
        lp.constrain(points.iter().map(|b| b[w]).collect(), Relation::Eq, *pw);
    }
    lp.constrain(vec![1.0; k], Relation::Eq, 1.0);
    Ok(match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Some(value),
        LpOutcome::Infeasible => None,
        LpOutcome::Unbounded => return Err(Error::UnexpectedLpStatus("unbounded in the cost curve")),
    })
}

/// `c(p)`; errors with [`Error::OutsideHull`] when no action mix reaches `p`.
pub fn cost_curve_eval(inst: &ContractInstance, p: &Belief) -> Result<f64> {
    if p.len() != inst.n_outcomes() {
        return Err(Error::DimensionMismatch { expected: inst.n_outcomes(), found: p.len() });
    }
    let points: Vec<&Belief> = inst.beliefs.iter().collect();
    lower_envelope(&points, &inst.costs, p.weights())?.ok_or(Error::OutsideHull)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elicitability {
    pub elicitable: bool,
    /// `c(p_{a*})`.
    pub curve: f64,
    /// `c_{a*} − c(p_{a*})`, non-negative up to round-off.
    pub gap: f64,
    /// The gap sits within a factor of ten of the acceptance threshold.
    pub marginal: bool,
}

/// Lower-boundary test `|c(p_{a*}) − c_{a*}| ≤ tol·(1 + c_{a*})`.
pub fn elicitability(inst: &ContractInstance, tol: f64) -> Result<Elicitability> {
    let curve = cost_curve_eval(inst, &inst.beliefs[inst.target])?;
    let gap = inst.c_star() - curve;
    let thr = inst.threshold(tol);
    Ok(Elicitability {
        elicitable: gap.abs() <= thr,
        curve,
        gap,
        marginal: gap.abs() > 0.1 * thr && gap.abs() < 10.0 * thr,
    })
}

pub fn is_elicitable(inst: &ContractInstance) -> bool {
    elicitability(inst, REL_TOL).is_ok_and(|e| e.elicitable)
}

fn require_elicitable(inst: &ContractInstance, tol: f64) -> Result<Elicitability> {
    let e = elicitability(inst, tol)?;
    if !e.elicitable {
        return Err(Error::NotElicitable {
            action: inst.actions[inst.target].clone(),
            curve: e.curve,
            cost: inst.c_star(),
        });
    }
    Ok(e)
}

/// Maximizes `min_ω v(ω) − v·p` over subgradients `v` of the curve at
/// `p = beliefs[at]` (value `c_ref`). Returns `(v, z)` with `min v = 0`.
fn best_subgradient(inst: &ContractInstance, at: usize, c_ref: f64) -> Result<(Vec<f64>, f64)> {
    let n = inst.n_outcomes();
    let p = inst.beliefs[at].weights();
    // variables: v (n), z
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for w in 0..n {
        let mut row: Vec<f64> = p.to_vec();
        row[w] -= 1.0;
        row.push(1.0);
        lp.constrain(row, Relation::Le, 0.0);
    }
    for (b, pb) in inst.beliefs.iter().enumerate() {
        let mut row: Vec<f64> = pb.weights().iter().zip(p).map(|(x, y)| x - y).collect();
        if row.iter().all(|x| x.abs() <= ABS_TOL) {
            continue;
        }
        row.push(0.0);
        lp.constrain(row, Relation::Le, inst.costs[b] - c_ref);
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, value } => {
            let mut v = x[..n].to_vec();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            v.iter_mut().for_each(|x| *x -= lo);
            Ok((v, value))
        }
        LpOutcome::Infeasible => Err(Error::UnexpectedLpStatus("infeasible in the subgradient program")),
        LpOutcome::Unbounded => Err(Error::UnexpectedLpStatus("unbounded in the subgradient program")),
    }
}

/// `t(ω) = c + v·(δ_ω − p) + shift`.
fn subtangent_contract(v: &[f64], p: &[f64], c: f64, shift: f64) -> Contract {
    let vp = dot(v, p);
    Contract::new(v.iter().map(|x| c + x - vp + shift).collect()).expect("finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalContract {
    pub contract: Contract,
    /// Subgradient, normalized to `min v = 0`.
    pub slope: Vec<f64>,
    /// Limited-liability shift actually applied, `max(0, raw_shift)`.
    pub shift: f64,
    pub raw_shift: f64,
    pub objective: f64,
}

/// Single optimal contract: best subgradient of the cost curve at the
/// target, shifted up just enough for limited liability.
pub fn optimal_contract(inst: &ContractInstance) -> Result<OptimalContract> {
    optimal_contract_with_tol(inst, REL_TOL)
}

pub fn optimal_contract_with_tol(inst: &ContractInstance, tol: f64) -> Result<OptimalContract> {
    let e = require_elicitable(inst, tol)?;
    let c_star = inst.c_star();
    // use the curve value so borderline instances keep a feasible polytope
    let (slope, z) = best_subgradient(inst, inst.target, e.curve.min(c_star))?;
    let raw_shift = -(c_star + z);
    let shift = raw_shift.max(0.0);
    let contract = subtangent_contract(&slope, inst.p_star(), c_star, shift);
    Ok(OptimalContract { objective: c_star + shift, contract, slope, shift, raw_shift })
}

fn single_contract_menu(inst: &ContractInstance, t: &Contract) -> Result<Menu> {
    Menu::from_contracts(std::slice::from_ref(t))?.with_anchor(inst.beliefs[inst.target].clone(), 0)
}

fn target_plan(inst: &ContractInstance, problem: &ProblemInstance) -> Plan {
    Plan::constant(problem, inst.target)
}

/// Optimal single-contract menu with its certificate.
pub fn solve_contract(inst: &ContractInstance, tol: f64) -> Result<SolveReport> {
    let e = require_elicitable(inst, tol)?;
    let opt = optimal_contract_with_tol(inst, tol)?;
    let menu = single_contract_menu(inst, &opt.contract)?;
    let problem = inst.to_problem();
    let cert = verify_menu(&menu, &problem, &target_plan(inst, &problem), tol.max(DEFAULT_VERIFY_TOL))?;
    let mut report = SolveReport::new(Regime::Contract, menu, opt.objective, cert);
    if e.marginal {
        report = report.with_flag(Flag::ToleranceMarginal);
    }
    Ok(report)
}

/// Keeps each candidate `t′` with `t̄′(p_a) − β ≤ c_a` for every action and
/// no negative payment, and adds them to the optimal contract.
pub fn enumerate_optimal_menu(inst: &ContractInstance, candidates: &[Contract]) -> Result<Menu> {
    let opt = optimal_contract(inst)?;
    let mut menu = single_contract_menu(inst, &opt.contract)?;
    for t in candidates {
        if t.len() != inst.n_outcomes() {
            return Err(Error::DimensionMismatch { expected: inst.n_outcomes(), found: t.len() });
        }
        if candidate_admissible(inst, t, opt.shift) {
            menu.push(AffinePiece::from(t))?;
        }
    }
    Ok(menu)
}

/// Membership test for extra menu members at shift `beta`.
pub fn candidate_admissible(inst: &ContractInstance, t: &Contract, beta: f64) -> bool {
    t.min_payment() >= 0.0
        && inst.beliefs.iter().zip(&inst.costs).all(|(p, c)| {
            let lhs = dot(t.payments(), p.weights()) - beta;
            lhs <= *c || approx_eq(lhs, *c)
        })
}

/// Subtangents of the cost curve at each action belief (lifted by `beta`)
/// that satisfy limited liability.
pub fn default_candidates(inst: &ContractInstance, beta: f64) -> Result<Vec<Contract>> {
    let points: Vec<&Belief> = inst.beliefs.iter().collect();
    let mut out: Vec<Contract> = Vec::new();
    for a in 0..inst.n_actions() {
        let p = inst.beliefs[a].weights();
        let c = lower_envelope(&points, &inst.costs, p)?.expect("own belief is in the hull");
        let (v, _) = best_subgradient(inst, a, c)?;
        let t = subtangent_contract(&v, p, c, beta);
        if t.min_payment() >= 0.0 && !out.iter().any(|o| o == &t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Lower-vertex test: no mix of the other actions reaches `p_{a*}` at cost
/// `c_{a*}` or less.
pub fn is_strictly_elicitable(inst: &ContractInstance) -> bool {
    strictly_elicitable_with_tol(inst, REL_TOL).unwrap_or(false)
}

pub fn strictly_elicitable_with_tol(inst: &ContractInstance, tol: f64) -> Result<bool> {
    if !elicitability(inst, tol)?.elicitable {
        return Ok(false);
    }
    let others: Vec<usize> = (0..inst.n_actions()).filter(|&a| a != inst.target).collect();
    if others.is_empty() {
        return Ok(true);
    }
    let points: Vec<&Belief> = others.iter().map(|&a| &inst.beliefs[a]).collect();
    let costs: Vec<f64> = others.iter().map(|&a| inst.costs[a]).collect();
    Ok(match lower_envelope(&points, &costs, inst.p_star())? {
        None => true,
        Some(v) => v > inst.c_star() + inst.threshold(tol),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrictSubgradient {
    pub slope: Vec<f64>,
    pub margin: f64,
}

/// Box bound on slope coordinates in the margin program.
pub fn slope_box(inst: &ContractInstance) -> f64 {
    let hi = inst.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = inst.costs.iter().copied().fold(f64::INFINITY, f64::min);
    1.0 + 10.0 * (hi - lo + 1.0)
}

/// Slope maximizing the uniform incentive margin `m ≤ 1` over every action
/// whose belief differs from the target's.
pub fn strict_subgradient(inst: &ContractInstance) -> Result<StrictSubgradient> {
    let n = inst.n_outcomes();
    let p_star = inst.p_star();
    let c_star = inst.c_star();
    let bound = slope_box(inst);
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for w in 0..n {
        lp.set_bounds(w, Some(-bound), Some(bound));
    }
    lp.set_bounds(n, None, Some(1.0));
    for (a, pa) in inst.beliefs.iter().enumerate() {
        if a == inst.target || pa.approx_eq(&inst.beliefs[inst.target]) {
            continue;
        }
        let mut row: Vec<f64> = pa.weights().iter().zip(p_star).map(|(x, y)| x - y).collect();
        row.push(1.0);
        lp.constrain(row, Relation::Le, inst.costs[a] - c_star);
    }
    let not_strict = |margin| Error::NotStrictlyElicitable { action: inst.actions[inst.target].clone(), margin };
    if !is_strictly_elicitable(inst) {
        // a duplicate of the target never enters the margin rows, so gate first
        return Err(not_strict(0.0));
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, value } => {
            if value <= STRICT_MARGIN_TOL {
                return Err(not_strict(value));
            }
            let mut slope = x[..n].to_vec();
            let lo = slope.iter().copied().fold(f64::INFINITY, f64::min);
            slope.iter_mut().for_each(|s| *s -= lo);
            Ok(StrictSubgradient { slope, margin: value })
        }
        LpOutcome::Infeasible => Err(not_strict(f64::NEG_INFINITY)),
        LpOutcome::Unbounded => Err(Error::UnexpectedLpStatus("unbounded in the margin program")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrictContract {
    pub contract: Contract,
    pub alpha: f64,
    pub objective: f64,
    /// Objective of the optimal (weak) contract.
    pub optimum: f64,
}

/// Mixes the optimal contract with a strictly eliciting one so the result is
/// strict and at most `epsilon` above the optimum.
pub fn strict_epsilon_optimal(inst: &ContractInstance, epsilon: f64) -> Result<StrictContract> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let t1 = optimal_contract(inst)?;
    let v2 = strict_subgradient(inst)?.slope;
    let p_star = inst.p_star();
    let c_star = inst.c_star();
    let z2 = v2.iter().copied().fold(f64::INFINITY, f64::min) - dot(&v2, p_star);
    let beta2 = (-(c_star + z2)).max(0.0);
    let t2 = subtangent_contract(&v2, p_star, c_star, beta2);
    let beta1 = t1.shift;
    let alpha = if beta2 > beta1 { (epsilon / (beta2 - beta1)).min(0.5) } else { 0.5 };
    let pay = t1
        .contract
        .payments()
        .iter()
        .zip(t2.payments())
        .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
        .collect();
    let contract = Contract::new(pay)?;
    Ok(StrictContract {
        objective: dot(contract.payments(), p_star),
        contract,
        alpha,
        optimum: t1.objective,
    })
}

/// Strict mode of [`solve_contract`].
pub fn solve_contract_strict(inst: &ContractInstance, epsilon: f64, tol: f64) -> Result<SolveReport> {
    require_elicitable(inst, tol)?;
    let s = strict_epsilon_optimal(inst, epsilon)?;
    let menu = single_contract_menu(inst, &s.contract)?;
    let problem = inst.to_problem();
    let cert = verify_menu(&menu, &problem, &target_plan(inst, &problem), tol.max(DEFAULT_VERIFY_TOL))?;
    Ok(SolveReport::new(Regime::Contract, menu, s.objective, cert).with_flag(Flag::Strict))
}
