//! Simplex geometry, contracts, menus, and the problem-instance data model.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{approx_eq, ABS_TOL};

/// Ordered, uniquely labelled outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 outcomes, got {}",
                labels.len()
            )));
        }
        check_labels("outcome", &labels)?;
        Ok(Self { labels })
    }

    /// Outcomes labelled `"0"`, `"1"`, ...
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub(crate) fn check_labels(kind: &str, labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if l.is_empty() {
            return Err(Error::InvalidInstance(format!("empty {kind} label")));
        }
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidInstance(format!("duplicate {kind} label {l:?}")));
        }
    }
    Ok(())
}

/// A probability distribution over outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Weights must be finite, non-negative and sum to one within `1e-9`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidBelief("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidBelief(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > ABS_TOL {
            return Err(Error::InvalidBelief(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Wraps computed weights (mixtures of valid beliefs) without re-validation.
    pub fn from_weights_unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn point_mass(n: usize, outcome: usize) -> Self {
        let mut w = vec![0.0; n];
        w[outcome] = 1.0;
        Self(w)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// `Σ_i weights[i] · beliefs[i]`.
    pub fn mixture(weights: &[f64], beliefs: &[&Belief]) -> Result<Self> {
        let n = beliefs.first().map(|b| b.len()).ok_or(Error::InvalidBelief("empty mixture".into()))?;
        let mut out = vec![0.0; n];
        for (w, b) in weights.iter().zip(beliefs) {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: b.len() });
            }
            for (o, p) in out.iter_mut().zip(b.weights()) {
                *o += w * p;
            }
        }
        Ok(Self(out))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|w| *w > 0.0)
    }

    /// Coordinatewise equality within the crate tolerances.
    pub fn approx_eq(&self, other: &Belief) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| approx_eq(*a, *b))
    }
}

impl std::ops::Index<usize> for Belief {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A payment per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Contract(Vec<f64>);

impl Contract {
    pub fn new(payments: Vec<f64>) -> Result<Self> {
        if payments.is_empty() {
            return Err(Error::InvalidContract("no payments".into()));
        }
        if let Some(x) = payments.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidContract(format!("payment {x} is not finite")));
        }
        Ok(Self(payments))
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn payments(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True iff every payment is non-negative (exactly; callers apply tolerance).
    pub fn has_limited_liability(&self) -> bool {
        self.0.iter().all(|x| *x >= 0.0)
    }

    pub fn min_payment(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn expected(&self, p: &Belief) -> Result<f64> {
        expected_payment(self, p)
    }
}

/// `Σ_ω p(ω) t(ω)`.
pub fn expected_payment(t: &Contract, p: &Belief) -> Result<f64> {
    if t.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), found: p.len() });
    }
    Ok(dot(t.payments(), p.weights()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The affine function `h(p) = slope · p − intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn new(slope: Vec<f64>, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn dim(&self) -> usize {
        self.slope.len()
    }

    pub fn eval(&self, p: &Belief) -> Result<f64> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: p.len() });
        }
        Ok(self.eval_weights(p.weights()))
    }

    pub(crate) fn eval_weights(&self, p: &[f64]) -> f64 {
        dot(&self.slope, p) - self.intercept
    }

    /// Value at the point mass on `outcome`, i.e. the induced contract's payment there.
    pub fn at_corner(&self, outcome: usize) -> f64 {
        self.slope[outcome] - self.intercept
    }

    /// The contract `(h(δ_ω))_ω`.
    pub fn to_contract(&self) -> Contract {
        Contract((0..self.dim()).map(|w| self.at_corner(w)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            slope: self.slope.iter().map(|x| x * factor).collect(),
            intercept: self.intercept * factor,
        }
    }
}

impl From<&Contract> for AffinePiece {
    fn from(t: &Contract) -> Self {
        Self { slope: t.payments().to_vec(), intercept: 0.0 }
    }
}

impl From<Contract> for AffinePiece {
    fn from(t: Contract) -> Self {
        Self { slope: t.0, intercept: 0.0 }
    }
}

/// A belief paired with the index of the piece designated as the subtangent there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub belief: Belief,
    pub piece: usize,
}

/// A finite menu, viewed as `G(p) = max_h h(p)` over its pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    pieces: Vec<AffinePiece>,
    anchors: Vec<Anchor>,
}

impl Menu {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let dim = pieces.first().ok_or(Error::EmptyMenu)?.dim();
        for p in &pieces {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
            }
            if !p.intercept.is_finite() || p.slope.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidContract("non-finite piece coefficient".into()));
            }
        }
        Ok(Self { pieces, anchors: Vec::new() })
    }

    pub fn from_contracts(contracts: &[Contract]) -> Result<Self> {
        Self::new(contracts.iter().map(AffinePiece::from).collect())
    }

    /// Designates `piece` as the subtangent at `belief`. Fails if the piece
    /// does not attain the menu maximum there.
    pub fn with_anchor(mut self, belief: Belief, piece: usize) -> Result<Self> {
        if piece >= self.pieces.len() {
            return Err(Error::Precondition(format!("piece index {piece} out of range")));
        }
        let g = self.eval(&belief)?;
        let h = self.pieces[piece].eval(&belief)?;
        if !approx_eq(g, h) {
            return Err(Error::Precondition(format!(
                "piece {piece} is not a subtangent at the anchor ({h} < {g})"
            )));
        }
        self.anchors.push(Anchor { belief, piece });
        Ok(self)
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contracts(&self) -> Vec<Contract> {
        self.pieces.iter().map(AffinePiece::to_contract).collect()
    }

    /// `max_h h(p)`.
    pub fn eval(&self, p: &Belief) -> Result<f64> {
        if self.pieces.is_empty() {
            return Err(Error::EmptyMenu);
        }
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: p.len() });
        }
        Ok(self.eval_weights(p.weights()))
    }

    pub(crate) fn eval_weights(&self, p: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|h| h.eval_weights(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of all pieces attaining the max at `p` within tolerance, in order.
    pub fn best_response(&self, p: &Belief) -> Result<Vec<usize>> {
        let g = self.eval(p)?;
        Ok(self
            .pieces
            .iter()
            .enumerate()
            .filter(|(_, h)| approx_eq(h.eval_weights(p.weights()), g))
            .map(|(i, _)| i)
            .collect())
    }

    /// `M_G(ω)`: the smallest payment at `outcome` over the menu's contracts.
    pub fn min_payment(&self, outcome: usize) -> Result<f64> {
        if self.pieces.is_empty() {
            return Err(Error::EmptyMenu);
        }
        if outcome >= self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: outcome + 1 });
        }
        Ok(self
            .pieces
            .iter()
            .map(|h| h.at_corner(outcome))
            .fold(f64::INFINITY, f64::min))
    }

    /// Multiplies every piece (slope and intercept) by `factor`; anchors are kept.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pieces: self.pieces.iter().map(|h| h.scaled(factor)).collect(),
            anchors: self.anchors.clone(),
        }
    }

    /// Appends a piece with no anchor.
    pub fn push(&mut self, piece: AffinePiece) -> Result<()> {
        if piece.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: piece.dim() });
        }
        self.pieces.push(piece);
        Ok(())
    }

    /// Checks every designated subtangent still attains `G` at its anchor.
    pub fn anchors_consistent(&self) -> bool {
        self.anchors.iter().all(|a| {
            let g = self.eval_weights(a.belief.weights());
            approx_eq(self.pieces[a.piece].eval_weights(a.belief.weights()), g)
        })
    }
}

/// Weights expressing `p0 = β·p + Σ_{ω'≠ω} β_{ω'}·δ_{ω'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDecomposition {
    /// The outcome whose corner is left out.
    pub outcome: usize,
    pub beta: f64,
    /// `β_{ω'}` per outcome; the entry at `outcome` is zero.
    pub corner_weights: Vec<f64>,
}

impl PriorDecomposition {
    pub fn reconstruct(&self, p: &Belief) -> Vec<f64> {
        p.weights()
            .iter()
            .zip(&self.corner_weights)
            .map(|(pw, cw)| self.beta * pw + cw)
            .collect()
    }
}

/// Writes a full-support `p0` as a mixture of `p` and all corners but one.
/// The left-out outcome maximizes `p(ω)/p0(ω)`, lowest index on ties.
pub fn prior_decomposition(p: &Belief, p0: &Belief) -> Result<PriorDecomposition> {
    if p.len() != p0.len() {
        return Err(Error::DimensionMismatch { expected: p0.len(), found: p.len() });
    }
    if let Some(w) = p0.weights().iter().position(|w| *w <= 0.0) {
        return Err(Error::ZeroMassOutcome { label: w.to_string() });
    }
    let mut outcome = 0;
    let mut best = f64::NEG_INFINITY;
    for (w, (pw, p0w)) in p.weights().iter().zip(p0.weights()).enumerate() {
        let ratio = pw / p0w;
        if ratio > best {
            best = ratio;
            outcome = w;
        }
    }
    let beta = p0[outcome] / p[outcome];
    let corner_weights = p
        .weights()
        .iter()
        .zip(p0.weights())
        .enumerate()
        .map(|(w, (pw, p0w))| if w == outcome { 0.0 } else { (p0w - beta * pw).max(0.0) })
        .collect();
    Ok(PriorDecomposition { outcome, beta, corner_weights })
}

/// The full model: outcomes, signals, actions, signal prior `q`, conditional
/// outcome beliefs `p_{a,σ}`, action costs and acquisition cost `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    outcomes: OutcomeSpace,
    signals: Vec<String>,
    actions: Vec<String>,
    q: Vec<f64>,
    /// Indexed `[action][signal]`.
    conditionals: Vec<Vec<Belief>>,
    costs: Vec<f64>,
    kappa: f64,
    marginals: Vec<Belief>,
}

impl ProblemInstance {
    pub fn new(
        outcomes: OutcomeSpace,
        signals: Vec<String>,
        actions: Vec<String>,
        q: Vec<f64>,
        conditionals: Vec<Vec<Belief>>,
        costs: Vec<f64>,
        kappa: f64,
    ) -> Result<Self> {
        let n = outcomes.len();
        if signals.is_empty() || actions.is_empty() {
            return Err(Error::InvalidInstance("need at least one signal and one action".into()));
        }
        check_labels("signal", &signals)?;
        check_labels("action", &actions)?;
        if q.len() != signals.len() {
            return Err(Error::DimensionMismatch { expected: signals.len(), found: q.len() });
        }
        Belief::new(q.clone()).map_err(|e| Error::InvalidInstance(format!("signal prior q: {e}")))?;
        if conditionals.len() != actions.len() {
            return Err(Error::DimensionMismatch { expected: actions.len(), found: conditionals.len() });
        }
        for row in &conditionals {
            if row.len() != signals.len() {
                return Err(Error::DimensionMismatch { expected: signals.len(), found: row.len() });
            }
            for b in row {
                if b.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: b.len() });
                }
            }
        }
        if costs.len() != actions.len() {
            return Err(Error::DimensionMismatch { expected: actions.len(), found: costs.len() });
        }
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidInstance("action costs must be finite and non-negative".into()));
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidInstance("acquisition cost must be finite and non-negative".into()));
        }
        let marginals = conditionals
            .iter()
            .map(|row| Belief::mixture(&q, &row.iter().collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { outcomes, signals, actions, q, conditionals, costs, kappa, marginals })
    }

    /// Hidden-action-only instance: one signal with `q = (1)` and `κ = 0`.
    pub fn contracts(outcomes: OutcomeSpace, actions: Vec<String>, beliefs: Vec<Belief>, costs: Vec<f64>) -> Result<Self> {
        let conditionals = beliefs.into_iter().map(|b| vec![b]).collect();
        Self::new(outcomes, vec!["*".into()], actions, vec![1.0], conditionals, costs, 0.0)
    }

    /// Information-acquisition-only instance: one zero-cost action whose
    /// conditionals are the posteriors.
    pub fn information(outcomes: OutcomeSpace, signals: Vec<String>, q: Vec<f64>, posteriors: Vec<Belief>, kappa: f64) -> Result<Self> {
        Self::new(outcomes, signals, vec!["report".into()], q, vec![posteriors], vec![0.0], kappa)
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }
    pub fn signals(&self) -> &[String] {
        &self.signals
    }
    pub fn actions(&self) -> &[String] {
        &self.actions
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// `p_{a,σ}`.
    pub fn conditional(&self, action: usize, signal: usize) -> &Belief {
        &self.conditionals[action][signal]
    }

    /// `p_a = Σ_σ q(σ) p_{a,σ}`.
    pub fn marginal(&self, action: usize) -> &Belief {
        &self.marginals[action]
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == label)
    }

    pub fn signal_index(&self, label: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == label)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let mut out = self.clone();
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidInstance("acquisition cost must be finite and non-negative".into()));
        }
        out.kappa = kappa;
        Ok(out)
    }

    /// Drops outcomes that have zero mass in every conditional belief.
    /// Returns the reduced instance and the removed labels.
    pub fn reduce_outcomes(&self) -> Result<(Self, Vec<String>)> {
        let n = self.n_outcomes();
        let keep: Vec<usize> = (0..n)
            .filter(|&w| self.conditionals.iter().flatten().any(|b| b[w] > 0.0))
            .collect();
        if keep.len() == n {
            return Ok((self.clone(), Vec::new()));
        }
        let removed = (0..n)
            .filter(|w| !keep.contains(w))
            .map(|w| self.outcomes.labels()[w].clone())
            .collect();
        let outcomes = OutcomeSpace::new(keep.iter().map(|&w| self.outcomes.labels()[w].clone()).collect())?;
        let conditionals = self
            .conditionals
            .iter()
            .map(|row| {
                row.iter()
                    .map(|b| Belief::from_weights_unchecked(keep.iter().map(|&w| b[w]).collect()))
                    .collect()
            })
            .collect();
        let reduced = Self::new(
            outcomes,
            self.signals.clone(),
            self.actions.clone(),
            self.q.clone(),
            conditionals,
            self.costs.clone(),
            self.kappa,
        )?;
        Ok((reduced, removed))
    }
}

/// Acquire-or-not plus the signal → action assignment (action indices per signal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub acquire: bool,
    pub assignment: Vec<usize>,
}

impl Plan {
    pub fn acquire(assignment: Vec<usize>) -> Self {
        Self { acquire: true, assignment }
    }

    /// Acquire and take `action` regardless of the signal.
    pub fn constant(inst: &ProblemInstance, action: usize) -> Self {
        Self { acquire: true, assignment: vec![action; inst.n_signals()] }
    }

    pub fn from_labels(inst: &ProblemInstance, acquire: bool, f: &[(String, String)]) -> Result<Self> {
        let mut assignment = vec![usize::MAX; inst.n_signals()];
        for (s, a) in f {
            let si = inst
                .signal_index(s)
                .ok_or_else(|| Error::InvalidInstance(format!("plan names unknown signal {s:?}")))?;
            let ai = inst
                .action_index(a)
                .ok_or_else(|| Error::InvalidInstance(format!("plan names unknown action {a:?}")))?;
            assignment[si] = ai;
        }
        let plan = Self { acquire, assignment };
        plan.validate(inst)?;
        Ok(plan)
    }

    pub fn validate(&self, inst: &ProblemInstance) -> Result<()> {
        if self.assignment.len() != inst.n_signals() {
            return Err(Error::DimensionMismatch { expected: inst.n_signals(), found: self.assignment.len() });
        }
        if let Some(s) = self.assignment.iter().position(|&a| a >= inst.n_actions()) {
            return Err(Error::InvalidInstance(format!(
                "plan does not assign a valid action to signal {:?}",
                inst.signals()[s]
            )));
        }
        Ok(())
    }

    pub fn action(&self, signal: usize) -> usize {
        self.assignment[signal]
    }
}
