//! Dense two-phase simplex.
//!
//! Programs are stated over variables with optional bounds (free by default)
//! and `≤ / = / ≥` rows. Internally every variable is shifted or split into
//! non-negative columns, rows are sign-normalized so the right-hand side is
//! non-negative, and phase one minimizes the sum of artificials.

use thiserror::Error;

/// Pivot and degeneracy tolerance.
const PIVOT_TOL: f64 = 1e-9;
/// Slack allowed in the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: usize = 50;
/// Pivots between refactorizations.
const REFRESH_EVERY: usize = 100;
/// Tableau entries below this after a pivot are treated as exact zeros.
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("constraint {row} has {found} coefficients, expected {expected}")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("bounds given for {found} variables, expected {expected}")]
    BoundsWidth { expected: usize, found: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("variable {var} has lower bound above upper bound")]
    InvertedBounds { var: usize },
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const FREE: Bounds = Bounds { lower: None, upper: None };
    pub const NONNEG: Bounds = Bounds { lower: Some(0.0), upper: None };
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bounds>,
}

impl LinearProgram {
    /// A program over `objective.len()` free variables with no rows.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { sense, objective, constraints: Vec::new(), bounds: vec![Bounds::FREE; n] }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> &mut Self {
        self.bounds[var] = Bounds { lower, upper };
        self
    }

    pub fn all_nonneg(mut self) -> Self {
        self.bounds.iter_mut().for_each(|b| *b = Bounds::NONNEG);
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(LpError::BoundsWidth { expected: n, found: self.bounds.len() });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::RowWidth { row, expected: n, found: c.coeffs.len() });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::NonFinite("constraint"));
            }
        }
        for (var, b) in self.bounds.iter().enumerate() {
            if b.lower.is_some_and(|l| l.is_nan() || l == f64::INFINITY)
                || b.upper.is_some_and(|u| u.is_nan() || u == f64::NEG_INFINITY)
            {
                return Err(LpError::NonFinite("bounds"));
            }
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l > u {
                    return Err(LpError::InvertedBounds { var });
                }
            }
        }
        Ok(())
    }

    /// Row activity `a·x` for every constraint.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| dot(&c.coeffs, x)).collect()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let ax = dot(&c.coeffs, x);
            let v = match c.relation {
                Relation::Le => ax - c.rhs,
                Relation::Ge => c.rhs - ax,
                Relation::Eq => (ax - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (b, xi) in self.bounds.iter().zip(x) {
            if let Some(l) = b.lower {
                worst = worst.max(l - xi);
            }
            if let Some(u) = b.upper {
                worst = worst.max(xi - u);
            }
        }
        worst
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        solve_lp(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal { .. } => LpStatus::Optimal,
            LpOutcome::Infeasible => LpStatus::Infeasible,
            LpOutcome::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn solution(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How an original variable maps onto non-negative columns:
/// `x = offset + Σ sign·col`.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let n = lp.n_vars();

    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    // rows added for two-sided bounds: (column, width)
    let mut bound_rows = Vec::new();
    for b in &lp.bounds {
        let lower = b.lower.filter(|l| l.is_finite());
        let upper = b.upper.filter(|u| u.is_finite());
        let map = match (lower, upper) {
            (Some(l), u) => {
                if let Some(u) = u {
                    bound_rows.push((ncols, u - l));
                }
                VarMap { offset: l, cols: vec![(ncols, 1.0)] }
            }
            (None, Some(u)) => VarMap { offset: u, cols: vec![(ncols, -1.0)] },
            (None, None) => {
                ncols += 1;
                VarMap { offset: 0.0, cols: vec![(ncols - 1, 1.0), (ncols, -1.0)] }
            }
        };
        ncols += 1;
        maps.push(map);
    }

    // Rows over structural columns, rhs adjusted for offsets.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(lp.constraints.len() + bound_rows.len());
    for c in &lp.constraints {
        let mut a = vec![0.0; ncols];
        let mut rhs = c.rhs;
        for (j, coef) in c.coeffs.iter().enumerate() {
            if *coef == 0.0 {
                continue;
            }
            rhs -= coef * maps[j].offset;
            for &(col, sign) in &maps[j].cols {
                a[col] += coef * sign;
            }
        }
        rows.push((a, c.relation, rhs));
    }
    for &(col, width) in &bound_rows {
        let mut a = vec![0.0; ncols];
        a[col] = 1.0;
        rows.push((a, Relation::Le, width));
    }

    let mut cost = vec![0.0; ncols];
    let mut cost_offset = 0.0;
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for (j, c) in lp.objective.iter().enumerate() {
        cost_offset += c * maps[j].offset;
        for &(col, s) in &maps[j].cols {
            cost[col] += sign * c * s;
        }
    }

    let mut tab = Tableau::build(ncols, &rows);
    let status = tab.run(&cost);
    let cols = match status {
        Phase::Infeasible => return Ok(LpOutcome::Infeasible),
        Phase::Unbounded => return Ok(LpOutcome::Unbounded),
        Phase::Stalled => return Err(LpError::IterationLimit),
        Phase::Optimal(cols) => cols,
    };

    let x: Vec<f64> = maps
        .iter()
        .map(|m| m.offset + m.cols.iter().map(|&(col, s)| s * cols[col]).sum::<f64>())
        .collect();
    let value = dot(&lp.objective, &x);
    debug_assert!((value - (sign * dot(&cost, &cols) + cost_offset)).abs() <= 1e-6 * (1.0 + value.abs()));
    Ok(LpOutcome::Optimal { value, x })
}

enum Phase {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
    Stalled,
}

#[derive(Debug, PartialEq, Eq)]
enum Step {
    Optimal,
    Unbounded,
    Stalled,
}

/// Row-major dense tableau `[A | b]` with an explicit basis.
struct Tableau {
    /// Structural plus slack columns; artificials follow.
    n_real: usize,
    width: usize,
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    artificial: Vec<bool>,
    /// The rows as built, kept in step with `rows` for refactorization.
    original: Vec<Vec<f64>>,
}

impl Tableau {
    fn build(ncols: usize, rows: &[(Vec<f64>, Relation, f64)]) -> Self {
        // Rows are negated when the rhs is negative, and `≥ 0` rows are
        // negated too so their slack can start in the basis.
        let flip = |rel: Relation, rhs: f64| rhs < 0.0 || (rel == Relation::Ge && rhs == 0.0);
        let needs_artificial = |rel: Relation, rhs: f64| match rel {
            Relation::Le => flip(rel, rhs),
            Relation::Ge => !flip(rel, rhs),
            Relation::Eq => true,
        };
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_real = ncols + n_slack;
        let n_art = rows.iter().filter(|(_, rel, rhs)| needs_artificial(*rel, *rhs)).count();
        let width = n_real + n_art;
        let mut out = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let mut slack = ncols;
        let mut art = n_real;
        for (a, rel, rhs) in rows {
            let mut r = vec![0.0; width + 1];
            r[..ncols].copy_from_slice(a);
            r[width] = *rhs;
            match rel {
                Relation::Le => r[slack] = 1.0,
                Relation::Ge => r[slack] = -1.0,
                Relation::Eq => {}
            }
            if flip(*rel, *rhs) {
                r.iter_mut().for_each(|x| *x = -*x);
            }
            if needs_artificial(*rel, *rhs) {
                r[art] = 1.0;
                basis.push(art);
                art += 1;
            } else {
                basis.push(slack);
            }
            if *rel != Relation::Eq {
                slack += 1;
            }
            out.push(r);
        }
        let mut artificial = vec![false; width];
        artificial[n_real..].iter_mut().for_each(|a| *a = true);
        Self { n_real, width, original: out.clone(), rows: out, basis, artificial }
    }

    /// Recomputes the tableau from the original rows for the current basis
    /// (Gauss-Jordan with partial pivoting), discarding accumulated
    /// round-off. Leaves the tableau untouched if the basis looks singular.
    fn refactor(&mut self) {
        let m = self.rows.len();
        let mut rows = self.original.clone();
        let mut assigned = vec![false; m];
        let mut basis = vec![0; m];
        for &col in &self.basis {
            let Some(r) = (0..m)
                .filter(|&i| !assigned[i])
                .max_by(|&x, &y| rows[x][col].abs().total_cmp(&rows[y][col].abs()))
            else {
                return;
            };
            let piv = rows[r][col];
            if piv.abs() <= PIVOT_TOL {
                return;
            }
            rows[r].iter_mut().for_each(|x| *x /= piv);
            let pivot_row = std::mem::take(&mut rows[r]);
            for (i, row) in rows.iter_mut().enumerate() {
                if i == r {
                    continue;
                }
                let f = row[col];
                if f != 0.0 {
                    for (x, p) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                    row[col] = 0.0;
                }
            }
            rows[r] = pivot_row;
            assigned[r] = true;
            basis[r] = col;
        }
        self.rows = rows;
        self.basis = basis;
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    /// Reduced-cost row for `cost` (zero beyond its length) under the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.width + 1];
        d[..cost.len()].copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (dj, aij) in d.iter_mut().zip(&self.rows[i]) {
                    *dj -= cb * aij;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let piv = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|x| *x /= piv);
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                    if x.abs() < ZERO_TOL {
                        *x = 0.0;
                    }
                }
                row[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (x, p) in obj.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            obj[c] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Dantzig pricing with a two-pass (Harris) ratio test that prefers
    /// large pivots. After a run of degenerate pivots it switches to Bland's
    /// rule until the objective moves again.
    ///
    /// The tableau is refactorized periodically and before any verdict. In phase one (`allow_artificial`) the objective is
    /// bounded, so a column that still looks unbounded is round-off and is
    /// skipped.
    fn optimize(&mut self, cost: &[f64], allow_artificial: bool) -> Step {
        let limit = 50 * (self.rows.len() + self.width) + 1000;
        let mut obj = self.reduced_costs(cost);
        let mut fresh = true;
        let mut skipped = vec![false; self.width];
        let mut degenerate_run = 0;
        let mut since_refresh = 0;
        for _ in 0..limit {
            if since_refresh == REFRESH_EVERY {
                self.refactor();
                obj = self.reduced_costs(cost);
                fresh = true;
                since_refresh = 0;
            }
            let bland = degenerate_run >= BLAND_AFTER;
            let mut candidates = (0..self.width).filter(|&j| {
                (allow_artificial || !self.artificial[j]) && !skipped[j] && obj[j] < -PIVOT_TOL
            });
            let entering = if bland {
                candidates.next()
            } else {
                candidates.min_by(|&x, &y| obj[x].total_cmp(&obj[y]))
            };
            let Some(c) = entering else {
                if fresh {
                    return Step::Optimal;
                }
                since_refresh = REFRESH_EVERY;
                continue;
            };

            let mut theta = f64::INFINITY;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_TOL {
                    theta = theta.min((self.rhs(i).max(0.0) + HARRIS_TOL) / a);
                }
            }
            if theta.is_infinite() {
                if !fresh {
                    since_refresh = REFRESH_EVERY;
                    continue;
                }
                if allow_artificial {
                    skipped[c] = true;
                    continue;
                }
                return Step::Unbounded;
            }
            let mut leave: Option<usize> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a <= PIVOT_TOL || self.rhs(i).max(0.0) / a > theta {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let better = if bland {
                            self.basis[i] < self.basis[l]
                        } else {
                            a > self.rows[l][c]
                        };
                        Some(if better { i } else { l })
                    }
                };
            }
            let r = leave.expect("the row attaining theta qualifies");
            if self.rhs(r).max(0.0) / self.rows[r][c] <= PIVOT_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c, &mut obj);
            fresh = false;
            since_refresh += 1;
        }
        Step::Stalled
    }

    fn run(&mut self, cost: &[f64]) -> Phase {
        let has_artificial = self.basis.iter().any(|&b| self.artificial[b]);
        if has_artificial {
            let phase1: Vec<f64> = (0..self.width).map(|j| if self.artificial[j] { 1.0 } else { 0.0 }).collect();
            if self.optimize(&phase1, true) == Step::Stalled {
                return Phase::Stalled;
            }
            let scale = 1.0 + self.rows.iter().map(|r| r[self.width].abs()).fold(0.0, f64::max);
            let infeasibility: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| self.artificial[b])
                .map(|(i, _)| self.rhs(i))
                .sum();
            if infeasibility > PIVOT_TOL * scale {
                return Phase::Infeasible;
            }
            self.drive_out_artificials();
        }
        let mut real_cost = cost.to_vec();
        real_cost.resize(self.n_real, 0.0);
        match self.optimize(&real_cost, false) {
            Step::Optimal => {}
            Step::Unbounded => return Phase::Unbounded,
            Step::Stalled => return Phase::Stalled,
        }
        let mut cols = vec![0.0; self.n_real];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_real {
                cols[b] = self.rhs(i).max(0.0);
            }
        }
        Phase::Optimal(cols)
    }

    /// Pivots zero-level artificials out of the basis; rows with no real
    /// column left are redundant and dropped.
    fn drive_out_artificials(&mut self) {
        let mut obj = vec![0.0; self.width + 1];
        let mut i = 0;
        while i < self.rows.len() {
            if !self.artificial[self.basis[i]] {
                i += 1;
                continue;
            }
            let col = (0..self.n_real).find(|&j| self.rows[i][j].abs() > PIVOT_TOL);
            match col {
                Some(c) => {
                    self.pivot(i, c, &mut obj);
                    i += 1;
                }
                None => {
                    self.rows.remove(i);
                    self.original.remove(i);
                    self.basis.remove(i);
                }
            }
        }
    }
}
