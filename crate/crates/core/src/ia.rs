//! Pure information acquisition: the agent takes no costly action and only
//! decides whether to pay `κ` for a signal.
//!
//! The optimal menu is a scaled copy of the cone `Ḡ*(p) = max_ω p(ω)/p0(ω)`,
//! scaled so that the acquisition incentive binds.

use crate::error::{Error, Result};
use crate::geometry::{AffinePiece, Belief, Menu, OutcomeSpace, Plan, ProblemInstance};
use crate::report::{Flag, Regime, SolveReport};
use crate::verify::verify_menu;
use crate::{ABS_TOL, DEFAULT_VERIFY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct IaInstance {
    outcomes: OutcomeSpace,
    signals: Vec<String>,
    posteriors: Vec<Belief>,
    q: Vec<f64>,
    kappa: f64,
    prior: Belief,
}

impl IaInstance {
    pub fn new(outcomes: OutcomeSpace, signals: Vec<String>, q: Vec<f64>, posteriors: Vec<Belief>, kappa: f64) -> Result<Self> {
        let problem = ProblemInstance::information(outcomes, signals, q, posteriors, kappa)?;
        Self::from_problem(&problem)
    }

    /// Signals labelled `s0, s1, …` over outcomes labelled `0, 1, …`.
    pub fn indexed(q: Vec<f64>, posteriors: Vec<Belief>, kappa: f64) -> Result<Self> {
        let n = posteriors.first().map_or(0, Belief::len);
        let signals = (0..q.len()).map(|s| format!("s{s}")).collect();
        Self::new(OutcomeSpace::indexed(n)?, signals, q, posteriors, kappa)
    }

    /// Accepts instances with a single zero-cost action.
    pub fn from_problem(inst: &ProblemInstance) -> Result<Self> {
        if inst.n_actions() != 1 || inst.costs()[0] != 0.0 {
            return Err(Error::InvalidInstance(
                "information acquisition needs exactly one action with zero cost".into(),
            ));
        }
        let prior = inst.marginal(0).clone();
        if let Some(w) = prior.weights().iter().position(|x| *x <= 0.0) {
            return Err(Error::ZeroMassOutcome { label: inst.outcomes().labels()[w].clone() });
        }
        Ok(Self {
            outcomes: inst.outcomes().clone(),
            signals: inst.signals().to_vec(),
            posteriors: (0..inst.n_signals()).map(|s| inst.conditional(0, s).clone()).collect(),
            q: inst.q().to_vec(),
            kappa: inst.kappa(),
            prior,
        })
    }

    pub fn to_problem(&self) -> ProblemInstance {
        ProblemInstance::information(
            self.outcomes.clone(),
            self.signals.clone(),
            self.q.clone(),
            self.posteriors.clone(),
            self.kappa,
        )
        .expect("validated on construction")
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }
    pub fn posteriors(&self) -> &[Belief] {
        &self.posteriors
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn prior(&self) -> &Belief {
        &self.prior
    }
    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::from_problem(&self.to_problem().with_kappa(kappa)?)
    }

    /// `κ > 0` and some positive-probability posterior moves away from the prior.
    pub fn is_nontrivial(&self) -> bool {
        check_nontrivial(self)
    }

    /// `Σ_σ q(σ)·G(p_σ)`.
    pub fn expected_value(&self, menu: &Menu) -> Result<f64> {
        let mut total = 0.0;
        for (q, p) in self.q.iter().zip(&self.posteriors) {
            total += q * menu.eval(p)?;
        }
        Ok(total)
    }
}

pub fn check_nontrivial(inst: &IaInstance) -> bool {
    inst.kappa > 0.0
        && inst.q.iter().zip(&inst.posteriors).any(|(q, p)| {
            *q > 0.0
                && p.weights()
                    .iter()
                    .zip(inst.prior.weights())
                    .any(|(a, b)| (a - b).abs() > ABS_TOL)
        })
}

/// `Ḡ*(p) = max_ω p(ω)/p0(ω)`, one piece per outcome in outcome order.
pub fn base_cone(p0: &Belief) -> Result<Menu> {
    if let Some(w) = p0.weights().iter().position(|x| *x <= 0.0) {
        return Err(Error::ZeroMassOutcome { label: w.to_string() });
    }
    let n = p0.len();
    let pieces = (0..n)
        .map(|w| {
            let mut slope = vec![0.0; n];
            slope[w] = 1.0 / p0[w];
            AffinePiece::new(slope, 0.0)
        })
        .collect();
    Menu::new(pieces)?.with_anchor(p0.clone(), 0)
}

/// `E Ḡ*(p_S)`; at least 1, with equality exactly for uninformative signals.
pub fn value_of_information(inst: &IaInstance) -> f64 {
    let p0 = inst.prior.weights();
    inst.q
        .iter()
        .zip(&inst.posteriors)
        .map(|(q, p)| {
            let ratio = p.weights().iter().zip(p0).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max);
            q * ratio
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct IaSolution {
    /// Scale applied to the base cone.
    pub alpha: f64,
    pub value_of_information: f64,
    pub report: SolveReport,
}

/// Optimal menu `α·Ḡ*` with `α = κ/(E Ḡ*(p_S) − 1)`.
///
/// A zero acquisition cost yields the zero menu flagged [`Flag::Trivial`].
pub fn solve_ia(inst: &IaInstance) -> Result<IaSolution> {
    solve_ia_with_tol(inst, DEFAULT_VERIFY_TOL)
}

pub fn solve_ia_with_tol(inst: &IaInstance, tol: f64) -> Result<IaSolution> {
    let problem = inst.to_problem();
    let plan = Plan::constant(&problem, 0);
    let voi = value_of_information(inst);
    if inst.kappa == 0.0 {
        let menu = Menu::from_contracts(&[crate::Contract::zero(inst.n_outcomes())])?;
        let cert = verify_menu(&menu, &problem, &plan, tol)?;
        let report = SolveReport::new(Regime::Ia, menu, 0.0, cert).with_flag(Flag::Trivial);
        return Ok(IaSolution { alpha: 0.0, value_of_information: voi, report });
    }
    let informative = check_nontrivial(inst);
    if !informative || voi - 1.0 <= ABS_TOL {
        return Err(Error::Uninformative { value_of_information: voi, marginal: informative });
    }
    let alpha = inst.kappa / (voi - 1.0);
    let cone = base_cone(&inst.prior)?;
    let mut menu = cone.scaled(alpha);
    for p in &inst.posteriors {
        let k = menu.best_response(p)?[0];
        menu = menu.with_anchor(p.clone(), k)?;
    }
    let objective = alpha * voi;
    let cert = verify_menu(&menu, &problem, &plan, tol)?;
    let mut report = SolveReport::new(Regime::Ia, menu, objective, cert);
    if voi - 1.0 <= 10.0 * tol {
        report = report.with_flag(Flag::ToleranceMarginal);
    }
    Ok(IaSolution { alpha, value_of_information: voi, report })
}

/// `φ(G) = G / (E G(p_S) − κ)`.
pub fn phi(menu: &Menu, inst: &IaInstance) -> Result<Menu> {
    let d = inst.expected_value(menu)? - inst.kappa;
    if d.is_nan() || d <= 0.0 {
        return Err(Error::Precondition(format!("E G(p_S) - kappa must be positive, got {d}")));
    }
    Ok(menu.scaled(1.0 / d))
}

/// `φ′(Ḡ) = κ·Ḡ / (E Ḡ(p_S) − 1)`.
pub fn phi_inverse(menu: &Menu, inst: &IaInstance) -> Result<Menu> {
    let d = inst.expected_value(menu)? - 1.0;
    if d.is_nan() || d <= 0.0 {
        return Err(Error::Precondition(format!("E G(p_S) - 1 must be positive, got {d}")));
    }
    Ok(menu.scaled(inst.kappa / d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{ia_lp_oracle, ia_lp_oracle_dense};
    use proptest::prelude::*;

    fn b(w: &[f64]) -> Belief {
        Belief::new(w.to_vec()).unwrap()
    }

    fn revealing(p0: &[f64], kappa: f64) -> IaInstance {
        let n = p0.len();
        IaInstance::indexed(p0.to_vec(), (0..n).map(|w| Belief::point_mass(n, w)).collect(), kappa).unwrap()
    }

    fn symmetric(kappa: f64) -> IaInstance {
        IaInstance::indexed(vec![0.5, 0.5], vec![b(&[0.2, 0.8]), b(&[0.8, 0.2])], kappa).unwrap()
    }

    #[test]
    fn nontriviality() {
        assert!(revealing(&[0.5, 0.5], 0.5).is_nontrivial());
        assert!(!revealing(&[0.5, 0.5], 0.0).is_nontrivial());
        let flat = IaInstance::indexed(vec![0.5, 0.5], vec![b(&[0.3, 0.7]), b(&[0.3, 0.7])], 1.0).unwrap();
        assert!(!flat.is_nontrivial());
    }

    #[test]
    fn base_cone_examples() {
        let g = base_cone(&b(&[0.5, 0.5])).unwrap();
        assert_eq!(g.pieces()[0].slope, vec![2.0, 0.0]);
        assert_eq!(g.pieces()[1].slope, vec![0.0, 2.0]);
        let p0 = b(&[0.25, 0.75]);
        let g = base_cone(&p0).unwrap();
        assert!((g.pieces()[0].at_corner(0) - 4.0).abs() < 1e-12);
        assert!((g.pieces()[1].at_corner(1) - 4.0 / 3.0).abs() < 1e-12);
        assert!((g.eval(&p0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(base_cone(&b(&[1.0, 0.0])), Err(Error::ZeroMassOutcome { .. })));
    }

    #[test]
    fn value_of_information_examples() {
        assert!((value_of_information(&revealing(&[0.3, 0.7], 1.0)) - 2.0).abs() < 1e-12);
        assert!((value_of_information(&revealing(&[0.2, 0.3, 0.5], 1.0)) - 3.0).abs() < 1e-12);
        assert!((value_of_information(&symmetric(0.1)) - 1.6).abs() < 1e-12);
        let flat = IaInstance::indexed(vec![0.4, 0.6], vec![b(&[0.3, 0.7]), b(&[0.3, 0.7])], 1.0).unwrap();
        assert!((value_of_information(&flat) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_examples() {
        let s = solve_ia(&revealing(&[0.5, 0.5], 0.5)).unwrap();
        assert!((s.alpha - 0.5).abs() < 1e-12);
        assert!((s.report.objective - 1.0).abs() < 1e-12);
        let cs = s.report.menu.contracts();
        assert_eq!(cs[0].payments(), &[1.0, 0.0]);
        assert_eq!(cs[1].payments(), &[0.0, 1.0]);
        assert!(s.report.certified());

        let s = solve_ia(&revealing(&[0.25, 0.75], 1.0)).unwrap();
        let cs = s.report.menu.contracts();
        assert!((cs[0].payments()[0] - 4.0).abs() < 1e-12);
        assert!((cs[1].payments()[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.report.objective - 2.0).abs() < 1e-12);

        let s = solve_ia(&symmetric(0.1)).unwrap();
        assert!((s.alpha - 1.0 / 6.0).abs() < 1e-12);
        assert!((s.report.objective - 4.0 / 15.0).abs() < 1e-12);
        assert!(s.report.certified());
    }

    #[test]
    fn oracle_matches_closed_form() {
        for inst in [revealing(&[0.5, 0.5], 0.5), revealing(&[0.25, 0.75], 1.0), symmetric(0.1)] {
            let closed = solve_ia(&inst).unwrap().report.objective;
            assert!((ia_lp_oracle(&inst).unwrap() - closed).abs() < 1e-7);
            assert!((ia_lp_oracle_dense(&inst).unwrap() - closed).abs() < 1e-7);
        }
    }

    #[test]
    fn trivial_and_uninformative() {
        let s = solve_ia(&revealing(&[0.5, 0.5], 0.0)).unwrap();
        assert_eq!(s.report.flags, vec![Flag::Trivial]);
        assert_eq!(s.report.objective, 0.0);
        let flat = IaInstance::indexed(vec![0.5, 0.5], vec![b(&[0.3, 0.7]), b(&[0.3, 0.7])], 1.0).unwrap();
        assert!(matches!(solve_ia(&flat), Err(Error::Uninformative { marginal: false, .. })));
        assert!(ia_lp_oracle(&flat).is_err());
    }

    #[test]
    fn inflated_kappa_breaks_incentive() {
        let inst = revealing(&[0.5, 0.5], 0.5);
        let menu = solve_ia(&inst).unwrap().report.menu;
        let harder = inst.with_kappa(0.55).unwrap();
        let problem = harder.to_problem();
        let cert = verify_menu(&menu, &problem, &Plan::constant(&problem, 0), 1e-7).unwrap();
        assert_eq!(cert.failed_families(), vec![crate::verify::ConstraintFamily::Incentive]);
    }

    #[test]
    fn transforms() {
        let inst = revealing(&[0.5, 0.5], 0.5);
        let g = solve_ia(&inst).unwrap().report.menu;
        let cone = phi(&g, &inst).unwrap();
        assert_eq!(cone.pieces(), base_cone(inst.prior()).unwrap().pieces());

        let inst = revealing(&[0.5, 0.5], 1.0);
        let cone = base_cone(inst.prior()).unwrap();
        assert_eq!(phi_inverse(&cone, &inst).unwrap().pieces(), cone.pieces());

        let zero = Menu::from_contracts(&[crate::Contract::zero(2)]).unwrap();
        assert!(matches!(phi(&zero, &inst), Err(Error::Precondition(_))));
        assert!(matches!(phi_inverse(&zero, &inst), Err(Error::Precondition(_))));
    }

    #[test]
    fn low_detail() {
        // same prior and value of information, different posteriors
        let a = IaInstance::indexed(vec![0.5, 0.5], vec![b(&[0.2, 0.8]), b(&[0.8, 0.2])], 0.3).unwrap();
        let c = IaInstance::indexed(
            vec![0.25, 0.25, 0.5],
            vec![b(&[0.2, 0.8]), b(&[0.8, 0.2]), b(&[0.5, 0.5])],
            0.3,
        )
        .unwrap();
        let va = value_of_information(&a);
        let vc = value_of_information(&c);
        assert!((va - 1.6).abs() < 1e-12 && (vc - 1.3).abs() < 1e-12);
        let c2 = IaInstance::indexed(vec![0.5, 0.5], vec![b(&[0.35, 0.65]), b(&[0.65, 0.35])], 0.3).unwrap();
        assert!((value_of_information(&c2) - vc).abs() < 1e-12);
        let m1 = solve_ia(&c).unwrap().report.menu;
        let m2 = solve_ia(&c2).unwrap().report.menu;
        for (x, y) in m1.pieces().iter().zip(m2.pieces()) {
            for (s, t) in x.slope.iter().zip(&y.slope) {
                assert!((s - t).abs() < 1e-12);
            }
        }
    }

    fn arb_instance() -> impl Strategy<Value = IaInstance> {
        (2usize..=4, 2usize..=5).prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), k),
                prop::collection::vec(0.05f64..1.0, k),
                0.01f64..2.0,
            )
                .prop_map(|(raw, qraw, kappa)| {
                    let posteriors = raw
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            Belief::new(r.iter().map(|x| x / s).collect()).unwrap()
                        })
                        .collect();
                    let qs: f64 = qraw.iter().sum();
                    IaInstance::indexed(qraw.iter().map(|x| x / qs).collect(), posteriors, kappa).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_form_structure(inst in arb_instance()) {
            prop_assume!(inst.is_nontrivial() && value_of_information(&inst) > 1.0 + 1e-6);
            let s = solve_ia(&inst).unwrap();
            let menu = &s.report.menu;
            let at_prior: Vec<f64> = menu.pieces().iter().map(|h| h.eval(inst.prior()).unwrap()).collect();
            for v in &at_prior {
                prop_assert!((v - s.alpha).abs() < 1e-9);
            }
            let incentive = inst.expected_value(menu).unwrap() - inst.kappa() - menu.eval(inst.prior()).unwrap();
            prop_assert!(incentive.abs() < 1e-9);
            for c in menu.contracts() {
                prop_assert_eq!(c.payments().iter().filter(|x| **x != 0.0).count(), 1);
                prop_assert!(c.min_payment() >= 0.0);
            }
            prop_assert!(s.report.certified());
            let oracle = ia_lp_oracle(&inst).unwrap();
            prop_assert!((oracle - s.report.objective).abs() < 1e-6 * (1.0 + oracle.abs()));
        }

        #[test]
        fn phi_round_trip(inst in arb_instance(), scale in 0.1f64..5.0, extra in 0.0f64..2.0) {
            prop_assume!(inst.is_nontrivial() && value_of_information(&inst) > 1.0 + 1e-6);
            let g = solve_ia(&inst).unwrap().report.menu.scaled(scale);
            let mut g = g;
            g.push(AffinePiece::new(vec![extra; inst.n_outcomes()], 0.0)).unwrap();
            prop_assume!(inst.expected_value(&g).unwrap() - inst.kappa() > 1e-6);
            let back = phi_inverse(&phi(&g, &inst).unwrap(), &inst).unwrap();
            for (x, y) in g.pieces().iter().zip(back.pieces()) {
                prop_assert!((x.intercept - y.intercept).abs() < 1e-9);
                for (s, t) in x.slope.iter().zip(&y.slope) {
                    prop_assert!((s - t).abs() < 1e-9 * (1.0 + s.abs()));
                }
            }
        }
    }
}
