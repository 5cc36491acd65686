use menuforge::contracts::{elicitability, ContractInstance};
use menuforge::ia::{solve_ia, value_of_information, IaInstance};
use menuforge::verify::{
    agent_best_response, cost_curve_property_probe, ia_lp_oracle, ia_lp_oracle_dense, strategy_utility, verify_menu,
    Choice, DeviationStrategy,
};
use menuforge::{AffinePiece, Belief, Menu, OutcomeSpace, Plan, ProblemInstance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn belief(rng: &mut impl Rng, n: usize) -> Belief {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Belief::new(raw.iter().map(|x| x / total).collect()).unwrap()
}

fn ia_instance(rng: &mut impl Rng) -> IaInstance {
    loop {
        let n = rng.gen_range(2..=4);
        let k = rng.gen_range(2..=5);
        let posteriors = (0..k).map(|_| belief(rng, n)).collect();
        let q = belief(rng, k).weights().to_vec();
        let inst = IaInstance::indexed(q, posteriors, rng.gen_range(0.05..2.0)).unwrap();
        if inst.is_nontrivial() && value_of_information(&inst) > 1.0 + 1e-6 {
            return inst;
        }
    }
}

fn problem(rng: &mut impl Rng) -> ProblemInstance {
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    ProblemInstance::new(
        OutcomeSpace::indexed(n).unwrap(),
        (0..k).map(|s| format!("s{s}")).collect(),
        (0..m).map(|a| format!("a{a}")).collect(),
        belief(rng, k).weights().to_vec(),
        (0..m).map(|_| (0..k).map(|_| belief(rng, n)).collect()).collect(),
        (0..m).map(|_| rng.gen_range(0.0..1.0)).collect(),
        rng.gen_range(0.0..0.5),
    )
    .unwrap()
}

fn random_menu(rng: &mut impl Rng, n: usize) -> Menu {
    let pieces = (0..rng.gen_range(1..=4))
        .map(|_| AffinePiece::new((0..n).map(|_| rng.gen_range(0.0..2.0)).collect(), 0.0))
        .collect();
    Menu::new(pieces).unwrap()
}

fn random_strategy(rng: &mut impl Rng, inst: &ProblemInstance, n_contracts: usize) -> DeviationStrategy {
    let acquire = rng.gen_bool(0.5);
    let mut choice = || Choice { action: rng.gen_range(0..inst.n_actions()), contract: rng.gen_range(0..n_contracts) };
    if acquire {
        DeviationStrategy::Acquire { choices: (0..inst.n_signals()).map(|_| choice()).collect() }
    } else {
        DeviationStrategy::NoAcquire(choice())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn best_response_dominates_random_strategies(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = problem(&mut rng);
        let menu = random_menu(&mut rng, inst.n_outcomes());
        let (best, u) = agent_best_response(&menu, &inst).unwrap();
        prop_assert!((strategy_utility(&menu, &inst, &best).unwrap() - u).abs() <= 1e-9);
        for _ in 0..1000 {
            let s = random_strategy(&mut rng, &inst, menu.len());
            prop_assert!(strategy_utility(&menu, &inst, &s).unwrap() <= u + 1e-9);
        }
    }

    #[test]
    fn oracle_is_a_lower_bound_on_feasible_menus(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = ia_instance(&mut rng);
        let oracle = ia_lp_oracle(&inst).unwrap();
        let problem = inst.to_problem();
        let plan = Plan::constant(&problem, 0);
        for _ in 0..20 {
            let g = random_menu(&mut rng, inst.n_outcomes());
            let gap = inst.expected_value(&g).unwrap() - g.eval(inst.prior()).unwrap();
            if gap <= 1e-6 {
                continue;
            }
            let g = g.scaled(inst.kappa() / gap);
            let cert = verify_menu(&g, &problem, &plan, 1e-7).unwrap();
            prop_assert!(cert.passed(), "{:?}", cert.failed_families());
            prop_assert!(inst.expected_value(&g).unwrap() >= oracle - 1e-6);
        }
    }

    #[test]
    fn oracles_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = ia_instance(&mut rng);
        let sparse = ia_lp_oracle(&inst).unwrap();
        let dense = ia_lp_oracle_dense(&inst).unwrap();
        prop_assert!((sparse - dense).abs() <= 1e-6, "{} vs {}", sparse, dense);
        let closed = solve_ia(&inst).unwrap().report.objective;
        prop_assert!((closed - dense).abs() <= 1e-6);
    }

    #[test]
    fn elicitability_is_monotone_in_tolerance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=3);
        let k = rng.gen_range(2..=5);
        let inst = ContractInstance::new(
            (0..k).map(|_| belief(&mut rng, n)).collect(),
            (0..k).map(|_| rng.gen_range(0.0..1.0)).collect(),
            rng.gen_range(0..k),
        )
        .unwrap();
        let mut was = false;
        for tol in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
            let now = elicitability(&inst, tol).unwrap().elicitable;
            prop_assert!(!was || now, "lost elicitability when loosening to {}", tol);
            was = now;
        }
        prop_assert_eq!(cost_curve_property_probe(&inst, 200, seed, 1e-9).unwrap(), 0);
    }
}
