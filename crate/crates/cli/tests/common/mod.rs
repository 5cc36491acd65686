#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use menuforge::contracts::ContractInstance;
use menuforge::general::{plan_precheck, solve_general_p6};
use menuforge::ia::{value_of_information, IaInstance};
use menuforge::{Belief, OutcomeSpace, Plan, ProblemInstance};
use rand::Rng;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(format!("{name}.json"))
}

pub fn menuforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_menuforge"))
        .args(args)
        .env_remove("MENUFORGE_TOL")
        .output()
        .expect("binary runs")
}

/// Expected exit code of `solve` with default flags, per fixture.
pub const EXIT_TABLE: &[(&str, i32)] = &[
    ("contract_shift", 0),
    ("contract_strict", 0),
    ("contract_three", 2),
    ("contract_two", 0),
    ("general_dominated", 2),
    ("general_tv", 0),
    ("ia_free", 0),
    ("ia_noisy", 0),
    ("ia_skewed", 0),
    ("ia_ternary", 0),
    ("ia_uniform", 0),
    ("ia_uninformative", 2),
    ("ia_zero_mass", 0),
    ("malformed_q", 1),
];

/// Compares `actual` with the golden file, or rewrites it when
/// `UPDATE_GOLDEN` is set. Returns a mismatch description.
pub fn check_golden(name: &str, actual: &[u8]) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{name} differs from golden copy"))
    }
}

/// Strictly positive weights summing to one.
pub fn belief<R: Rng>(rng: &mut R, n: usize) -> Belief {
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-3f64..1.0).ln() + 0.02).collect();
    let total: f64 = raw.iter().sum();
    Belief::new(raw.iter().map(|x| x / total).collect()).unwrap()
}

pub fn simplex_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    belief(rng, k).weights().to_vec()
}

/// Nontrivial acquisition instance with `|Ω| ∈ {2,3,4}`, `|Σ| ∈ {2..5}`, `κ ∈ (0, 2]`.
pub fn ia_instance<R: Rng>(rng: &mut R) -> IaInstance {
    loop {
        let n = rng.gen_range(2..=4);
        let k = rng.gen_range(2..=5);
        let posteriors = (0..k).map(|_| belief(rng, n)).collect();
        let q = simplex_weights(rng, k);
        let kappa = 2.0 - rng.gen_range(0.0..2.0);
        let inst = IaInstance::indexed(q, posteriors, kappa).unwrap();
        if inst.is_nontrivial() && value_of_information(&inst) > 1.0 + 1e-6 {
            return inst;
        }
    }
}

/// Fully revealing signal over `n` outcomes.
pub fn revealing_instance<R: Rng>(rng: &mut R, n: usize) -> IaInstance {
    let prior = simplex_weights(rng, n);
    let posteriors = (0..n).map(|w| Belief::point_mass(n, w)).collect();
    let kappa = 2.0 - rng.gen_range(0.0..2.0);
    IaInstance::indexed(prior, posteriors, kappa).unwrap()
}

/// Hidden-action instance with `|Ω| ∈ {2,3}` and `|A| ∈ {lo..=5}`, arbitrary target.
pub fn contract_instance<R: Rng>(rng: &mut R, min_actions: usize) -> ContractInstance {
    let n = rng.gen_range(2..=3);
    let k = rng.gen_range(min_actions..=5);
    let beliefs = (0..k).map(|_| belief(rng, n)).collect();
    let costs = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
    let target = rng.gen_range(0..k);
    ContractInstance::new(beliefs, costs, target).unwrap()
}

pub fn elicitable_contract_instance<R: Rng>(rng: &mut R) -> ContractInstance {
    // the cheapest action is always elicitable, so the list is never empty
    let inst = contract_instance(rng, 1);
    let ok: Vec<usize> = (0..inst.n_actions())
        .filter(|&a| menuforge::contracts::is_elicitable(&inst.with_target(a).unwrap()))
        .collect();
    let pick = ok[rng.gen_range(0..ok.len())];
    inst.with_target(pick).unwrap()
}

pub fn general_instance<R: Rng>(rng: &mut R) -> ProblemInstance {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=4);
    let conditionals = (0..m).map(|_| (0..k).map(|_| belief(rng, n)).collect()).collect();
    ProblemInstance::new(
        OutcomeSpace::indexed(n).unwrap(),
        (0..k).map(|s| format!("s{s}")).collect(),
        (0..m).map(|a| format!("a{a}")).collect(),
        simplex_weights(rng, k),
        conditionals,
        (0..m).map(|_| rng.gen_range(0.0..1.0)).collect(),
        rng.gen_range(0.0..0.3),
    )
    .unwrap()
}

/// An instance and acquiring plan for which the minimum-payment program is feasible.
pub fn feasible_general<R: Rng>(rng: &mut R) -> (ProblemInstance, Plan) {
    loop {
        let inst = general_instance(rng);
        for _ in 0..8 {
            let plan = Plan::acquire((0..inst.n_signals()).map(|_| rng.gen_range(0..inst.n_actions())).collect());
            if !plan_precheck(&inst, &plan).unwrap().iter().all(|ok| *ok) {
                continue;
            }
            if solve_general_p6(&inst, &plan, 1e-7).is_ok() {
                return (inst, plan);
            }
        }
    }
}
