//! Browser bindings for the demo page. Every entry point returns a JSON
//! string: `{"status": "optimal", "report": …, "svg": …}` on success, or
//! `{"status": …, "reason": …}` when no menu exists or the input is bad.

use menuforge::contracts::{solve_contract, ContractInstance};
use menuforge::format::{failure_json, report_json};
use menuforge::general::solve_general_p6;
use menuforge::ia::{solve_ia, IaInstance};
use menuforge::plot::render_svg;
use menuforge::{Belief, Error, OutcomeSpace, Plan, ProblemInstance, SolveReport, DEFAULT_VERIFY_TOL};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn binary(hit: f64) -> Result<Belief, Error> {
    Belief::new(vec![1.0 - hit, hit])
}

fn outcomes() -> OutcomeSpace {
    OutcomeSpace::new(vec!["flop".into(), "hit".into()]).expect("two labels")
}

fn success(report: &SolveReport, problem: &ProblemInstance) -> Value {
    let svg = render_svg(problem, &report.menu).unwrap_or_default();
    json!({ "status": "optimal", "report": report_json(report, problem), "svg": svg })
}

fn failure(regime: &str, e: Error) -> Value {
    let status = match e {
        Error::NotElicitable { .. } | Error::NotStrictlyElicitable { .. } => "not-elicitable",
        Error::PlanNotElicitable => "infeasible",
        Error::Uninformative { .. } => "uninformative",
        _ => "invalid",
    };
    failure_json(regime, status, &e.to_string())
}

/// Cheapest menu that makes the agent buy a binary signal. `left` and
/// `right` are the posterior probabilities of a hit after each signal.
pub fn ia_value(left: f64, right: f64, q_left: f64, kappa: f64) -> Value {
    let run = || -> Result<Value, Error> {
        let inst = IaInstance::new(
            outcomes(),
            vec!["left".into(), "right".into()],
            vec![q_left, 1.0 - q_left],
            vec![binary(left)?, binary(right)?],
            kappa,
        )?;
        let sol = solve_ia(&inst)?;
        Ok(success(&sol.report, &inst.to_problem()))
    };
    run().unwrap_or_else(|e| failure("ia", e))
}

/// Cheapest single contract that elicits `target`. `hits[a]` is the hit
/// probability under action `a`.
pub fn contract_value(hits: &[f64], costs: &[f64], target: usize) -> Value {
    let run = || -> Result<Value, Error> {
        let beliefs = hits.iter().map(|h| binary(*h)).collect::<Result<Vec<_>, _>>()?;
        let labels = (0..hits.len()).map(|a| format!("a{a}")).collect();
        let inst = ContractInstance::with_labels(outcomes(), labels, beliefs, costs.to_vec(), target)?;
        let report = solve_contract(&inst, DEFAULT_VERIFY_TOL)?;
        Ok(success(&report, &inst.to_problem()))
    };
    run().unwrap_or_else(|e| failure("contract", e))
}

/// The two-signal, two-action instance with the plan "a after w, b after m",
/// re-solved for the given action costs and signal price.
pub fn general_value(cost_a: f64, cost_b: f64, kappa: f64) -> Value {
    let run = || -> Result<Value, Error> {
        let conditionals = vec![
            vec![binary(0.8)?, binary(0.4)?],
            vec![binary(0.5)?, binary(0.3)?],
        ];
        let problem = ProblemInstance::new(
            outcomes(),
            vec!["w".into(), "m".into()],
            vec!["a".into(), "b".into()],
            vec![0.7, 0.3],
            conditionals,
            vec![cost_a, cost_b],
            kappa,
        )?;
        let sol = solve_general_p6(&problem, &Plan::acquire(vec![0, 1]), DEFAULT_VERIFY_TOL)?;
        Ok(success(&sol.report, &problem))
    };
    run().unwrap_or_else(|e| failure("general", e))
}

#[wasm_bindgen]
pub fn ia_demo(left: f64, right: f64, q_left: f64, kappa: f64) -> String {
    ia_value(left, right, q_left, kappa).to_string()
}

#[wasm_bindgen]
pub fn contract_demo(hits: Vec<f64>, costs: Vec<f64>, target: usize) -> String {
    contract_value(&hits, &costs, target).to_string()
}

#[wasm_bindgen]
pub fn general_demo(cost_a: f64, cost_b: f64, kappa: f64) -> String {
    general_value(cost_a, cost_b, kappa).to_string()
}
