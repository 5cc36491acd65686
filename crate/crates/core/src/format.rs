//! JSON instance files, menu files and solve reports.
//!
//! Instance files look like
//!
//! ```json
//! {
//!   "outcomes": ["lo", "hi"],
//!   "signals": ["w", "m"],
//!   "actions": [{"name": "a", "cost": 0.1}, {"name": "b", "cost": 0.3}],
//!   "q": [0.7, 0.3],
//!   "conditionals": {"a|w": [0.2, 0.8], "a|m": [0.6, 0.4], "b|w": [0.5, 0.5], "b|m": [0.1, 0.9]},
//!   "kappa": 0.05,
//!   "plan": {"acquire": true, "f": {"w": "a", "m": "b"}}
//! }
//! ```
//!
//! Without `signals`, conditionals are keyed by bare action names, `q` may be
//! omitted, and an optional `target` names the action to elicit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Belief, Contract, Menu, OutcomeSpace, Plan, ProblemInstance};
use crate::report::SolveReport;
use crate::verify::Certificate;

/// Significant digits kept when writing numbers.
pub const SIGNIFICANT_DIGITS: usize = 12;

const SIGNAL_SEPARATOR: char = '|';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEntry {
    pub name: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub acquire: bool,
    #[serde(default)]
    pub f: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub outcomes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<Vec<String>>,
    pub actions: Vec<ActionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    pub conditionals: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// A parsed, validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInstance {
    pub problem: ProblemInstance,
    pub plan: Option<Plan>,
    pub target: Option<usize>,
    /// True when the file omitted `signals`.
    pub signal_free: bool,
    /// Outcome labels dropped because no conditional puts mass on them.
    pub removed_outcomes: Vec<String>,
}

fn escape_pointer(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn at(pointer: &str, message: impl std::fmt::Display) -> Error {
    Error::InvalidInstance(format!("{pointer}: {message}"))
}

fn serde_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&escape_pointer(key)),
            Segment::Enum { variant } => out.push_str(&escape_pointer(variant)),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Deserializes with JSON-pointer locations in error messages.
fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = serde_pointer(e.path());
        at(&pointer, e.into_inner())
    })
}

fn belief_at(pointer: &str, weights: &[f64], n: usize) -> Result<Belief> {
    if weights.len() != n {
        return Err(at(pointer, format!("expected {n} probabilities, found {}", weights.len())));
    }
    Belief::new(weights.to_vec()).map_err(|e| at(pointer, e))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    fn conditional_key(&self, action: &str, signal: Option<&str>) -> String {
        match signal {
            Some(s) => format!("{action}{SIGNAL_SEPARATOR}{s}"),
            None => action.to_string(),
        }
    }

    /// Validates the file and builds the instance, dropping outcomes that no
    /// conditional can produce.
    pub fn load(&self) -> Result<LoadedInstance> {
        let n = self.outcomes.len();
        let outcomes = OutcomeSpace::new(self.outcomes.clone()).map_err(|e| at("/outcomes", e))?;
        if self.actions.is_empty() {
            return Err(at("/actions", "at least one action is required"));
        }
        let actions: Vec<String> = self.actions.iter().map(|a| a.name.clone()).collect();
        crate::geometry::check_labels("action", &actions).map_err(|e| at("/actions", e))?;
        for (i, a) in self.actions.iter().enumerate() {
            if !a.cost.is_finite() || a.cost < 0.0 {
                return Err(at(&format!("/actions/{i}/cost"), "cost must be finite and non-negative"));
            }
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(at("/kappa", "acquisition cost must be finite and non-negative"));
        }
        let signal_free = self.signals.is_none();
        let signals = self.signals.clone().unwrap_or_else(|| vec!["*".into()]);
        if signals.is_empty() {
            return Err(at("/signals", "at least one signal is required"));
        }
        crate::geometry::check_labels("signal", &signals).map_err(|e| at("/signals", e))?;
        let q = match &self.q {
            Some(q) => q.clone(),
            None if signals.len() == 1 => vec![1.0],
            None => return Err(at("/q", "required when there is more than one signal")),
        };
        if q.len() != signals.len() {
            return Err(at("/q", format!("expected {} entries, found {}", signals.len(), q.len())));
        }
        Belief::new(q.clone()).map_err(|e| at("/q", e))?;

        let mut expected = Vec::new();
        let mut conditionals = Vec::with_capacity(actions.len());
        for a in &actions {
            let mut row = Vec::with_capacity(signals.len());
            for s in &signals {
                let key = self.conditional_key(a, (!signal_free).then_some(s.as_str()));
                let pointer = format!("/conditionals/{}", escape_pointer(&key));
                let w = self
                    .conditionals
                    .get(&key)
                    .ok_or_else(|| at("/conditionals", format!("missing entry {key:?}")))?;
                row.push(belief_at(&pointer, w, n)?);
                expected.push(key);
            }
            conditionals.push(row);
        }
        if let Some(extra) = self.conditionals.keys().find(|k| !expected.contains(k)) {
            return Err(at(&format!("/conditionals/{}", escape_pointer(extra)), "unknown action or signal"));
        }

        let costs = self.actions.iter().map(|a| a.cost).collect();
        let full = ProblemInstance::new(outcomes, signals, actions, q, conditionals, costs, self.kappa)?;
        let (problem, removed_outcomes) = full.reduce_outcomes()?;

        let plan = match &self.plan {
            None => None,
            Some(p) => {
                let mut assignment = Vec::with_capacity(problem.n_signals());
                for (key, act) in &p.f {
                    let pointer = format!("/plan/f/{}", escape_pointer(key));
                    if problem.signal_index(key).is_none() {
                        return Err(at(&pointer, "unknown signal"));
                    }
                    if problem.action_index(act).is_none() {
                        return Err(at(&pointer, format!("unknown action {act:?}")));
                    }
                }
                for (s, label) in problem.signals().iter().enumerate() {
                    let act = match (p.f.get(label), signal_free) {
                        (Some(a), _) => a,
                        (None, true) => match &self.target {
                            Some(t) => t,
                            None => return Err(at("/plan/f", "missing the action")),
                        },
                        (None, false) => return Err(at("/plan/f", format!("missing signal {label:?}"))),
                    };
                    let ai = problem.action_index(act).expect("checked above");
                    debug_assert_eq!(s, assignment.len());
                    assignment.push(ai);
                }
                Some(Plan { acquire: p.acquire, assignment })
            }
        };
        let target = match &self.target {
            None => None,
            Some(t) => Some(problem.action_index(t).ok_or_else(|| at("/target", format!("unknown action {t:?}")))?),
        };
        Ok(LoadedInstance { problem, plan, target, signal_free, removed_outcomes })
    }

    /// Writes `problem` back out; `signal_free` uses bare action keys.
    pub fn from_problem(problem: &ProblemInstance, plan: Option<&Plan>, target: Option<usize>, signal_free: bool) -> Self {
        let signal_free = signal_free && problem.n_signals() == 1;
        let mut conditionals = BTreeMap::new();
        for (a, name) in problem.actions().iter().enumerate() {
            for (s, sig) in problem.signals().iter().enumerate() {
                let key = if signal_free { name.clone() } else { format!("{name}{SIGNAL_SEPARATOR}{sig}") };
                conditionals.insert(key, problem.conditional(a, s).weights().to_vec());
            }
        }
        let plan = plan.map(|p| PlanEntry {
            acquire: p.acquire,
            f: problem
                .signals()
                .iter()
                .zip(&p.assignment)
                .map(|(s, a)| (s.clone(), problem.actions()[*a].clone()))
                .collect(),
        });
        Self {
            outcomes: problem.outcomes().labels().to_vec(),
            signals: (!signal_free).then(|| problem.signals().to_vec()),
            actions: problem
                .actions()
                .iter()
                .zip(problem.costs())
                .map(|(name, cost)| ActionEntry { name: name.clone(), cost: *cost })
                .collect(),
            q: (!signal_free).then(|| problem.q().to_vec()),
            conditionals,
            kappa: problem.kappa(),
            plan,
            target: target.map(|t| problem.actions()[t].clone()),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<LoadedInstance> {
    InstanceFile::parse(text)?.load()
}

/// Magnitudes below this are written as zero.
pub const ZERO_SNAP: f64 = 1e-12;

/// Rounds to [`SIGNIFICANT_DIGITS`], snapping round-off residue to zero.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    if x.abs() < ZERO_SNAP {
        return 0.0;
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Applies [`round_sig`] to every number in `value`.
pub fn round_numbers(value: Value) -> Value {
    match value {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number),
            _ => Value::Number(n),
        },
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_numbers).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_numbers(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn menu_json(menu: &Menu) -> Value {
    Value::Array(
        menu.contracts()
            .into_iter()
            .map(|c| json!({ "payments": c.payments() }))
            .collect(),
    )
}

pub fn certificate_json(cert: &Certificate) -> Value {
    serde_json::to_value(cert).expect("serializable")
}

/// The document written by `solve`.
pub fn report_json(report: &SolveReport, problem: &ProblemInstance) -> Value {
    let mut m = Map::new();
    m.insert("status".into(), json!("optimal"));
    m.insert("regime".into(), serde_json::to_value(report.regime).expect("serializable"));
    m.insert("outcomes".into(), json!(problem.outcomes().labels()));
    m.insert("menu".into(), menu_json(&report.menu));
    m.insert("objective".into(), json!(report.objective));
    m.insert("binding".into(), json!(report.binding));
    m.insert("certificate".into(), certificate_json(&report.certificate));
    m.insert("flags".into(), serde_json::to_value(&report.flags).expect("serializable"));
    round_numbers(Value::Object(m))
}

/// The document written when no menu exists.
pub fn failure_json(regime: &str, status: &str, reason: &str) -> Value {
    json!({ "status": status, "regime": regime, "reason": reason })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MenuEntry {
    payments: Vec<f64>,
}

/// Reads a menu from either a bare `[{"payments": …}]` array or a solve report.
pub fn parse_menu(text: &str) -> Result<Menu> {
    let value: Value = from_json(text)?;
    let (entries, prefix) = match &value {
        Value::Array(_) => (value.clone(), String::new()),
        Value::Object(m) => (
            m.get("menu").cloned().ok_or_else(|| at("/menu", "missing menu"))?,
            "/menu".to_string(),
        ),
        _ => return Err(at("/", "expected a menu array or a report object")),
    };
    let entries: Vec<MenuEntry> = from_json(&entries.to_string()).map_err(|e| match e {
        Error::InvalidInstance(msg) if msg.starts_with('/') => Error::InvalidInstance(format!("{prefix}{msg}")),
        other => other,
    })?;
    let contracts = entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| Contract::new(e.payments).map_err(|err| at(&format!("{prefix}/{i}/payments"), err)))
        .collect::<Result<Vec<_>>>()?;
    Menu::from_contracts(&contracts)
}
