//! Command surface for the `menuforge` binary.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible / not elicitable /
//! uninformative, 3 certificate failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use menuforge::contracts::{
    default_candidates, enumerate_optimal_menu, optimal_contract_with_tol, solve_contract, solve_contract_strict,
    ContractInstance,
};
use menuforge::format::{self, LoadedInstance};
use menuforge::general::{solve_general, Formulation};
use menuforge::ia::{solve_ia_with_tol, IaInstance};
use menuforge::report::{Regime, SolveReport};
use menuforge::verify::verify_menu;
use menuforge::{Error, Menu, Plan, ProblemInstance, DEFAULT_VERIFY_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CERTIFICATE: i32 = 3;

/// Environment variable overriding the default tolerance.
pub const TOL_ENV: &str = "MENUFORGE_TOL";

#[derive(Parser, Debug)]
#[command(name = "menuforge", version, about = "Minimum-payment contract menus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance file and write the report as JSON.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
        regime: RegimeArg,
        #[arg(long)]
        tol: Option<f64>,
        /// Strictly elicit the target, at most this much above the optimum.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = FormulationArg::P6)]
        formulation: FormulationArg,
        /// Also write an SVG plot (binary outcomes only).
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Target action for the hidden-action regime.
        #[arg(long)]
        target: Option<String>,
        /// Add the default extra contracts to a hidden-action menu.
        #[arg(long)]
        extras: bool,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify a menu against an instance and its plan.
    Verify {
        instance: PathBuf,
        menu: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a menu over a binary outcome space as SVG.
    Plot { instance: PathBuf, menu: PathBuf, out: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Auto,
    Ia,
    Contract,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    P5,
    P6,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
    /// Written to the report destination when present.
    report: Option<serde_json::Value>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into(), report: None }
    }
}

fn input_err(e: impl std::fmt::Display) -> Failure {
    Failure::input(e.to_string())
}

struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn emit(&mut self, out: Option<&Path>, text: &str) -> Result<(), Failure> {
        match out {
            Some(path) => std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
            None => self.stdout.write_all(text.as_bytes()).map_err(input_err),
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, env_tol: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let mut io = Io { stdout, stderr };
    let out_path = match &cli.command {
        Command::Solve { out, .. } | Command::Verify { out, .. } => out.clone(),
        Command::Plot { .. } => None,
    };
    match dispatch(cli.command, env_tol, &mut io) {
        Ok(code) => code,
        Err(f) => {
            if let Some(report) = &f.report {
                let _ = io.emit(out_path.as_deref(), &format::to_pretty(report));
            }
            let _ = writeln!(io.stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn resolve_tol(flag: Option<f64>, env_tol: Option<&str>) -> Result<f64, Failure> {
    let tol = match (flag, env_tol) {
        (Some(t), _) => t,
        (None, Some(s)) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| Failure::input(format!("{TOL_ENV} is not a number: {s:?}")))?,
        (None, None) => DEFAULT_VERIFY_TOL,
    };
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Failure::input(format!("tolerance must be finite and non-negative, got {tol}")));
    }
    Ok(tol)
}

fn load(path: &Path, io: &mut Io) -> Result<LoadedInstance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let loaded = format::parse_instance(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if !loaded.removed_outcomes.is_empty() {
        let _ = writeln!(
            io.stderr,
            "warning: removed outcomes with zero probability: {}",
            loaded.removed_outcomes.join(", ")
        );
    }
    Ok(loaded)
}

fn load_menu(path: &Path) -> Result<Menu, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    format::parse_menu(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// `|A| = 1` with zero cost → acquisition only; no signals, or one free signal → hidden action.
fn auto_regime(loaded: &LoadedInstance) -> Regime {
    let p = &loaded.problem;
    if p.n_actions() == 1 && p.costs().iter().all(|c| *c == 0.0) {
        Regime::Ia
    } else if loaded.signal_free || (p.n_signals() == 1 && p.kappa() == 0.0) {
        Regime::Contract
    } else {
        Regime::General
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Ia => "ia",
        Regime::Contract => "contract",
        Regime::General => "general",
    }
}

/// Maps solver errors to exit codes; "no menu exists" answers also produce a report.
fn solve_failure(regime: Regime, e: Error) -> Failure {
    let status = match &e {
        Error::NotElicitable { .. } | Error::NotStrictlyElicitable { .. } => "not-elicitable",
        Error::PlanNotElicitable => "infeasible",
        Error::Uninformative { .. } => "uninformative",
        _ => return Failure::input(e.to_string()),
    };
    let reason = e.to_string();
    Failure {
        code: EXIT_INFEASIBLE,
        report: Some(format::failure_json(regime_name(regime), status, &reason)),
        message: reason,
    }
}

fn contract_target(loaded: &LoadedInstance, flag: Option<&str>) -> Result<usize, Failure> {
    let p = &loaded.problem;
    if let Some(name) = flag {
        return p.action_index(name).ok_or_else(|| Failure::input(format!("unknown target action {name:?}")));
    }
    if let Some(t) = loaded.target {
        return Ok(t);
    }
    match &loaded.plan {
        Some(plan) if plan.assignment.iter().all(|a| *a == plan.assignment[0]) => Ok(plan.assignment[0]),
        _ if p.n_actions() == 1 => Ok(0),
        _ => Err(Failure::input("the hidden-action regime needs a target (use --target or a `target` field)")),
    }
}

/// Plan used to certify a menu when the file does not spell one out.
fn implied_plan(loaded: &LoadedInstance, regime: Regime, target: Option<usize>) -> Result<Plan, Failure> {
    if let Some(plan) = &loaded.plan {
        return Ok(plan.clone());
    }
    match (regime, target) {
        (Regime::Ia, _) => Ok(Plan::constant(&loaded.problem, 0)),
        (_, Some(t)) => Ok(Plan::constant(&loaded.problem, t)),
        _ => Err(Failure::input("instance has no plan to check against")),
    }
}

fn dispatch(command: Command, env_tol: Option<&str>, io: &mut Io) -> Result<i32, Failure> {
    match command {
        Command::Solve { instance, regime, tol, epsilon, formulation, plot, target, extras, out } => {
            let tol = resolve_tol(tol, env_tol)?;
            let loaded = load(&instance, io)?;
            if plot.is_some() && loaded.problem.n_outcomes() != 2 {
                return Err(Failure::input("plotting requires binary outcome"));
            }
            if let Some(e) = epsilon {
                if e.is_nan() || e <= 0.0 {
                    return Err(Failure::input(format!("--epsilon must be positive, got {e}")));
                }
            }
            let regime = match regime {
                RegimeArg::Auto => auto_regime(&loaded),
                RegimeArg::Ia => Regime::Ia,
                RegimeArg::Contract => Regime::Contract,
                RegimeArg::General => Regime::General,
            };
            let formulation = match formulation {
                FormulationArg::P5 => Formulation::P5,
                FormulationArg::P6 => Formulation::P6,
            };
            let (report, problem) =
                solve(&loaded, regime, tol, epsilon, formulation, target.as_deref(), extras)?;
            let json = format::report_json(&report, &problem);
            io.emit(out.as_deref(), &format::to_pretty(&json))?;
            if let Some(path) = plot {
                let svg = menuforge::plot::render_svg(&problem, &report.menu).map_err(input_err)?;
                std::fs::write(&path, svg).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            }
            if report.certified() {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(io.stderr, "error: the solved menu failed certification");
                Ok(EXIT_CERTIFICATE)
            }
        }
        Command::Verify { instance, menu, tol, out } => {
            let tol = resolve_tol(tol, env_tol)?;
            let loaded = load(&instance, io)?;
            let menu = load_menu(&menu)?;
            let regime = auto_regime(&loaded);
            let target = match regime {
                Regime::Contract => contract_target(&loaded, None).ok(),
                _ => loaded.target,
            };
            let plan = implied_plan(&loaded, regime, target)?;
            let cert = verify_menu(&menu, &loaded.problem, &plan, tol).map_err(input_err)?;
            let json = format::round_numbers(format::certificate_json(&cert));
            io.emit(out.as_deref(), &format::to_pretty(&json))?;
            if cert.passed() {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(io.stderr, "certificate failed: {:?}", cert.failed_families());
                Ok(EXIT_CERTIFICATE)
            }
        }
        Command::Plot { instance, menu, out } => {
            let loaded = load(&instance, io)?;
            let menu = load_menu(&menu)?;
            if menu.dim() != loaded.problem.n_outcomes() {
                return Err(Failure::input(format!(
                    "menu has {} outcomes, instance has {}",
                    menu.dim(),
                    loaded.problem.n_outcomes()
                )));
            }
            let svg = menuforge::plot::render_svg(&loaded.problem, &menu).map_err(input_err)?;
            std::fs::write(&out, svg).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
            Ok(EXIT_OK)
        }
    }
}

fn solve(
    loaded: &LoadedInstance,
    regime: Regime,
    tol: f64,
    epsilon: Option<f64>,
    formulation: Formulation,
    target: Option<&str>,
    extras: bool,
) -> Result<(SolveReport, ProblemInstance), Failure> {
    let problem = loaded.problem.clone();
    let report = match regime {
        Regime::Ia => {
            let inst = IaInstance::from_problem(&problem).map_err(input_err)?;
            solve_ia_with_tol(&inst, tol).map_err(|e| solve_failure(regime, e))?.report
        }
        Regime::Contract => {
            let t = contract_target(loaded, target)?;
            let inst = ContractInstance::from_problem(&problem, t).map_err(input_err)?;
            let fail = |e| solve_failure(regime, e);
            let report = match epsilon {
                Some(eps) => solve_contract_strict(&inst, eps, tol).map_err(fail)?,
                None => solve_contract(&inst, tol).map_err(fail)?,
            };
            if extras && epsilon.is_none() {
                let opt = optimal_contract_with_tol(&inst, tol).map_err(fail)?;
                let cands = default_candidates(&inst, opt.shift).map_err(fail)?;
                let menu = enumerate_optimal_menu(&inst, &cands).map_err(fail)?;
                let contract_problem = inst.to_problem();
                let cert = verify_menu(&menu, &contract_problem, &Plan::constant(&contract_problem, t), tol)
                    .map_err(input_err)?;
                let mut with_extras = SolveReport::new(Regime::Contract, menu, report.objective, cert);
                with_extras.flags = report.flags;
                return Ok((with_extras, contract_problem));
            }
            return Ok((report, inst.to_problem()));
        }
        Regime::General => {
            let plan = loaded
                .plan
                .clone()
                .ok_or_else(|| Failure::input("the general regime needs a `plan` in the instance file"))?;
            solve_general(&problem, &plan, formulation, tol).map_err(|e| solve_failure(regime, e))?.report
        }
    };
    Ok((report, problem))
}
