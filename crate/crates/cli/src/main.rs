//! `staffing`: command-line front end for the staffing solvers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use staffing_core::cost::CostFunction;
use staffing_core::erlang::DelayModel;
use staffing_core::error::StaffingError;
use staffing_core::frontier::{self, FrontierSweep};
use staffing_core::io::{comparison_table, render_table, sig6, RunRecord, ScenarioFile, SolverMode};
use staffing_core::multi_det::{self, MultiStationInstance};
use staffing_core::sim::{self, SimConfig};
use staffing_core::stoch_multi::{self, IntegerSolution, DEFAULT_KEY_CAP};
use staffing_core::stoch_single;

#[derive(Parser)]
#[command(name = "staffing", version, about = "Square-root staffing for many-server queues")]
struct Cli {
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    error_json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cost / delay-probability frontier of one station.
    Frontier(FrontierArgs),
    /// Solve the model stored in a scenario file.
    Solve(SolveArgs),
    /// Joint, reduced and decoupled staffing side by side.
    Compare(CompareArgs),
    /// Estimate delay probabilities by simulation.
    Simulate(SimulateArgs),
    /// Check a scenario file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Bound {
    Exact,
    Upper,
    Lower,
    Hw,
}

impl From<Bound> for DelayModel {
    fn from(b: Bound) -> Self {
        match b {
            Bound::Exact => DelayModel::Exact,
            Bound::Upper => DelayModel::Upper,
            Bound::Lower => DelayModel::Lower,
            Bound::Hw => DelayModel::HalfinWhitt,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Det,
    StochSingle,
    StochMultiJoint,
    StochMultiDecoupled,
    StochMultiReduced,
}

impl From<Mode> for SolverMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Det => SolverMode::Det,
            Mode::StochSingle => SolverMode::StochSingle,
            Mode::StochMultiJoint => SolverMode::StochMultiJoint,
            Mode::StochMultiDecoupled => SolverMode::StochMultiDecoupled,
            Mode::StochMultiReduced => SolverMode::StochMultiReduced,
        }
    }
}

#[derive(Args)]
struct FrontierArgs {
    /// Arrival rate (service rate one).
    #[arg(long)]
    lambda: f64,
    /// Explicit comma-separated epsilon grid.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    eps_start: f64,
    #[arg(long, default_value_t = 0.95)]
    eps_end: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_step: f64,
    /// Price per unit of safety factor; mutually exclusive with --server-price.
    #[arg(long, conflicts_with = "server_price")]
    beta_price: Option<f64>,
    #[arg(long)]
    server_price: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    bound: Bound,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    bound: Option<Bound>,
    /// Single-station stochastic mode: enumerate every key scenario against
    /// the full constraint instead of solving the reduced model.
    #[arg(long)]
    enumerate: bool,
    /// Reduced multi-station mode: fix the key, one level label per station.
    #[arg(long, value_delimiter = ',')]
    key: Vec<String>,
    /// Write the JSON run record here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    file: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    bound: Option<Bound>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file; without it `--lambda` gives a single rate.
    file: Option<PathBuf>,
    /// Server count per station, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    servers: Vec<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(long, default_value_t = 100_000)]
    measured: u64,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also compare arrival-seen and time-average busy fractions.
    #[arg(long)]
    pasta: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    pointer: Option<String>,
}

impl From<StaffingError> for Failure {
    fn from(e: StaffingError) -> Self {
        let (code, kind) = if e.is_validation() {
            (2, "validation")
        } else if e.is_infeasibility() {
            (4, "infeasible")
        } else {
            (3, "solver")
        };
        let pointer = match &e {
            StaffingError::Validation { pointer, .. } => Some(pointer.clone()),
            _ => None,
        };
        Failure { code, kind, message: e.to_string(), pointer }
    }
}

fn validation(message: impl Into<String>) -> Failure {
    Failure { code: 2, kind: "validation", message: message.into(), pointer: None }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure { code: 2, kind: "io", message: format!("{}: {e}", path.display()), pointer: None }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Frontier(a) => cmd_frontier(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if cli.error_json {
                let body = json!({
                    "error": { "kind": f.kind, "message": f.message, "pointer": f.pointer },
                    "exit_code": f.code,
                });
                eprintln!("{body}");
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn read_file(path: &Path) -> Result<(Vec<u8>, ScenarioFile), Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| validation("scenario file is not UTF-8"))?;
    Ok((bytes, ScenarioFile::from_json(&text)?))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure { code: 3, kind: "io", message: e.to_string(), pointer: None })
        }
    }
}

fn value(v: &impl serde::Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("outputs serialise")
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialise");
    s.push('\n');
    s
}

fn epsilon_grid(a: &FrontierArgs) -> Result<Vec<f64>, Failure> {
    if !a.epsilon.is_empty() {
        return Ok(a.epsilon.clone());
    }
    if !(a.eps_step > 0.0) {
        return Err(validation("--eps-step must be positive"));
    }
    let steps = ((a.eps_end - a.eps_start) / a.eps_step + 1e-9).floor();
    if steps < 0.0 {
        return Ok(Vec::new());
    }
    // Rounded so that 0.05 + 2 * 0.05 prints as 0.15.
    Ok((0..=steps as usize)
        .map(|k| ((a.eps_start + k as f64 * a.eps_step) * 1e12).round() / 1e12)
        .collect())
}

fn frontier_csv(sweep: &FrontierSweep) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure { code: 3, kind: "io", message: e.to_string(), pointer: None };
    w.write_record(["epsilon", "beta", "n_continuous", "n_integer", "cost", "wait_prob_exact", "wait_prob_bound"])
        .map_err(fail)?;
    for p in &sweep.points {
        w.write_record([
            p.epsilon.to_string(),
            p.beta.to_string(),
            p.n_continuous.to_string(),
            p.n_integer.to_string(),
            p.cost.to_string(),
            p.wait_prob_exact.to_string(),
            p.wait_prob_bound.to_string(),
        ])
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: 3, kind: "io", message: e.to_string(), pointer: None })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn cmd_frontier(a: FrontierArgs) -> CliResult {
    let grid = epsilon_grid(&a)?;
    let cost = match (a.beta_price, a.server_price) {
        (_, Some(c)) => CostFunction::linear_in_servers(c),
        (Some(c), None) => CostFunction::linear_in_beta(c),
        (None, None) => CostFunction::default(),
    };
    let sweep = frontier::sweep_frontier(a.lambda, &grid, &cost, a.bound.into())?;
    for f in &sweep.failures {
        eprintln!("warning: epsilon {} failed: {}", f.epsilon, f.error);
    }
    let text = match a.format {
        Format::Csv => frontier_csv(&sweep)?,
        Format::Json => pretty(&sweep),
        Format::Table => {
            let headers: Vec<String> = ["epsilon", "beta", "n", "n (int)", "cost", "exact wait", "bound wait"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows: Vec<Vec<String>> = sweep
                .points
                .iter()
                .map(|p| {
                    vec![
                        sig6(p.epsilon),
                        sig6(p.beta),
                        sig6(p.n_continuous),
                        p.n_integer.to_string(),
                        sig6(p.cost),
                        sig6(p.wait_prob_exact),
                        sig6(p.wait_prob_bound),
                    ]
                })
                .collect();
            render_table(&headers, &rows)
        }
    };
    emit(a.out.as_deref(), &text)
}

/// Result of one solve, ready to be recorded.
struct Solved {
    solution: serde_json::Value,
    objective: f64,
    counts: Vec<u64>,
    summary: Vec<(String, String)>,
}

fn key_indices(file: &ScenarioFile, labels: &[String]) -> Result<Vec<usize>, Failure> {
    let set = file.joint_set()?;
    if labels.len() != set.stations() {
        return Err(validation(format!("--key needs {} labels", set.stations())));
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            set.level_labels(i)
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| validation(format!("station {i} has no level labelled `{l}`")))
        })
        .collect()
}

fn counts_text(n: &[u64]) -> String {
    let parts: Vec<String> = n.iter().map(u64::to_string).collect();
    format!("({})", parts.join(", "))
}

fn solve_mode(file: &ScenarioFile, a: &SolveArgs, mode: SolverMode, model: DelayModel) -> Result<Solved, Failure> {
    let epsilon = || a.epsilon.map_or_else(|| file.epsilon(), Ok);
    let delta = a.delta.or(file.problem.delta);
    let costs = file.costs();
    let set = file.joint_set()?;

    match mode {
        SolverMode::Det => {
            if set.scenarios().len() != 1 {
                return Err(validation("deterministic mode needs exactly one scenario"));
            }
            let lambdas = set.scenarios()[0].rates.clone();
            if let Some(delta) = delta {
                let inst = MultiStationInstance::new(lambdas, costs, delta)?;
                let r = multi_det::solve_multi(&inst, model)?;
                let counts: Vec<u64> = r.n_servers.iter().map(|n| n.ceil() as u64).collect();
                Ok(Solved {
                    summary: vec![
                        ("betas".into(), r.betas.iter().map(|b| sig6(*b)).collect::<Vec<_>>().join(", ")),
                        ("joint wait (model)".into(), sig6(r.joint_wait)),
                    ],
                    objective: r.objective,
                    counts,
                    solution: value(&r),
                })
            } else {
                if lambdas.len() != 1 {
                    return Err(validation("multi-station deterministic mode needs delta"));
                }
                let r = frontier::solve_constrained(lambdas[0], epsilon()?, &costs[0], model)?;
                Ok(Solved {
                    summary: vec![("beta".into(), sig6(r.beta)), ("n".into(), sig6(r.n_servers))],
                    objective: r.objective,
                    counts: vec![r.n_servers.ceil() as u64],
                    solution: value(&r),
                })
            }
        }
        SolverMode::StochSingle => {
            let single = file.single_set()?;
            let eps = epsilon()?;
            let r = if a.enumerate {
                stoch_single::solve_exact_enumeration(&single, eps, &costs[0])?
            } else {
                stoch_single::solve_reduced(&single, eps, &costs[0], model)?
            };
            if let Some(w) = &r.warning {
                eprintln!("warning: {w}");
            }
            Ok(Solved {
                summary: vec![
                    ("beta".into(), sig6(r.decision.beta)),
                    ("key".into(), set.level_labels(0)[r.decision.key_index].clone()),
                    ("n".into(), sig6(r.decision.n_continuous)),
                    ("expected wait".into(), sig6(r.expected_wait)),
                ],
                objective: r.objective,
                counts: vec![r.decision.n_integer],
                solution: value(&r),
            })
        }
        SolverMode::StochMultiJoint => {
            if let Some(delta) = delta {
                let r = stoch_multi::solve_weighted_stoch(&set, delta, &costs, model)?;
                let labels: Vec<String> = (0..set.stations()).map(|i| set.level_labels(i)[r.key[i]].clone()).collect();
                Ok(Solved {
                    summary: vec![
                        ("key".into(), labels.join(", ")),
                        ("betas".into(), r.betas.iter().map(|b| sig6(*b)).collect::<Vec<_>>().join(", ")),
                    ],
                    objective: r.objective,
                    counts: r.n_continuous.iter().map(|n| n.round() as u64).collect(),
                    solution: value(&r),
                })
            } else {
                let r = stoch_multi::solve_joint_exact_integer(&set, epsilon()?, &file.prices())?;
                Ok(Solved { summary: vec![], objective: r.cost, counts: r.n.clone(), solution: value(&r) })
            }
        }
        SolverMode::StochMultiDecoupled => {
            let r = stoch_multi::solve_decoupled(&set, epsilon()?, &costs, model)?;
            let sol = IntegerSolution::evaluate(&set, &file.prices(), r.n_integer.clone())?;
            Ok(Solved {
                summary: vec![
                    ("betas".into(), r.betas.iter().map(|b| sig6(*b)).collect::<Vec<_>>().join(", ")),
                    ("per-station epsilon".into(), sig6(r.per_station_epsilon)),
                ],
                objective: sol.cost,
                counts: r.n_integer.clone(),
                solution: value(&r),
            })
        }
        SolverMode::StochMultiReduced => {
            let eps = epsilon()?;
            let prices = file.prices();
            let d = if a.key.is_empty() {
                stoch_multi::enumerate_key_scenarios(&set, eps, &prices, model, DEFAULT_KEY_CAP)?.best
            } else {
                stoch_multi::solve_reduced_joint(&set, eps, &prices, &key_indices(file, &a.key)?, model)?
            };
            let mut summary = vec![
                ("key".into(), d.key_labels.join(", ")),
                ("betas".into(), d.betas.iter().map(|b| sig6(*b)).collect::<Vec<_>>().join(", ")),
            ];
            if d.over_conservative {
                summary.push(("note".into(), "key is over-conservative: constant terms meet the target".into()));
            }
            let cost = d.n_integer.iter().zip(&prices).map(|(&n, c)| c * n as f64).sum();
            Ok(Solved { summary, objective: cost, counts: d.n_integer.clone(), solution: value(&d) })
        }
    }
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    let (bytes, file) = read_file(&a.file)?;
    let mode: SolverMode = match a.mode {
        Some(m) => m.into(),
        None => file.problem.solver.ok_or_else(|| validation("no --mode given and the file names no solver"))?,
    };
    let model: DelayModel = a.bound.map(Into::into).or(file.problem.bound).unwrap_or(DelayModel::Exact);
    let start = Instant::now();
    let solved = solve_mode(&file, &a, mode, model)?;
    let elapsed = start.elapsed().as_secs_f64();
    let set = file.joint_set()?;
    let achieved = if solved.counts.iter().all(|&n| n > 0) {
        Some(stoch_multi::joint_constraint_value(&set, &solved.counts)?)
    } else {
        None
    };
    let record = RunRecord::new(&bytes, mode, model, &solved.solution, solved.objective, solved.counts.clone(), achieved, elapsed);

    if let Some(p) = &a.out {
        fs::write(p, pretty(&record)).map_err(|e| io_failure(p, e))?;
    }
    let text = match a.format {
        Format::Json | Format::Csv => pretty(&record),
        Format::Table => {
            let mut rows = vec![
                vec!["mode".to_string(), mode.label().to_string()],
                vec!["bound".to_string(), model.label().to_string()],
                vec!["n".to_string(), counts_text(&solved.counts)],
                vec!["objective".to_string(), sig6(solved.objective)],
            ];
            rows.extend(solved.summary.into_iter().map(|(k, v)| vec![k, v]));
            if let Some(q) = achieved {
                rows.push(vec!["achieved no-wait (exact)".to_string(), sig6(q)]);
                rows.push(vec!["expected union wait".to_string(), sig6(1.0 - q)]);
            }
            render_table(&["".to_string(), "value".to_string()], &rows)
        }
    };
    emit(None, &text)
}

fn cmd_compare(a: CompareArgs) -> CliResult {
    let (_, file) = read_file(&a.file)?;
    let eps = a.epsilon.map_or_else(|| file.epsilon(), Ok)?;
    let model: DelayModel = a.bound.map(Into::into).or(file.problem.bound).unwrap_or(DelayModel::Exact);
    let report = stoch_multi::compare(&file.joint_set()?, eps, &file.prices(), model)?;
    let text = match a.format {
        Format::Json | Format::Csv => pretty(&report),
        Format::Table => comparison_table(&report),
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let base = SimConfig {
        n: a.servers[0],
        lambda: a.lambda.unwrap_or(0.0),
        warmup_customers: a.warmup,
        measured_customers: a.measured,
        replications: a.replications,
        seed: a.seed,
    };
    let body = match (&a.file, a.lambda) {
        (Some(path), _) => {
            let (_, file) = read_file(path)?;
            let set = file.joint_set()?;
            if a.servers.len() != set.stations() {
                return Err(validation(format!("--servers needs {} entries", set.stations())));
            }
            let est = sim::simulate_joint_qos(&set, &a.servers, &base)?;
            let formula = stoch_multi::joint_constraint_value(&set, &a.servers)?;
            json!({ "servers": a.servers, "estimate": est, "formula_union_wait": 1.0 - formula })
        }
        (None, Some(lambda)) => {
            if a.servers.len() != 1 {
                return Err(validation("a single --lambda needs a single --servers value"));
            }
            let formula = staffing_core::erlang_c_exact(base.n, lambda).map(|p| p.value()).ok();
            if a.pasta {
                let r = sim::pasta_check(&base)?;
                json!({ "n": base.n, "lambda": lambda, "pasta": r, "formula": formula })
            } else {
                let est = sim::simulate_wait_probability(&base)?;
                json!({ "n": base.n, "lambda": lambda, "estimate": est, "formula": formula })
            }
        }
        (None, None) => return Err(validation("give a scenario file or --lambda")),
    };
    emit(a.out.as_deref(), &pretty(&body))
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let (bytes, file) = read_file(&a.file)?;
    let set = file.joint_set()?;
    let text = match a.format {
        Format::Table => format!(
            "ok: {} station(s), {} scenario(s), digest {}\n",
            set.stations(),
            set.scenarios().len(),
            staffing_core::io::digest(&bytes)
        ),
        _ => pretty(&json!({ "valid": true, "stations": set.stations(), "scenarios": set.scenarios().len() })),
    };
    emit(None, &text)
}
