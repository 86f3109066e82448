//! Subcommands and exit-code policy.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use ergodic_core::impulse::{cell_problem, objective, solve, ImpulseOutcome};
use ergodic_core::model::verify_conditions;
use ergodic_core::sensitivity::sensitivities;
use ergodic_core::simulate::{simulate_impulse, simulate_nothing, simulate_reflection, write_cycles_csv};
use ergodic_core::singular::{k_sweep, local_time_rate, singular_qvi_check, solve_singular};
use ergodic_core::{Error as CoreError, Table};
use serde_json::{json, Value};

use crate::config::{ConfigError, ModelConfig};
use crate::output::{merge, numbers, to_finite_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONDITION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ergodic", version, about = "Long-run average impulse and singular control of 1-D diffusions")]
pub struct Cli {
    /// JSON model configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configured simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Omit the timestamp and wall-clock timings from JSON output.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Wy,
    Reflect,
    Nothing,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Checks the standing conditions on the model.
    Check,
    /// Optimal (w, y) impulse policy.
    Solve,
    /// Optimal reflection level and its QVI residuals.
    Singular,
    /// Monte Carlo long-run averages of a policy.
    Simulate {
        #[arg(long, value_enum, default_value = "wy")]
        policy: Policy,
        /// Reset level (defaults to the optimum).
        #[arg(long)]
        w: Option<f64>,
        /// Trigger level (defaults to the optimum).
        #[arg(long)]
        y: Option<f64>,
        /// Reflection level (defaults to the optimum).
        #[arg(long)]
        x: Option<f64>,
        /// Writes per-cycle records of the impulse policy.
        #[arg(long)]
        cycles_csv: Option<PathBuf>,
    },
    /// Impulse optima along a ladder of fixed costs (CSV).
    SweepK {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        ks: Vec<f64>,
    },
    /// Parameter sensitivities and the sign table.
    Sensitivity {
        #[arg(long, default_value_t = 1e-3)]
        rel_step: f64,
    },
    /// Relative value function of the optimal policy.
    Cell {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        x: Vec<f64>,
    },
    /// Tabulated potentials (CSV).
    Table,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Singular => "singular",
            Command::Simulate { .. } => "simulate",
            Command::SweepK { .. } => "sweep-k",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Cell { .. } => "cell",
            Command::Table => "table",
        }
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl Failure {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Self { code, kind, message: message.into(), details: None }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.code } });
        if let Some(d) = &self.details {
            v["error"]["details"] = d.clone();
        }
        v
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let (code, kind) = match &e {
            e if e.is_condition() => (EXIT_CONDITION, "condition"),
            CoreError::InvalidModel(_) | CoreError::InvalidParams(_) | CoreError::Precondition(_) => (EXIT_CONFIG, "config"),
            _ => (EXIT_NUMERICAL, "numerical"),
        };
        Failure::new(code, kind, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Model(inner) => inner.into(),
            other => Failure::new(EXIT_CONFIG, "config", other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(EXIT_NUMERICAL, "io", e.to_string())
    }
}

enum Artifact {
    Json(Value),
    Csv(Vec<u8>),
}

struct Context {
    cfg: ModelConfig,
    model: ergodic_core::Model,
    params: ergodic_core::Params,
    seed: Option<u64>,
}

impl Context {
    fn table(&self) -> Result<Table, Failure> {
        Ok(Table::build(&self.model, self.cfg.numerics.n_grid, self.cfg.numerics.tol)?)
    }
}

fn solve_report(table: &Table, ctx: &Context) -> Result<Value, Failure> {
    let outcome = solve(table, &ctx.params, ctx.cfg.numerics.tol.max(1e-12))?;
    Ok(match &outcome {
        ImpulseOutcome::Intervene(s) => merge(
            numbers(&[
                ("w_star", s.w_star),
                ("y_star", s.y_star),
                ("F_star", s.f_star),
                ("supply_rate", s.supply_rate_star),
                ("intervention_rate", s.intervention_rate),
                ("cbar_b", s.cbar_b),
                ("do_nothing_value", s.do_nothing_value),
            ]),
            json!({
                "outcome": "intervene",
                "residuals": numbers(&[
                    ("h_w_minus_F", s.lambda_residuals.0),
                    ("h_y_minus_F", s.lambda_residuals.1),
                    ("balance", s.balance_residual),
                ]),
                "boundary_case": to_finite_json(&s.boundary_case, &[]),
                "details": to_finite_json(s, &[]),
            }),
        ),
        ImpulseOutcome::DoNothing { .. } => to_finite_json(&outcome, &[]),
    })
}

fn run_command(cmd: &Command, ctx: &Context) -> Result<Artifact, Failure> {
    let prm = &ctx.params;
    match cmd {
        Command::Check => {
            let report = verify_conditions(&ctx.model, prm, ctx.cfg.numerics.tol)?;
            let failures = report.failures();
            let body = to_finite_json(&report, &[]);
            if !failures.is_empty() {
                let mut f = Failure::new(EXIT_CONDITION, "condition", format!("failed: {}", failures.join("; ")));
                f.details = Some(body);
                return Err(f);
            }
            Ok(Artifact::Json(body))
        }
        Command::Solve => Ok(Artifact::Json(solve_report(&ctx.table()?, ctx)?)),
        Command::Singular => {
            let table = ctx.table()?;
            let outcome = solve_singular(&table, prm)?;
            let qvi = match outcome.solution() {
                Some(s) => to_finite_json(&singular_qvi_check(&table, s)?, &[]),
                None => Value::Null,
            };
            Ok(Artifact::Json(json!({ "solution": to_finite_json(&outcome, &[]), "qvi": qvi })))
        }
        Command::Simulate { policy, w, y, x, cycles_csv } => {
            let table = ctx.table()?;
            let mut pc = ctx.cfg.path_config(&ctx.model, ctx.seed);
            match policy {
                Policy::Wy => {
                    let (w, y) = match (w, y) {
                        (Some(w), Some(y)) => (*w, *y),
                        (None, None) => {
                            let s = solve(&table, prm, 1e-10)?.into_solution()?;
                            (s.w_star, s.y_star)
                        }
                        _ => return Err(Failure::new(EXIT_CONFIG, "config", "give both --w and --y or neither")),
                    };
                    pc.record_cycles = cycles_csv.is_some();
                    let sim = simulate_impulse(&ctx.model, prm, w, y, &pc)?;
                    if let Some(path) = cycles_csv {
                        write_cycles_csv(&sim, BufWriter::new(File::create(path)?))?;
                    }
                    let analytic = numbers(&[
                        ("reward_rate", objective(&table, prm, w, y)?),
                        ("supply_rate", table.supply_rate(w, y)?),
                        ("intervention_rate", 1.0 / table.b_xi(w, y)?),
                    ]);
                    Ok(Artifact::Json(merge(
                        numbers(&[("w", w), ("y", y)]),
                        json!({
                            "policy": "wy",
                            "analytic": analytic,
                            "estimates": to_finite_json(&sim, &[]),
                            "config": to_finite_json(&pc, &[]),
                        }),
                    )))
                }
                Policy::Reflect => {
                    let level = match x {
                        Some(x) => *x,
                        None => solve_singular(&table, prm)?.into_solution()?.y_hat,
                    };
                    let sim = simulate_reflection(&ctx.model, prm, level, &pc)?;
                    let analytic = numbers(&[
                        ("reward_rate", table.h(prm, level)?),
                        ("push_rate", local_time_rate(&table, level)?),
                    ]);
                    Ok(Artifact::Json(merge(
                        numbers(&[("x", level)]),
                        json!({
                            "policy": "reflect",
                            "analytic": analytic,
                            "estimates": to_finite_json(&sim, &[]),
                            "config": to_finite_json(&pc, &[]),
                        }),
                    )))
                }
                Policy::Nothing => {
                    let est = simulate_nothing(&ctx.model, prm, &pc)?;
                    Ok(Artifact::Json(json!({
                        "policy": "nothing",
                        "analytic": numbers(&[("reward_rate", prm.gamma * table.cbar_b()?)]),
                        "estimates": { "reward_rate": to_finite_json(&est, &[]) },
                        "config": to_finite_json(&pc, &[]),
                    })))
                }
            }
        }
        Command::SweepK { ks } => {
            let report = k_sweep(&ctx.table()?, prm, ks)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            Ok(Artifact::Csv(buf))
        }
        Command::Sensitivity { rel_step } => {
            let report = sensitivities(&ctx.table()?, prm, *rel_step)?;
            let mut v = to_finite_json(&report, &[]);
            v["table"] = Value::String(report.render_table());
            v["failures"] = json!(report.failures());
            Ok(Artifact::Json(v))
        }
        Command::Cell { x } => {
            let table = ctx.table()?;
            let sol = solve(&table, prm, 1e-10)?.into_solution()?;
            let cell = cell_problem(&table, &sol)?;
            let values = x.iter().map(|x| cell.value(&table, &sol, *x)).collect::<Result<Vec<_>, _>>()?;
            Ok(Artifact::Json(merge(
                numbers(&[
                    ("mean_g_tilde", cell.mean_g_tilde),
                    ("F_star", sol.f_star),
                    ("w_star", sol.w_star),
                    ("y_star", sol.y_star),
                ]),
                json!({ "x": to_finite_json(x, &[]), "V": to_finite_json(&values, &[]) }),
            )))
        }
        Command::Table => {
            let mut buf = Vec::new();
            ctx.table()?.write_csv(&mut buf, prm)?;
            Ok(Artifact::Csv(buf))
        }
    }
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut s = io::stdout().lock();
            match s.write_all(bytes).and_then(|_| s.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => r,
            }
        }
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let text = serde_json::to_string_pretty(&f.to_json()).unwrap_or_else(|_| f.message.clone());
            eprintln!("{text}");
            f.code
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::new(EXIT_CONFIG, "config", "--config PATH is required"))?;
    let cfg = ModelConfig::load(path)?;
    let model = cfg.build_model()?;
    let params = cfg.params()?;
    let ctx = Context { cfg, model, params, seed: cli.seed };
    match run_command(&cli.command, &ctx)? {
        Artifact::Csv(bytes) => write_out(cli.out.as_deref(), &bytes)?,
        Artifact::Json(result) => {
            let strip: &[&str] = if cli.no_timestamp { &["elapsed"] } else { &[] };
            let mut doc = json!({ "command": cli.command.name(), "version": env!("CARGO_PKG_VERSION") });
            if !cli.no_timestamp {
                let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                doc["timestamp_unix"] = json!(now);
            }
            doc["result"] = to_finite_json(&result, strip);
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::new(EXIT_NUMERICAL, "io", e.to_string()))?;
            text.push('\n');
            write_out(cli.out.as_deref(), text.as_bytes())?;
        }
    }
    Ok(())
}

/// Parses `args` and runs; usage errors exit with the config code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let f = Failure::new(EXIT_CONFIG, "usage", e.to_string());
            eprintln!("{}", serde_json::to_string_pretty(&f.to_json()).unwrap_or_default());
            EXIT_CONFIG
        }
    }
}
