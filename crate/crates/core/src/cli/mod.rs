//! The `taxopt` command line: `solve`, `statics`, `sweep`, `curve`, `verify`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 infeasible problem,
//! 3 verification failure.

pub mod config;
pub mod render;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::solver::{comparative_statics, solve_closed_form, upper_bound};
use crate::sweep::{run_sweep, sample_curves, SweepOutcome};
use config::{ConfigError, FlagValues, Format, RunConfig};
use render::{error_record, Cell, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "TAXOPT_CONFIG";

pub const SWEEP_HEADER: [&str; 16] = [
    "A",
    "k",
    "beta",
    "z",
    "t",
    "pi",
    "B",
    "status",
    "m_star",
    "W",
    "objective",
    "foc_residual",
    "soc_margin",
    "dm_dA",
    "dm_dB",
    "dm_dk",
];

#[derive(Debug, Parser)]
#[command(
    name = "taxopt",
    version,
    about = "Optimal tax deduction under a Weibull-type penalisation probability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form optimal deduction.
    Solve(Common),
    /// Comparative statics with finite-difference counterparts.
    Statics(Common),
    /// Solve over a parameter grid; axes take `start:stop:count`.
    Sweep(Common),
    /// Sample F, f, lambda and E(U) on a deduction grid.
    Curve {
        #[command(flatten)]
        common: Common,
        /// Number of samples (default 200).
        #[arg(long)]
        n: Option<usize>,
        /// Largest deduction sampled (default twice the second-order bound).
        #[arg(long = "m-max")]
        m_max: Option<f64>,
    },
    /// Run the oracle checks on the built-in grid or the configured point(s).
    Verify {
        #[command(flatten)]
        common: Common,
        /// Replace every deviation tolerance with this value.
        #[arg(long, allow_hyphen_values = true)]
        tolerance: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Hazard scale A > 0.
    #[arg(long = "A", allow_hyphen_values = true)]
    a: Option<String>,
    /// Hazard shape k > 0.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    /// Reclaim share in [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Penalty rate >= 0.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// Tax rate in [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Gross income > 0.
    #[arg(long, allow_hyphen_values = true)]
    pi: Option<String>,
    /// TOML config file; flags override its values.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decimal digits in rendered numbers (default 12).
    #[arg(long)]
    precision: Option<usize>,
    /// Enforcement shift in (-1, 1): A -> A(1+i), k -> k/(1+i).
    #[arg(long, allow_hyphen_values = true)]
    intensity: Option<f64>,
}

impl Common {
    fn flags(self) -> FlagValues {
        FlagValues {
            a: self.a,
            k: self.k,
            beta: self.beta,
            z: self.z,
            t: self.t,
            pi: self.pi,
            config: self.config,
            format: self.format,
            out: self.out,
            precision: self.precision,
            intensity: self.intensity,
            ..FlagValues::default()
        }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn config_error(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let (command, flags) = match cli.command {
        Command::Solve(c) => (Cmd::Solve, c.flags()),
        Command::Statics(c) => (Cmd::Statics, c.flags()),
        Command::Sweep(c) => (Cmd::Sweep, c.flags()),
        Command::Curve { common, n, m_max } => (
            Cmd::Curve,
            FlagValues {
                n,
                m_max,
                ..common.flags()
            },
        ),
        Command::Verify { common, tolerance } => (
            Cmd::Verify,
            FlagValues {
                tolerance,
                ..common.flags()
            },
        ),
    };
    let config = match RunConfig::resolve(&flags) {
        Ok(c) => c,
        Err(e) => return Outcome::config_error(e),
    };
    let result = match command {
        Cmd::Solve => cmd_solve(&config),
        Cmd::Statics => cmd_statics(&config),
        Cmd::Sweep => cmd_sweep(&config),
        Cmd::Curve => cmd_curve(&config),
        Cmd::Verify => cmd_verify(&config),
    };
    let mut outcome = match result {
        Ok(o) => o,
        Err(e) => return Outcome::config_error(e),
    };
    if let Some(path) = &config.out {
        if let Err(e) = std::fs::write(path, &outcome.stdout) {
            return Outcome::config_error(format!("cannot write {}: {e}", path.display()));
        }
        outcome.stdout.clear();
    }
    outcome
}

enum Cmd {
    Solve,
    Statics,
    Sweep,
    Curve,
    Verify,
}

fn infeasible(e: &Error, format: Format) -> Outcome {
    Outcome {
        code: EXIT_INFEASIBLE,
        stdout: error_record(e.kind(), &e.to_string(), format),
        stderr: format!("{e}\n"),
    }
}

fn ok(stdout: String) -> Outcome {
    Outcome {
        code: EXIT_OK,
        stdout,
        stderr: String::new(),
    }
}

fn param_cells(p: &crate::Problem) -> Vec<Cell> {
    let (h, pol) = (p.hazard(), p.policy());
    vec![
        h.a().into(),
        h.k().into(),
        pol.beta().into(),
        pol.z().into(),
        pol.t().into(),
        p.pi().into(),
        pol.effective_penalty().into(),
    ]
}

const PARAM_COLUMNS: [&str; 7] = ["A", "k", "beta", "z", "t", "pi", "B"];

fn with_params(extra: &[&'static str]) -> Vec<&'static str> {
    PARAM_COLUMNS.iter().chain(extra).copied().collect()
}

pub fn cmd_solve(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let p = config.problem()?;
    let s = match solve_closed_form(&p) {
        Ok(s) => s,
        Err(e) if e.is_infeasibility() => return Ok(infeasible(&e, config.format)),
        Err(e) => {
            return Err(ConfigError {
                field: None,
                origin: None,
                message: e.to_string(),
            })
        }
    };
    let mut table = Table::new(&with_params(&[
        "lambert_arg",
        "W",
        "m_star",
        "objective",
        "foc_residual",
        "soc_margin",
        "upper_bound",
        "shape_warning",
    ]));
    let mut row = param_cells(&p);
    row.extend([
        s.lambert_arg.into(),
        s.w_value.into(),
        s.m_star.into(),
        s.objective.into(),
        s.foc_residual.into(),
        s.soc_margin.into(),
        s.upper_bound.into(),
        s.shape_warning.into(),
    ]);
    table.push(row);
    let mut out = ok(table.render(config.format, config.precision, true));
    if s.shape_warning {
        out.stderr = format!(
            "warning: shape k = {} <= 1; the penalisation CDF has no convex region near the origin\n",
            p.hazard().k()
        );
    }
    Ok(out)
}

pub fn cmd_statics(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let p = config.problem()?;
    let report = solve_closed_form(&p).and_then(|s| comparative_statics(&p, &s).map(|r| (s, r)));
    let (s, r) = match report {
        Ok(pair) => pair,
        Err(e) if e.is_infeasibility() => return Ok(infeasible(&e, config.format)),
        Err(e) => {
            return Err(ConfigError {
                field: None,
                origin: None,
                message: e.to_string(),
            })
        }
    };
    let mut table = Table::new(&with_params(&[
        "m_star",
        "W",
        "dm_dA",
        "dm_dB",
        "dm_dk",
        "fd_dm_dA",
        "fd_dm_dB",
        "fd_dm_dk",
        "max_rel_disagreement",
        "dm_dB_factored",
        "factored_agrees",
    ]));
    let mut row = param_cells(&p);
    row.extend([
        s.m_star.into(),
        s.w_value.into(),
        r.dm_da.into(),
        r.dm_db.into(),
        r.dm_dk.into(),
        r.fd_dm_da.into(),
        r.fd_dm_db.into(),
        r.fd_dm_dk.into(),
        r.max_rel_disagreement.into(),
        if r.dm_db_factored.is_finite() {
            r.dm_db_factored.into()
        } else {
            Cell::Empty
        },
        r.factored_agrees.into(),
    ]);
    table.push(row);
    Ok(ok(table.render(config.format, config.precision, true)))
}

pub fn cmd_sweep(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let spec = config.grid()?;
    let records = run_sweep(&spec).map_err(|e| ConfigError {
        field: None,
        origin: None,
        message: e.to_string(),
    })?;
    let mut table = Table::new(&SWEEP_HEADER);
    for r in &records {
        let mut row = param_cells(&r.problem);
        row.push(r.status().into());
        match &r.outcome {
            SweepOutcome::Solved {
                solution: s,
                statics,
            } => row.extend([
                s.m_star.into(),
                s.w_value.into(),
                s.objective.into(),
                s.foc_residual.into(),
                s.soc_margin.into(),
                statics.dm_da.into(),
                statics.dm_db.into(),
                statics.dm_dk.into(),
            ]),
            SweepOutcome::Failed { .. } => row.extend(std::iter::repeat_n(Cell::Empty, 8)),
        }
        table.push(row);
    }
    Ok(ok(table.render(config.format, config.precision, false)))
}

pub fn cmd_curve(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let p = config.problem()?;
    let m_max = config
        .m_max
        .unwrap_or_else(|| 2.0 * upper_bound(p.hazard()));
    let points = sample_curves(&p, m_max, config.n).map_err(|e| ConfigError {
        field: None,
        origin: None,
        message: e.to_string(),
    })?;
    let mut table = Table::new(&["m", "F", "f", "lambda", "EU"]);
    for pt in points {
        table.push(vec![
            pt.m.into(),
            pt.cdf.into(),
            pt.pdf.into(),
            pt.hazard.into(),
            pt.expected_income.into(),
        ]);
    }
    Ok(ok(table.render(config.format, config.precision, false)))
}

pub fn cmd_verify(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let problems = if config.has_any_param() {
        let spec = config.grid()?;
        spec.validate().map_err(|e| ConfigError {
            field: None,
            origin: None,
            message: e.to_string(),
        })?;
        crate::sweep::run_sweep_serial(&spec)
            .map_err(|e| ConfigError {
                field: None,
                origin: None,
                message: e.to_string(),
            })?
            .into_iter()
            .map(|r| r.problem)
            .collect()
    } else {
        verify::default_problems()
    };
    let (checks, skipped) = verify::run_checks(&problems, config.tolerance);
    let mut table = Table::new(&["check", "samples", "worst", "tolerance", "status"]);
    for c in &checks {
        table.push(vec![
            c.name.into(),
            Cell::Text(c.samples.to_string()),
            c.worst.into(),
            c.tolerance.into(),
            if c.passed { "pass" } else { "FAIL" }.into(),
        ]);
    }
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(Outcome {
        code: if all_passed {
            EXIT_OK
        } else {
            EXIT_VERIFY_FAILED
        },
        stdout: table.render(config.format, config.precision, false),
        stderr: format!(
            "{} points, {} without an interior optimum (skipped); {}\n",
            problems.len(),
            skipped,
            if all_passed {
                "all checks passed"
            } else {
                "verification FAILED"
            }
        ),
    })
}
