//! `pmelab` command line: solve, norms, dichotomy, trace checks, envelope constants, validation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
//! Blow-up and similar outcomes are data and still exit 0.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pmelab::harness::config::{parse_config, ExperimentConfig};
use pmelab::harness::dichotomy::{dichotomy_sensitivity, run_dichotomy};
use pmelab::harness::experiments::run_trace_check;
use pmelab::harness::io;
use pmelab::harness::validate::run_validation;
use pmelab::necessary::envelope_constant;
use pmelab::norms::{evaluate, NormSpec};
use pmelab::solver::solve;
use pmelab::{Boundary, LabError, ProblemParams};

#[derive(Parser)]
#[command(name = "pmelab", version, about = "Numerical lab for u_t = Δu^m + u^p")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Output {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a JSON-lines event log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Morrey,
    OrliczEta,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and print its time series.
    Solve {
        config: PathBuf,
        /// Also write the final field as CSV.
        #[arg(long)]
        field_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Evaluate a uniformly local norm of a field CSV.
    Norm {
        field: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        cap: Option<f64>,
        /// Boundary for bare `x,u` tables.
        #[arg(long, default_value = "neumann")]
        boundary: String,
        /// Orlicz–η only: the exponents and horizon.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Bisect the existence / blow-up threshold in c.
    Dichotomy {
        config: PathBuf,
        #[arg(long)]
        c_lo: Option<f64>,
        #[arg(long)]
        c_hi: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Re-bisect at h/2 and with doubled (i, j).
        #[arg(long)]
        sensitivity: bool,
        /// Check each completed run's early trace against the envelope.
        #[arg(long)]
        envelope_check: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Measure the early sup-ball masses and compare with the envelope.
    TraceCheck {
        config: PathBuf,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long)]
        sigma_min: Option<f64>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Explicit envelope constant C(N, m, p, T).
    Constants {
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        p: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Run the built-in oracle suite.
    Validate {
        #[command(flatten)]
        output: Output,
    },
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn write(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(output: &Output, csv: &str, log: impl FnOnce() -> pmelab::Result<String>) -> Outcome {
    write(output.out.as_deref(), csv)?;
    if let Some(p) = &output.log {
        write(Some(p), &log()?)?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    cfg.load_files(path.parent().unwrap_or(Path::new(".")))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve { config, field_out, output } => {
            let cfg = load(&config)?;
            let report = solve(&cfg.solver)?;
            if let Some(p) = field_out {
                write(Some(&p), &io::field_csv(&report.last().field)?)?;
            }
            emit(&output, &io::series_csv(&report)?, || io::report_events("solve", &report))
        }
        Command::Norm { field, kind, q, alpha, cap, boundary, m, p, horizon, output } => {
            let boundary: Boundary = boundary.parse()?;
            let text = std::fs::read_to_string(&field).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", field.display())))?;
            let f = io::read_field_csv(&text, boundary)?;
            let (spec, params) = match kind {
                Kind::Morrey => {
                    let q = q.ok_or_else(|| Failure::Usage("--kind morrey needs --q".into()))?;
                    (NormSpec::morrey(q, alpha, cap.unwrap_or(f64::INFINITY)), None)
                }
                Kind::OrliczEta => {
                    let (Some(m), Some(p), Some(t)) = (m, p, horizon) else {
                        return Err(Failure::Usage("--kind orlicz-eta needs --m, --p and --T".into()));
                    };
                    let mut spec = NormSpec::orlicz_eta(alpha, t)?;
                    if let Some(c) = cap {
                        spec.cap = c;
                    }
                    (spec, Some(ProblemParams::new(f.dim(), m, p)?))
                }
            };
            let value = evaluate(&f, &spec, params.as_ref())?;
            emit(&output, &io::norm_csv(&spec.label(), &value)?, || io::json_line(&value))
        }
        Command::Dichotomy { config, c_lo, c_hi, steps, sensitivity, envelope_check, output } => {
            let cfg = load(&config)?;
            let mut settings = cfg.dichotomy.clone().unwrap_or_default();
            settings.c_lo = c_lo.unwrap_or(settings.c_lo);
            settings.c_hi = c_hi.unwrap_or(settings.c_hi);
            settings.steps = steps.unwrap_or(settings.steps);
            settings.envelope_check |= envelope_check;
            let result = run_dichotomy(&cfg.solver, &settings)?;
            let sens = if sensitivity { Some(dichotomy_sensitivity(&cfg.solver, &settings, &result)?) } else { None };
            emit(&output, &io::dichotomy_csv(&result, sens.as_ref())?, || io::dichotomy_events(&result))
        }
        Command::TraceCheck { config, tau0, sigma_min, sigma_max, output } => {
            let cfg = load(&config)?;
            let mut t = cfg.trace.clone().unwrap_or_default();
            t.tau0 = tau0.or(t.tau0);
            t.sigma_min = sigma_min.or(t.sigma_min);
            t.sigma_max = sigma_max.or(t.sigma_max);
            let check = run_trace_check(&cfg.solver, &t)?;
            emit(&output, &io::trace_csv(&check)?, || io::json_line(&check))
        }
        Command::Constants { n, m, p, horizon, output } => {
            let params = ProblemParams::new(n, m, p)?;
            let c = envelope_constant(&params, horizon)?;
            emit(&output, &io::constants_csv(&params, horizon, &c)?, || io::json_line(&c))
        }
        Command::Validate { output } => {
            let checks = run_validation()?;
            emit(&output, &io::validation_csv(&checks)?, || {
                checks.iter().map(io::json_line).collect::<pmelab::Result<Vec<_>>>().map(|v| v.concat())
            })?;
            for c in &checks {
                eprintln!("{c}");
            }
            if checks.iter().all(|c| c.pass) {
                Ok(())
            } else {
                Err(Failure::Numerical("validation checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
