use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use lpscatter::commands::{self, parse_orders, Slice};
use lpscatter::io::ExperimentConfig;
use lpscatter::selftest::{Suite, SuiteSetup};
use lpscatter::Error;

/// Lax-Phillips backscattering toolkit.
///
/// Environment: LPBS_OUT_DIR overrides every output directory, LPBS_THREADS
/// is recorded in the provenance.
#[derive(Parser)]
#[command(name = "lpbs", version)]
struct Cli {
    /// Print the report (or error) as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run invariant suites; exit code 0 iff every check passes.
    Selftest {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 48)]
        n_side: usize,
        #[arg(long, default_value_t = 29)]
        sphere_degree: usize,
        #[arg(long, default_value_t = 128)]
        n_s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Forward solve: kernel, backscatter data and phantom files.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Born terms for the probe nodes and their decay table.
    Born {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "1..6")]
        orders: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the potential from stored backscatter data.
    Invert {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time-domain against closed-form Born terms and the resolvent identity.
    SpectralCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV slice of a stored field: x=, y=, z= for potentials, node= for data.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        slice: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: &Cli) -> lpscatter::Result<(Value, bool)> {
    let quiet = cli.json;
    match &cli.command {
        Command::Selftest { suite, n_side, sphere_degree, n_s, seed } => {
            let suite: Suite = suite.parse()?;
            let setup = SuiteSetup::new(*n_side, 1.0, *sphere_degree, *n_s, *seed)?;
            let r = commands::selftest(suite, &setup)?;
            Ok((r.report, r.all_pass))
        }
        Command::Forward { config, out } => Ok((commands::forward(&ExperimentConfig::load(config)?, out.as_deref())?, true)),
        Command::Born { config, orders, out } => {
            let orders = parse_orders(orders)?;
            Ok((commands::born(&ExperimentConfig::load(config)?, orders, out.as_deref())?, true))
        }
        Command::Invert { data, config, out } => {
            let cfg = ExperimentConfig::load(config)?;
            let report = commands::invert(&cfg, data, out.as_deref(), |k, e| {
                if !quiet {
                    eprintln!("iteration {k}: filtered error vs config phantom {e:.3e}");
                }
            })?;
            Ok((report, true))
        }
        Command::SpectralCheck { config, out } => {
            Ok((commands::spectral_check(&ExperimentConfig::load(config)?, out.as_deref())?, true))
        }
        Command::PlotData { input, slice, out } => {
            let slice: Slice = slice.parse()?;
            Ok((commands::plot_data(input, slice, out)?, true))
        }
    }
}

fn print_human(report: &Value) {
    match report.get("checks").and_then(Value::as_array) {
        Some(checks) => {
            for c in checks {
                println!(
                    "{:5} {}/{}: {:.3e} (tolerance {:.1e}, {:.1}s)",
                    if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
                    c["suite"].as_str().unwrap_or(""),
                    c["name"].as_str().unwrap_or(""),
                    c["value"].as_f64().unwrap_or(f64::NAN),
                    c["tolerance"].as_f64().unwrap_or(f64::NAN),
                    c["seconds"].as_f64().unwrap_or(f64::NAN),
                );
            }
        }
        None => {
            let mut shown = report.clone();
            if let Some(obj) = shown.as_object_mut() {
                obj.remove("provenance");
                obj.remove("kappa");
            }
            println!("{}", serde_json::to_string_pretty(&shown).unwrap_or_default());
        }
    }
}

fn error_json(kind: &str, message: &str) -> Value {
    json!({ "ok": false, "error": { "kind": kind, "message": message } })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            println!("{}", error_json("Usage", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok((report, pass)) => {
            if cli.json {
                println!("{report}");
            } else {
                print_human(&report);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let err: Error = e;
            let body = error_json(err.kind(), &err.to_string());
            if cli.json {
                println!("{body}");
            } else {
                eprintln!("{body}");
            }
            ExitCode::from(1)
        }
    }
}
