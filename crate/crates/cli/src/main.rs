use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rdv_cli::commands::{self, EXIT_ERROR, EXIT_OK};
use rdv_cli::{accept, CliError};
use rdv_core::trace::TraceFormat;

#[derive(Parser)]
#[command(name = "rdv", version, about = "Risk-aware UAS rendezvous planner and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogFormat {
    Csv,
    Jsonl,
}

impl From<LogFormat> for TraceFormat {
    fn from(f: LogFormat) -> Self {
        match f {
            LogFormat::Csv => TraceFormat::Csv,
            LogFormat::Jsonl => TraceFormat::Jsonl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace and summary.
    Run {
        /// Scenario file, or a bundled name (low_risk, high_risk, exact_model, adversarial_switch).
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $RDV_OUT_DIR or ./rdv-out].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        log_format: LogFormat,
        /// Log solver progress to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Run a range of seeds and write a summary table.
    Batch {
        #[arg(long)]
        scenario: String,
        /// Inclusive seed range, e.g. 1..20.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        log_format: LogFormat,
        #[arg(long)]
        verbose: bool,
    },
    /// Run the acceptance suite; exits 0 iff every criterion passes.
    Accept,
    /// Write plot-ready CSV series derived from a trace.
    Plotdata {
        #[arg(long)]
        trace: PathBuf,
        /// Output directory [default: next to the trace].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn report(errors: &[CliError]) -> i32 {
    for e in errors {
        eprintln!("{}", e.diagnostic());
    }
    EXIT_ERROR
}

fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            log_format,
            verbose,
        } => {
            init_logging(verbose);
            match commands::run(&scenario, seed, &commands::out_dir(out), log_format.into()) {
                Ok(r) => {
                    println!("{}", commands::summary_line(&r.summary));
                    println!("trace={} summary={}", r.trace_path.display(), r.summary_path.display());
                    if let Some(reason) = &r.summary.stopped {
                        eprintln!("{}", CliError::new("incomplete", reason.clone()).diagnostic());
                    }
                    r.exit_code
                }
                Err(e) => report(&[e]),
            }
        }
        Command::Batch {
            scenario,
            seeds,
            out,
            log_format,
            verbose,
        } => {
            init_logging(verbose);
            let seeds = match commands::parse_seeds(&seeds) {
                Ok(s) => s,
                Err(e) => return report(&[e]),
            };
            match commands::batch(&scenario, seeds, &commands::out_dir(out), log_format.into()) {
                Ok(b) => {
                    for (seed, r) in &b.runs {
                        println!("seed={seed} {}", commands::summary_line(&r.summary));
                    }
                    let tally: Vec<String> = commands::phase_counts(&b.runs)
                        .iter()
                        .map(|(p, n)| format!("{p}={n}"))
                        .collect();
                    println!("total={} {}", b.runs.len(), tally.join(" "));
                    println!("table={}", b.table_path.display());
                    b.exit_code
                }
                Err(e) => report(&[e]),
            }
        }
        Command::Accept => {
            init_logging(false);
            let reports = accept::run_all();
            for r in &reports {
                println!("{r}");
            }
            let passed = reports.iter().filter(|r| r.passed).count();
            println!("{passed}/{} criteria passed", reports.len());
            if passed == reports.len() {
                EXIT_OK
            } else {
                EXIT_ERROR
            }
        }
        Command::Plotdata { trace, out } => match commands::plotdata(&trace, out.as_deref()) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                EXIT_OK
            }
            Err(e) => report(&[e]),
        },
        Command::Validate { scenario } => match commands::validate(&scenario) {
            Ok(cfg) => {
                println!("ok scenario={}", cfg.name);
                EXIT_OK
            }
            Err(errors) => report(&errors),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(cli) as u8)
}
