use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use ipd_core::gateway::SidecarClient;
use ipd_core::metrics::{ForgivenessMode, MetricKind, MetricOptions};
use ipd_core::reporting::{self, ExportOptions, RandomGrouping, ReportError};
use ipd_core::tournament::{self, LoadedPlan, RunOptions, Runtime, TournamentError, DEFAULT_WORKERS};

const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8000";
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SIDECAR: u8 = 3;

#[derive(Parser)]
#[command(name = "ipd", version, about = "Iterated prisoner's dilemma tournaments with steered LLM agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play every game of a plan, resuming any earlier partial run in OUT.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the plan's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
        /// Sidecar base URL; falls back to the plan file, then the default.
        #[arg(long, env = "IPD_SIDECAR_URL")]
        endpoint: Option<String>,
        /// Stop after this many newly played games.
        #[arg(long)]
        stop_after: Option<usize>,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = 300)]
        timeout: u64,
    },
    /// Per-condition rates with median and quartiles.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        metric: MetricKind,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, value_enum, default_value_t = Forgiveness::Strict)]
        forgiveness: Forgiveness,
        /// Report each random opponent separately instead of pooled.
        #[arg(long)]
        separate_random: bool,
    },
    /// Setup-3 score matrices as CSV.
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Human-readable summary of a run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        separate_random: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Forgiveness {
    Strict,
    Loose,
}

enum Failure {
    Usage(String),
    Data(String),
    Sidecar(String),
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<TournamentError> for Failure {
    fn from(e: TournamentError) -> Self {
        if e.is_sidecar_unavailable() {
            Failure::Sidecar(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn export_options(forgiveness: Forgiveness, separate_random: bool) -> ExportOptions {
    ExportOptions {
        metric: MetricOptions {
            forgiveness: match forgiveness {
                Forgiveness::Strict => ForgivenessMode::Strict,
                Forgiveness::Loose => ForgivenessMode::Loose,
            },
        },
        random: if separate_random {
            RandomGrouping::Separate
        } else {
            RandomGrouping::Pooled
        },
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            plan,
            out,
            seed,
            workers,
            endpoint,
            stop_after,
            timeout,
        } => {
            if workers == 0 {
                return Err(Failure::Usage("--workers must be at least 1".into()));
            }
            let loaded = LoadedPlan::from_path(&plan)?;
            let mut plan = loaded.plan;
            if let Some(s) = seed {
                plan.master_seed = s;
            }
            let runtime = if plan.uses_llm() {
                let endpoint = endpoint.or(loaded.endpoint).unwrap_or_else(|| DEFAULT_ENDPOINT.into());
                let client = SidecarClient::new(&endpoint, Duration::from_secs(timeout));
                tournament::preflight(&client)?;
                Runtime::with_backend(Arc::new(client), endpoint)
            } else {
                Runtime::offline()
            };
            let outcome = tournament::run_plan(&plan, &runtime, &out, RunOptions { workers, stop_after })?;
            info!("plan {}", outcome.fingerprint);
            eprintln!(
                "played {}, reused {}, recorded {} of {}, invalid {}{}",
                outcome.played,
                outcome.reused,
                outcome.transcripts.len(),
                outcome.planned,
                outcome.n_invalid(),
                if outcome.is_complete() { "" } else { " (incomplete; rerun to resume)" }
            );
            Ok(())
        }
        Command::Metrics {
            input,
            metric,
            format,
            forgiveness,
            separate_random,
        } => {
            let run = reporting::load_run(&input)?;
            let table = reporting::export_rates(&run.transcripts, metric, &export_options(forgiveness, separate_random))?;
            let text = match format {
                Format::Csv => table.to_csv()?,
                Format::Json => table.to_json()?,
            };
            print!("{text}");
            Ok(())
        }
        Command::Heatmap { input, out } => {
            let run = reporting::load_run(&input)?;
            let csv = reporting::export_heatmap(&run.transcripts)?.to_csv()?;
            std::fs::write(&out, csv).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
            Ok(())
        }
        Command::Report { input, separate_random } => {
            let run = reporting::load_run(&input)?;
            print!(
                "{}",
                reporting::render_report(&run, &export_options(Forgiveness::Strict, separate_random))
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Sidecar(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_SIDECAR)
        }
    }
}
