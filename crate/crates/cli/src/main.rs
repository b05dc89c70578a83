use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use seqbench::dataset::{ingest, write_normalized, DatasetFormat, DatasetSpec, SequenceMode};
use seqbench::runner::{self, RunError};

#[derive(Parser)]
#[command(name = "seqbench", version, about = "Sequential recommendation benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw dataset into normalized JSONL files.
    Ingest {
        #[arg(long, value_parser = parse_format)]
        format: DatasetFormat,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured model and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Regenerate reports from a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Md)]
        format: ReportFormat,
    },
    /// Write exchange requests for external recommenders.
    ExportRequests {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "full", value_parser = parse_mode)]
        mode: SequenceMode,
    },
    /// Import an exchange recommendations file as a model of the run.
    ImportRecs {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "full", value_parser = parse_mode)]
        mode: SequenceMode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse::<DatasetFormat>().map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<SequenceMode, String> {
    s.parse::<SequenceMode>().map_err(|e| e.to_string())
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest { format, input, out } => {
            let spec = DatasetSpec::for_format(format);
            let dataset = ingest(&spec, &input, format)
                .with_context(|| format!("ingesting {}", input.display()))
                .map_err(Failure::Runtime)?;
            write_normalized(&dataset, &out)
                .with_context(|| format!("writing {}", out.display()))
                .map_err(Failure::Runtime)?;
            let s = dataset.summary;
            println!(
                "{}: {} interactions, {} users, {} items before filtering; kept {} interactions of {} users; universe {}",
                dataset.name,
                s.raw_interactions,
                s.raw_users,
                s.raw_items,
                dataset.interactions.len(),
                dataset.num_users(),
                dataset.universe_size
            );
        }
        Command::Run { config } => {
            let cfg = runner::load_config(&config)?;
            let outcome = runner::run_benchmark(&cfg)?;
            print!(
                "{}",
                std::fs::read_to_string(outcome.run_dir.join("report.md"))
                    .context("reading report.md")
                    .map_err(Failure::Runtime)?
            );
            println!("run directory: {}", outcome.run_dir.display());
        }
        Command::Report { run, format } => {
            runner::report(&run)?;
            let name = match format {
                ReportFormat::Md => "report.md",
                ReportFormat::Csv => "report.csv",
            };
            let text = std::fs::read_to_string(run.join(name))
                .with_context(|| format!("reading {name}"))
                .map_err(Failure::Runtime)?;
            print!("{text}");
        }
        Command::ExportRequests { run, out, mode } => {
            let n = runner::export_run_requests(&run, &out, mode)?;
            println!("wrote {n} requests to {}", out.display());
        }
        Command::ImportRecs { run, file, model, mode } => {
            runner::import_run_recommendations(&run, &file, &model, mode)?;
            println!("imported {model} ({mode}) into {}", run.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
