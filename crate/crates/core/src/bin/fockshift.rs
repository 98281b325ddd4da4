use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fockshift::run::{render_campaign, render_pipeline, run_campaign, run_pipeline, write_records};
use fockshift::scenario::{OutputFormat, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "fockshift", version, about = "Photodetection state-reduction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the scenario's operations and compare against closed forms.
    Pipeline {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run Monte Carlo trials and compare the conditioned posterior.
    Campaign {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: available cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also write every trial record as JSON lines to this path.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Args)]
struct OutputArgs {
    /// Output path (default: scenario `output.path`, else stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl OutputArgs {
    fn resolve(&self, scenario: &Scenario) -> (Option<PathBuf>, OutputFormat) {
        let format = match self.format {
            Some(Format::Csv) => OutputFormat::Csv,
            Some(Format::Json) => OutputFormat::Json,
            None => scenario.output.format,
        };
        (self.output.clone().or_else(|| scenario.output.path.clone()), format)
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), ScenarioError> {
    let io = |e: std::io::Error| ScenarioError::Output(e.to_string());
    match path {
        Some(p) => std::fs::write(p, text).map_err(io),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
    }
}

fn run(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Pipeline { scenario, out } => {
            let scenario = Scenario::load(&scenario)?;
            let (path, format) = out.resolve(&scenario);
            let report = run_pipeline(&scenario)?;
            emit(&render_pipeline(&report, format)?, path.as_deref())
        }
        Command::Campaign {
            scenario,
            out,
            seed,
            threads,
            records,
        } => {
            let mut scenario = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let (path, format) = out.resolve(&scenario);
            let outcome = run_campaign(&scenario, threads, records.is_some())?;
            if let (Some(dest), Some(recs)) = (records, outcome.records.as_ref()) {
                let file = File::create(&dest).map_err(|e| ScenarioError::Output(format!("{}: {e}", dest.display())))?;
                let mut w = BufWriter::new(file);
                write_records(recs, &mut w)?;
                w.flush().map_err(|e| ScenarioError::Output(e.to_string()))?;
            }
            emit(&render_campaign(&outcome.report, format)?, path.as_deref())
        }
        Command::Validate { scenario } => {
            Scenario::load(&scenario)?.validate()?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
