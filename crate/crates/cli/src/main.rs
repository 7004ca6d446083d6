use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgpca::config::PipelineConfig;
use lgpca::pipeline::{self, PipelineError};
use lgpca::synth;

#[derive(Debug, Parser)]
#[command(name = "lgpca", version, about = "Detect, track and recognize moving objects in frame sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Pipeline config file (`key = value` lines); defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        Ok(match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a class library from `DIR/<class>/<crop>` images.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run detection, tracking and recognition over a frame directory.
    Recognize {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score results against ground truth; one sequence per --results/--truth pair.
    Evaluate {
        #[arg(long, required_unless_present = "rows")]
        results: Vec<PathBuf>,
        #[arg(long, required_unless_present = "rows")]
        truth: Vec<PathBuf>,
        /// JSONL of precomputed `{sequence, correct, incorrect}` rows instead.
        #[arg(long, conflicts_with_all = ["results", "truth"])]
        rows: Option<PathBuf>,
        /// Text report path; the JSON report is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a seeded synthetic scene with training crops and ground truth.
    Synth {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(synth::SCENARIOS))]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn report(out: &Path, report: &lgpca::evaluation::AccuracyReport) -> Result<(), PipelineError> {
    let (text, json) = pipeline::write_report(report, out)?;
    print!("{}", report.to_text());
    eprintln!("wrote {} and {}", text.display(), json.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Train { config, input, model } => {
            let lib = pipeline::cmd_train(&config.load()?, &input, &model)?;
            eprintln!(
                "trained {} classes ({}), rank {}, wrote {}",
                lib.classes.len(),
                lib.labels().collect::<Vec<_>>().join(", "),
                lib.pca.rank,
                model.display()
            );
        }
        Command::Recognize {
            config,
            model,
            input,
            out,
        } => {
            let records = pipeline::cmd_recognize(&config.load()?, &model, &input, &out)?;
            let detections: usize = records.iter().map(|r| r.detections.len()).sum();
            eprintln!(
                "processed {} frames, {} detections, wrote {}",
                records.len(),
                detections,
                out.join(pipeline::RESULTS_FILE).display()
            );
        }
        Command::Evaluate {
            results,
            truth,
            rows,
            out,
        } => {
            let r = match rows {
                Some(rows) => pipeline::report_from_rows(&rows)?,
                None => {
                    let pairs: Vec<_> = results.into_iter().zip(truth).collect();
                    pipeline::cmd_evaluate(&pairs)?
                }
            };
            report(&out, &r)?;
        }
        Command::Synth { config, scenario, out } => {
            let scene = synth::cmd_synth(&config.load()?, &out, &scenario)?;
            eprintln!(
                "{}: {} frames, {} objects, wrote {}",
                scene.scenario,
                scene.frames.len(),
                scene.truth.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Evaluate { results, truth, .. } = &cli.command {
        if results.len() != truth.len() {
            eprintln!("error: --results and --truth must be given the same number of times");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
