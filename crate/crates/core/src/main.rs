use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsi::io::{run_analyze, run_curves, run_fit, run_simulate, score_stream, RunConfig};
use gsi::safety::Rho;
use gsi::{Error, Result};

/// Personalized safety index: scoring, fitting, simulation and analysis.
#[derive(Parser)]
#[command(name = "gsi", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files (default: configured out_dir, else `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a trajectory stream; one output line per input record.
    Score {
        /// Trajectory JSONL; stdin when absent or `-`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output JSONL; stdout when absent or `-`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Fit rho per participant; writes fit.csv and observations.csv.
    Fit {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
    },
    /// Generate a synthetic cohort; writes trajectories.jsonl, ratings.jsonl and truth.csv.
    Simulate {
        #[arg(long)]
        n_bys: Option<usize>,
        #[arg(long)]
        n_cas: Option<usize>,
    },
    /// Analyze a fit report together with its data; writes the report tables.
    Analyze {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
        /// Ground-truth manifest from `simulate`, for recovery errors.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Tabulate GSI against distance for several exponents; writes curves.csv.
    Curves {
        /// Repeat for several curves.
        #[arg(long = "rho")]
        rhos: Vec<f64>,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
}

fn is_std(path: &Option<PathBuf>) -> bool {
    path.as_deref().is_none_or(|p| p == Path::new("-"))
}

fn report(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = cli
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    match cli.command {
        Command::Score { input, output, rho } => {
            let rho = rho.map(Rho::new).transpose()?.unwrap_or(cfg.score.rho);
            let reader: Box<dyn io::BufRead> = if is_std(&input) {
                Box::new(io::stdin().lock())
            } else {
                let path = input.unwrap();
                Box::new(BufReader::new(File::open(&path).map_err(|e| io_error(&path, e))?))
            };
            let writer: Box<dyn io::Write> = if is_std(&output) {
                Box::new(BufWriter::new(io::stdout().lock()))
            } else {
                let path = output.unwrap();
                Box::new(BufWriter::new(File::create(&path).map_err(|e| io_error(&path, e))?))
            };
            score_stream(reader, writer, rho, &cfg.safety)?;
        }
        Command::Fit { trajectories, ratings } => {
            let out = run_fit(&trajectories, &ratings, &cfg, &out_dir)?;
            report(&out.warnings);
            eprintln!("fitted {} participants into {}", out.rows.len(), out_dir.join("fit.csv").display());
        }
        Command::Simulate { n_bys, n_cas } => {
            let mut spec = cfg.simulate.clone();
            spec.n_bys = n_bys.unwrap_or(spec.n_bys);
            spec.n_cas = n_cas.unwrap_or(spec.n_cas);
            let out = run_simulate(&spec, &cfg.safety, cfg.seed, &out_dir)?;
            eprintln!(
                "simulated {} participants ({} trajectory rows, {} rating rows) into {}",
                out.dataset.participants.len(),
                out.trajectory_rows,
                out.rating_rows,
                out_dir.display()
            );
        }
        Command::Analyze {
            fit,
            trajectories,
            ratings,
            truth,
        } => {
            let analysis = run_analyze(&fit, &trajectories, &ratings, truth.as_deref(), &cfg, &out_dir)?;
            report(&analysis.warnings);
            eprintln!("analyzed {} participants into {}", analysis.participants.len(), out_dir.display());
        }
        Command::Curves { rhos, v, step } => {
            let rhos = if rhos.is_empty() {
                cfg.curves.rhos.clone()
            } else {
                rhos.into_iter().map(Rho::new).collect::<Result<Vec<_>>>()?
            };
            let v = v.unwrap_or(cfg.curves.v);
            let step = step.unwrap_or(cfg.curves.step);
            run_curves(&rhos, v, &cfg.safety, step, &out_dir)?;
        }
    }
    Ok(())
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
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
