use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qcl::harness::{
    resolve, run_batch, run_eigen_relation, run_single, run_straight_search, EigenSource,
    ExperimentConfig,
};
use qcl::system::PresetTag;

#[derive(Parser)]
#[command(
    name = "qcl",
    version,
    about = "Quantum control landscape exploration: gradient flows, trajectory \
             linearity, saddle distances, and the Hessian-gradient eigen-relation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON). Omitted = built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = automatic; QCL_WORKERS also applies).
    #[arg(long)]
    workers: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> qcl::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.batch.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(workers) = self.workers {
            config.batch.workers = workers;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch of landscape climbs and emit R statistics.
    Batch {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one fully recorded climb (optionally with the saddle-distance scan).
    Single {
        #[command(flatten)]
        common: CommonArgs,
        /// Run seed; defaults to the master seed.
        #[arg(long)]
        run_seed: Option<u64>,
    },
    /// Scan the Hessian-gradient eigen-relation along one climb.
    Eigen {
        #[command(flatten)]
        common: CommonArgs,
        /// Start from a stored field (CSV row) instead of a seeded draw.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Evolution-strategy search for an initial field with minimal R.
    Search {
        #[command(flatten)]
        common: CommonArgs,
        /// Candidate evaluations to spend; defaults to the config budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// List the built-in system presets.
    Presets,
    /// Check a configuration (and its system) for problems.
    ValidateConfig {
        #[command(flatten)]
        common: CommonArgs,
        /// Print the built-in defaults as JSON and exit.
        #[arg(long)]
        print_defaults: bool,
    },
}

fn run() -> qcl::Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Batch { common } => {
            let config = common.load()?;
            let report = run_batch(&config)?;
            println!(
                "batch: {} runs, mean R = {:.4}, manifest {}",
                report.records.len(),
                report.mean_r,
                report.manifest_path.display()
            );
        }
        Command::Single { common, run_seed } => {
            let config = common.load()?;
            let seed = run_seed.unwrap_or(config.batch.master_seed);
            let report = run_single(&config, seed)?;
            println!(
                "single: seed {}, R = {:.6}, {} steps, manifest {}",
                report.record.seed,
                report.record.r_value,
                report.record.n_steps,
                report.manifest_path.display()
            );
        }
        Command::Eigen { common, field } => {
            let config = common.load()?;
            let source = match field {
                Some(path) => EigenSource::FieldFile(path),
                None => EigenSource::Seed(config.batch.master_seed),
            };
            let report = run_eigen_relation(&config, source)?;
            println!(
                "eigen: R = {:.6}, {} scanned samples, manifest {}",
                report.r_value,
                report.samples.len(),
                report.manifest_path.display()
            );
        }
        Command::Search { common, budget } => {
            let config = common.load()?;
            let budget = budget.unwrap_or(config.search.budget);
            let report = run_straight_search(&config, budget)?;
            println!(
                "search: best R = {:.6} (search-tolerance {:.6}) after {} evaluations, manifest {}",
                report.outcome.best_r,
                report.outcome.best_r_search,
                report.outcome.evaluations,
                report.manifest_path.display()
            );
        }
        Command::Presets => {
            println!("{:<18} {:>2}  modes  description", "tag", "N");
            for tag in PresetTag::ALL {
                println!(
                    "{:<18} {:>2}  {:>5}  {}",
                    tag.name(),
                    tag.n_levels(),
                    tag.default_modes(),
                    tag.describe()
                );
            }
        }
        Command::ValidateConfig {
            common,
            print_defaults,
        } => {
            if print_defaults {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&ExperimentConfig::default())
                        .expect("serializable defaults")
                );
                return Ok(0);
            }
            let config = common.load()?;
            match resolve(&config) {
                Ok(resolved) => {
                    println!(
                        "ok: {} levels, grid {} x {} points, modes {}",
                        resolved.system.n_levels,
                        resolved.grid.horizon,
                        resolved.grid.n_points,
                        resolved.modes
                    );
                }
                Err(e) => {
                    eprintln!("invalid: {e}");
                    return Ok(1);
                }
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    // LAPACK calls here are all small or one-shot; OpenBLAS threading only
    // adds contention on top of the worker pool.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
