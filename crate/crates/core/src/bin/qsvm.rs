use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qsvm::data_pipeline::{exclude_missing, generate_synthetic, load_dataset_csv, SyntheticSpec};
use qsvm::experiment_runner::{rank_dataset, run_experiment_matrix, write_run_outputs, ExperimentConfig};
use qsvm::DatasetF64;

#[derive(Parser)]
#[command(name = "qsvm", version, about = "Quantum-kernel SVM experiments on tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank features by ridge coefficient magnitude and split them into groups.
    Rank {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        groups: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Subsampled refits for the stability intersection.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-group common features across repetitions.
        #[arg(long)]
        stability_out: Option<PathBuf>,
    },
    /// Execute an experiment matrix from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fit preprocessing once on all samples instead of per fold.
        #[arg(long)]
        global_preprocess: bool,
    },
    /// Write a seeded synthetic two-class dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        features: usize,
        #[arg(long)]
        informative: usize,
        #[arg(long)]
        sep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> qsvm::Result<()> {
    match cli.command {
        Command::Rank {
            data,
            groups,
            lambda,
            reps,
            seed,
            out,
            stability_out,
        } => {
            let dataset: DatasetF64 = exclude_missing(&load_dataset_csv(&data)?)?;
            let report = rank_dataset(&dataset, lambda, groups, reps, seed)?;
            report.write_csv(BufWriter::new(File::create(&out)?))?;
            if let Some(path) = stability_out {
                report.write_stability_csv(BufWriter::new(File::create(path)?))?;
            }
            eprintln!(
                "ranked {} features into {} groups -> {}",
                report.feature_names.len(),
                groups,
                out.display()
            );
        }
        Command::Run {
            config,
            out,
            global_preprocess,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.global_preprocess |= global_preprocess;
            let manifest = run_experiment_matrix(&cfg)?;
            write_run_outputs(&manifest, &out)?;
            eprintln!(
                "{} conditions ({} failed) in {:.1}s -> {}",
                manifest.total_conditions,
                manifest.failed_conditions,
                manifest.total_seconds,
                out.display()
            );
        }
        Command::Synth {
            n,
            features,
            informative,
            sep,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                n_samples: n,
                n_features: features,
                n_informative: informative,
                class_sep: sep,
                seed,
            };
            let dataset: DatasetF64 = generate_synthetic(&spec)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            dataset.save_csv(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
