use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use qcombo_core::algorithms::Algorithm;
use qcombo_core::harness::{self, mean_of, Controller, ExperimentConfig, MetricRecord, ReferencePolicy};
use qcombo_core::neural::Checkpoint;

#[derive(Parser)]
#[command(name = "qcombo", version, about = "Cooperative multi-agent traffic-signal control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learner over the configured schedule.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algo: Option<Algorithm>,
        /// Recurrent local networks.
        #[arg(long)]
        rnn: bool,
        /// Overrides `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a checkpoint's frozen policy over the evaluation schedule.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a checkpoint's local policy on another grid.
    Transfer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        target_config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a checkpoint over a multi-period test flow program.
    Generalize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the static or random reference policy.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: ReferencePolicy,
        /// Execute the whole flow program instead of the train/eval schedule.
        #[arg(long)]
        program: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per regularization weight.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rnn: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    if let Some(out) = out {
        config.run.output_dir = out;
    }
    Ok(config)
}

fn summarize(label: &str, records: &[MetricRecord]) {
    if records.is_empty() {
        println!("{label}: no records");
        return;
    }
    println!(
        "{label}: global reward {:.3}, queue {:.3}, wait {:.4} min, delay {:.3} ({} records)",
        mean_of(records, |r| r.global_reward),
        mean_of(records, |r| r.mean_queue),
        mean_of(records, |r| r.mean_wait),
        mean_of(records, |r| r.mean_delay),
        records.len()
    );
}

fn summarize_segments(records: &[MetricRecord]) {
    let mut segments: Vec<usize> = records.iter().map(|r| r.segment).collect();
    segments.dedup();
    for s in segments {
        let seg: Vec<MetricRecord> = records.iter().filter(|r| r.segment == s).cloned().collect();
        summarize(&format!("period {s}"), &seg);
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { config, seed, algo, rnn, out } => {
            let mut config = load(&config, seed, out)?;
            if let Some(algo) = algo {
                config.learner.algorithm = algo;
            }
            config.learner.rnn |= rnn;
            config.validate()?;
            let dir = config.run.output_dir.clone();
            let outcome = harness::run_training(&config, Some(&dir))?;
            summarize("final cycle", &outcome.final_cycle());
            println!("outputs in {}", dir.display());
        }
        Command::Eval { checkpoint, config, seed, out } => {
            let config = load(&config, seed, out)?;
            let ck = Checkpoint::load(&checkpoint).context("loading checkpoint")?;
            let records = harness::run_evaluation(&config, &ck, Some(&config.run.output_dir))?;
            summarize("final cycle", &harness::final_cycle(&records));
        }
        Command::Transfer { checkpoint, target_config, seed, out } => {
            let config = load(&target_config, seed, out)?;
            let ck = Checkpoint::load(&checkpoint).context("loading checkpoint")?;
            let records = harness::run_transfer(&config, &ck, Some(&config.run.output_dir))?;
            summarize("transfer", &records);
        }
        Command::Generalize { checkpoint, config, seed, out } => {
            let config = load(&config, seed, out)?;
            let ck = Checkpoint::load(&checkpoint).context("loading checkpoint")?;
            let records = harness::run_generalization(&config, &ck, Some(&config.run.output_dir))?;
            summarize_segments(&records);
        }
        Command::Reference { config, policy, program, seed, out } => {
            let config = load(&config, seed, out)?;
            let dir = config.run.output_dir.clone();
            if program {
                let records = harness::run_program(&config, Controller::Reference(policy), Some(&dir), "reference --program")?;
                summarize_segments(&records);
            } else {
                let records = harness::run_reference(&config, policy, Some(&dir))?;
                summarize("final cycle", &harness::final_cycle(&records));
            }
        }
        Command::Sweep { lambda, config, seed, rnn, out } => {
            let base = load(&config, seed, out)?;
            if base.learner.algorithm != Algorithm::Qcombo {
                bail!("a lambda sweep needs algorithm = \"qcombo\", config has {}", base.learner.algorithm);
            }
            for l in lambda {
                let mut config = base.clone();
                config.learner.lambda = l;
                config.learner.rnn |= rnn;
                config.run.output_dir = harness::sweep_dir(&base.run.output_dir, l);
                config.validate()?;
                let outcome = harness::run_training(&config, Some(&config.run.output_dir))?;
                summarize(&format!("lambda {l}"), &outcome.final_cycle());
            }
        }
    }
    Ok(())
}
