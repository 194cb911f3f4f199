// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qerc_cli::config::{Experiment, ExperimentConfig, DATA_DIR_ENV};
use qerc_cli::experiments::Runner;
use qerc_core::linalg::RandomSeed;
use qerc_core::reservoir::ModelKind;

#[derive(Parser)]
#[command(
    name = "qerc",
    version,
    about = "Quantum extreme reservoir computation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file; flags override it.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Weight distributions of the DTC generator at several periods.
    Weights {
        #[arg(long, value_delimiter = ',')]
        periods: Option<Vec<u64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Weight distributions of a random model next to the DTC.
    Compare {
        #[arg(long, value_enum, default_value_t = CompareKind::Haar)]
        against: CompareKind,
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy of every model (one realization each).
    Table {
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy of the DTC against the number of periods.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        periods: Option<Vec<u64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Realization-averaged weights and accuracy of a random model.
    Ensemble {
        #[arg(long)]
        realizations: Option<usize>,
        /// Skip training; only the weight distributions.
        #[arg(long)]
        weights_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train one model once.
    Train {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CompareKind {
    Haar,
    Cauchy,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding the four MNIST IDX files.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    /// Where the encoded dataset is cached.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ModelKind>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    n_periods: Option<u64>,
    /// Seed of the random model.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_seed: Option<u64>,
    /// Sample this many shots per image instead of exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.data_dir {
            cfg.data_dir = Some(v.clone());
        }
        if let Some(v) = &self.cache_dir {
            cfg.cache_dir = Some(v.clone());
        }
        if let Some(v) = self.kind {
            cfg.model.kind = v;
        }
        if let Some(v) = self.qubits {
            cfg.model.qubits = v;
        }
        if let Some(v) = self.n_periods {
            cfg.model.n_periods = v;
        }
        if let Some(v) = self.seed {
            cfg.model.seed = RandomSeed(v);
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
            if cfg.train.window.1 > v {
                cfg.train.window = (v.saturating_sub(50).max(1), v);
            }
        }
        if let Some(v) = self.lr {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.train_seed {
            cfg.train.seed = RandomSeed(v);
        }
        if self.shots.is_some() {
            cfg.shots = self.shots;
        }
    }
}

fn build(command: Command) -> Result<(ExperimentConfig, bool)> {
    let (mut cfg, common) = match command {
        Command::Run { config, common } => (ExperimentConfig::load(&config)?, common),
        Command::Weights { periods, common } => {
            let mut cfg = ExperimentConfig::new(Experiment::Weights);
            cfg.periods = periods;
            (cfg, common)
        }
        Command::Compare { against, common } => {
            let exp = match against {
                CompareKind::Haar => Experiment::HaarCompare,
                CompareKind::Cauchy => Experiment::CauchyCompare,
            };
            (ExperimentConfig::new(exp), common)
        }
        Command::Table { models, common } => {
            let mut cfg = ExperimentConfig::new(Experiment::ModelTable);
            cfg.models = models;
            (cfg, common)
        }
        Command::Sweep { periods, common } => {
            let mut cfg = ExperimentConfig::new(Experiment::AccuracyVsPeriod);
            cfg.periods = periods;
            (cfg, common)
        }
        Command::Ensemble {
            realizations,
            weights_only,
            common,
        } => {
            let mut cfg = ExperimentConfig::new(Experiment::Ensemble);
            cfg.model.kind = ModelKind::Haar;
            if let Some(r) = realizations {
                cfg.realizations = r;
            }
            cfg.weights_only = weights_only;
            (cfg, common)
        }
        Command::Train { common } => (ExperimentConfig::new(Experiment::Train), common),
    };
    common.apply(&mut cfg);
    if cfg.experiment == Experiment::Train && cfg.periods.is_some() {
        bail!("train takes --n-periods, not a period list");
    }
    Ok((cfg, !common.quiet))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(cli.command).and_then(|(cfg, verbose)| {
        let mut runner = Runner::new(verbose);
        runner.run(&cfg)?;
        if verbose {
            eprintln!(
                "[qerc] wrote {}",
                cfg.output_dir.join("manifest.json").display()
            );
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
