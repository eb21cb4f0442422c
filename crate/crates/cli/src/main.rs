mod artifacts;
mod config;
mod stages;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use dsec_core::model::Method;

use crate::artifacts::{Manifest, Run};
use crate::config::{Overrides, RunConfig};

/// Semi-supervised embedded clustering of patient cohorts.
///
/// Settings come from, in increasing precedence: built-in defaults, the run
/// directory's manifest (or `--config`), then flags. Log verbosity follows
/// `DSEC_LOG` (`error`, `warn`, `info`, `debug`, `trace`; default `info`).
#[derive(Debug, Parser)]
#[command(name = "dsec", version)]
struct Cli {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory holding every artifact.
    #[arg(long, global = true, default_value = "dsec-run")]
    out: PathBuf,
    /// Clusters in the clustering phase.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Levels of the Ward hierarchy analysed for enrichment.
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Dec,
    Dsec,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dec => Method::Dec,
            MethodArg::Dsec => Method::Dsec,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic admissions file with planted subgroups.
    Synth,
    /// Aggregate, filter, split and standardize the cohort.
    Preprocess,
    /// Train an encoder on the training split.
    Train {
        #[arg(long, value_enum)]
        method: MethodArg,
    },
    /// Write every patient's embedding.
    Embed {
        #[arg(long, value_enum, default_value = "dsec")]
        method: MethodArg,
    },
    /// Build the Ward hierarchy over an embedding.
    Cluster {
        #[arg(long, value_enum, default_value = "dsec")]
        method: MethodArg,
    },
    /// Diagnosis-code enrichment along the hierarchy.
    Enrich {
        #[arg(long, value_enum, default_value = "dsec")]
        method: MethodArg,
    },
    /// Held-out AUC of DSEC, DEC + forest and PCA + forest.
    Evaluate,
    /// Summarize a finished run; refuses artifacts from other configs.
    Report,
    /// Gradient checks and brute-force oracle suites.
    Selftest {
        /// Smaller instance counts.
        #[arg(long)]
        quick: bool,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => match Manifest::load(&cli.out)? {
            Some(m) => m.config,
            None => RunConfig::default(),
        },
    };
    config.apply(&Overrides {
        seed: cli.seed,
        k: cli.k,
        depth: cli.depth,
    });
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<()> {
    if let Command::Selftest { quick } = cli.command {
        return stages::selftest(cli.seed.unwrap_or(0), quick);
    }
    let config = resolve_config(&cli)?;
    let run = Run::new(cli.out.clone(), config);
    log::debug!("config fingerprint {}", run.fingerprint);
    match cli.command {
        Command::Synth => stages::synth(&run),
        Command::Preprocess => stages::preprocess(&run),
        Command::Train { method } => stages::train(&run, method.into()),
        Command::Embed { method } => stages::embed(&run, method.into()),
        Command::Cluster { method } => stages::cluster(&run, method.into()),
        Command::Enrich { method } => stages::enrich(&run, method.into()),
        Command::Evaluate => stages::evaluate(&run),
        Command::Report => stages::report(&run),
        Command::Selftest { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DSEC_LOG", "info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
