//! Command-line workflow: simulate, preprocess, train, evaluate, gait,
//! medstate, stats and report. Every command writes a `manifest.json` next
//! to its outputs.

mod commands;
pub mod manifest;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::protocol::{Protocol, Variant};
use crate::medstate::FeatureSource;

pub use commands::Context;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MDCSA_OUT";
pub const DEFAULT_OUT_ROOT: &str = "runs";

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "mdcsa", version, about = "Room-level localisation and in-home gait analysis on synthetic smart-home cohorts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every random stream of the command derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: $MDCSA_OUT/<command>].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override one config key, e.g. `--set eval.train.grid.d=[32]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    Protocol::parse(s).map_err(|e| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

fn parse_source(s: &str) -> std::result::Result<FeatureSource, String> {
    FeatureSource::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort.
    Simulate {
        #[arg(long)]
        pairs: Option<u32>,
        #[arg(long)]
        days: Option<u32>,
        /// Also write annotated-session sensor streams.
        #[arg(long)]
        streams: bool,
    },
    /// Cut a cohort's annotated sessions into 5 s sensor windows.
    Preprocess {
        /// Cohort directory written by `simulate`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Train and test every fold of a cross-validation protocol.
    Train {
        /// Directory written by `preprocess`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_protocol)]
        protocol: Protocol,
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
    },
    /// Re-score the saved fold models of a `train` run.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Extract room transitions and gait features.
    Gait {
        /// Cohort directory written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// `train` run whose model decodes rooms; ground truth when absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Classify medication state with leave-one-participant-out folds.
    Medstate {
        /// Directory written by `gait`.
        #[arg(long)]
        input: PathBuf,
        /// gait-from-truth, gait-from-model, demographic or demographic-no-leak
        /// [default: the features the gait run wrote]
        #[arg(long, value_parser = parse_source)]
        source: Option<FeatureSource>,
    },
    /// Friedman, Holm-corrected pairwise Wilcoxon and rank cliques across variants.
    Stats {
        /// `train` run directories sharing a protocol.
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
    },
    /// Combined tables from any set of run directories.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Preprocess { .. } => "preprocess",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Gait { .. } => "gait",
            Command::Medstate { .. } => "medstate",
            Command::Stats { .. } => "stats",
            Command::Report { .. } => "report",
        }
    }

    fn default_out(&self) -> String {
        match self {
            Command::Train { protocol, variant, .. } => format!("train-{}-{}", protocol.name(), variant.name()),
            c => c.name().to_string(),
        }
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::Config(_))
}

/// Runs one command; the caller owns the process exit.
pub fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(j) = g.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let mut cfg = RunConfig::load(g.config.as_deref(), &g.overrides)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let out = match &g.out {
        Some(o) => o.clone(),
        None => {
            let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUT_ROOT.into());
            root.join(cli.command.default_out())
        }
    };
    let ctx = Context::new(cfg, g.config.clone(), out)?;
    match cli.command {
        Command::Simulate { pairs, days, streams } => ctx.simulate(pairs, days, streams),
        Command::Preprocess { input } => ctx.preprocess(&input),
        Command::Train { input, protocol, variant } => ctx.train(&input, protocol, variant),
        Command::Evaluate { input } => ctx.evaluate(&input),
        Command::Gait { input, model } => ctx.gait(&input, model.as_deref()),
        Command::Medstate { input, source } => ctx.medstate(&input, source),
        Command::Stats { input } => ctx.stats(&input),
        Command::Report { input } => ctx.report(&input),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_RUNTIME })
        }
    }
}
