//! `progrom` — generate snapshot bundles, train standalone or chained
//! surrogate models, evaluate checkpoints, and sweep the comparison table.
//!
//! Flags override config keys; the resolved config the run actually used is
//! written beside its outputs. Failures print one JSON object to stderr and
//! exit nonzero.

mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use config::{EvalConfig, GenerateConfig, SweepConfig, TrainCmdConfig};

#[derive(Parser)]
#[command(
    name = "progrom",
    version,
    about = "Progressive twin-view autoencoder surrogates for parametric field data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic snapshot family into a bundle directory.
    Generate(CommonArgs),
    /// Train a standalone model on a bundle (no parents).
    Train(CommonArgs),
    /// Train a child model with lateral transfer from frozen checkpoints.
    Chain(CommonArgs),
    /// Evaluate a checkpoint on a bundle's held-out test samples.
    Eval(CommonArgs),
    /// Run the (parent set x training size x seed) comparison table.
    Sweep(CommonArgs),
    /// Print parameter counts of a checkpoint as JSON.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Only 1 keeps runs bit-reproducible, and execution is
    /// currently sequential regardless.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint directory to inspect.
    #[arg(long)]
    ckpt: PathBuf,
    /// Also write the JSON report into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (accepted for uniformity; inspect is single-pass).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .downcast_ref::<progrom::Error>()
                .map_or("cli", error_kind);
            let payload = serde_json::json!({
                "error": kind,
                "message": format!("{err:#}"),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn error_kind(err: &progrom::Error) -> &'static str {
    use progrom::Error;
    match err {
        Error::ShapeMismatch { .. } => "shape_mismatch",
        Error::NonFinite(_) => "non_finite",
        Error::MissingForwardCache(_) => "missing_forward_cache",
        Error::BatchTooSmall { .. } => "batch_too_small",
        Error::DofTooSmall { .. } => "dof_too_small",
        Error::FrozenColumn(_) => "frozen_column",
        Error::EmptyTrainingSet(_) => "empty_training_set",
        Error::InvalidConfig(_) => "invalid_config",
        Error::SingularSystem { .. } => "singular_system",
        Error::DigestMismatch { .. } => "digest_mismatch",
        Error::BadFormat { .. } => "bad_format",
        Error::Io { .. } => "io",
        Error::Json { .. } => "json",
    }
}

fn check_threads(threads: usize) -> anyhow::Result<()> {
    if threads == 0 {
        bail!("--threads must be at least 1");
    }
    Ok(())
}

/// Pick the output directory (flag wins over config), create it, and record
/// the choice back into the config so the resolved file shows it.
fn resolve_out(flag: Option<PathBuf>, cfg_out: &mut Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let out = flag
        .or_else(|| cfg_out.clone())
        .context("no output directory: pass --out or set `out` in the config")?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    *cfg_out = Some(out.clone());
    Ok(out)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => {
            check_threads(args.threads)?;
            let mut cfg: GenerateConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let spec = cfg.overrides.resolve(cfg.problem);
            cfg.overrides = config::ProblemPatch::from_spec(&spec);
            let out = resolve_out(args.out, &mut cfg.out)?;
            commands::generate(&cfg, &out)
        }
        Command::Train(args) => {
            check_threads(args.threads)?;
            let mut cfg: TrainCmdConfig = config::load_toml(&args.config)?;
            if !cfg.parents.is_empty() {
                bail!(
                    "`train` builds a standalone model but the config lists {} parents; use `chain`",
                    cfg.parents.len()
                );
            }
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let out = resolve_out(args.out, &mut cfg.out)?;
            commands::train(&cfg, &out)
        }
        Command::Chain(args) => {
            check_threads(args.threads)?;
            let mut cfg: TrainCmdConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let out = resolve_out(args.out, &mut cfg.out)?;
            commands::train(&cfg, &out)
        }
        Command::Eval(args) => {
            check_threads(args.threads)?;
            if args.seed.is_some() {
                bail!("`eval` is deterministic and takes no --seed");
            }
            let mut cfg: EvalConfig = config::load_toml(&args.config)?;
            let out = resolve_out(args.out, &mut cfg.out)?;
            commands::eval(&cfg, &out)
        }
        Command::Sweep(args) => {
            check_threads(args.threads)?;
            let mut cfg: SweepConfig = config::load_toml(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.data_seed = seed;
            }
            let spec = cfg.overrides.resolve(cfg.problem);
            cfg.overrides = config::ProblemPatch::from_spec(&spec);
            let out = resolve_out(args.out, &mut cfg.out)?;
            commands::sweep(&cfg, &out)
        }
        Command::Inspect(args) => {
            check_threads(args.threads)?;
            let report = commands::inspect(&args.ckpt)?;
            println!("{report}");
            if let Some(dir) = args.out {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("params.json");
                fs::write(&path, format!("{report}\n"))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
    }
}
