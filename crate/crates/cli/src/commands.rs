//! Subcommand implementations.
//!
//! Every command takes a resolved config plus the output directory, writes
//! its artifacts there, and finishes by dropping `resolved_config.toml`
//! beside them. Nothing here writes timestamps into artifacts, so reruns
//! with the same config are byte-identical (wall-clock columns aside).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use progrom::column::Column;
use progrom::datagen::{assemble_set, SnapshotSet};
use progrom::io;
use progrom::latent::fit_rbf;
use progrom::metrics::{evaluate, EvalReport};
use progrom::progressive::{attach_child, ProgressiveStack};
use progrom::train::{train_child, TrainReport};

use crate::config::{EvalConfig, GenerateConfig, Hyper, SweepConfig, TrainCmdConfig};

/// The pieces `fit_child` actually needs; both `train`/`chain` and each
/// sweep cell reduce to one of these.
struct FitSpec<'a> {
    latent_dim: usize,
    projector_dim: usize,
    init: progrom::progressive::InitMode,
    ridge: f64,
    seed: u64,
    train: &'a Hyper,
}

impl<'a> From<&'a TrainCmdConfig> for FitSpec<'a> {
    fn from(cfg: &'a TrainCmdConfig) -> Self {
        FitSpec {
            latent_dim: cfg.latent_dim,
            projector_dim: cfg.projector_dim,
            init: cfg.init,
            ridge: cfg.ridge,
            seed: cfg.seed,
            train: &cfg.train,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// The resolved config deliberately leaves `out` unset: it describes the
/// run, not where it landed, so reruns into different directories stay
/// byte-comparable.
fn write_resolved<T: serde::Serialize + Clone + HasOut>(out: &Path, cfg: &T) -> Result<()> {
    let mut resolved = cfg.clone();
    *resolved.out_mut() = None;
    let text = toml::to_string_pretty(&resolved).context("serializing resolved config")?;
    write_text(&out.join("resolved_config.toml"), &text)
}

/// Access to the one field every command config shares.
trait HasOut {
    fn out_mut(&mut self) -> &mut Option<std::path::PathBuf>;
}

macro_rules! has_out {
    ($($ty:ty),*) => {
        $(impl HasOut for $ty {
            fn out_mut(&mut self) -> &mut Option<std::path::PathBuf> {
                &mut self.out
            }
        })*
    };
}

has_out!(GenerateConfig, TrainCmdConfig, EvalConfig, SweepConfig);

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Sample a snapshot family and store it as a bundle under `out`.
pub fn generate(cfg: &GenerateConfig, out: &Path) -> Result<()> {
    let spec = cfg.overrides.resolve(cfg.problem);
    let set = assemble_set(&spec, cfg.m_train, cfg.m_test, cfg.seed)?;
    io::write_bundle(out, &set)?;
    write_resolved(out, cfg)?;
    let rows: usize = set.samples.iter().map(|s| s.fields.nrows()).sum();
    println!(
        "wrote bundle: {} samples ({} train, {} test), {} rows, dof {} -> {}",
        set.samples.len(),
        set.train_samples().count(),
        set.test_samples().count(),
        rows,
        set.dof(),
        out.display()
    );
    Ok(())
}

fn load_parent(dir: &Path) -> Result<Column> {
    let (mut stack, _) = io::read_stack(dir)?;
    let mut column = stack
        .columns
        .pop()
        .expect("a stored stack always holds at least one column");
    column.freeze();
    Ok(column)
}

fn load_parents(dirs: &[std::path::PathBuf]) -> Result<Vec<Column>> {
    dirs.iter()
        .map(|dir| load_parent(dir).with_context(|| format!("loading parent {}", dir.display())))
        .collect()
}

/// Train a child (with or without parents) on a bundle's training rows and
/// fit the latent interpolant over its training inputs.
fn fit_child(
    cfg: &FitSpec<'_>,
    set: &SnapshotSet,
    parents: Vec<Column>,
) -> Result<(ProgressiveStack, progrom::latent::RbfModel, TrainReport)> {
    let mut stack = attach_child(
        parents,
        set.dof(),
        cfg.latent_dim,
        cfg.projector_dim,
        cfg.seed,
        cfg.init,
    )?;
    let (rows, validation_rows) = set.train_matrix();
    let explicit = if validation_rows.is_empty() {
        None
    } else {
        Some(validation_rows.as_slice())
    };
    let tc = cfg.train.to_train_config(cfg.seed);
    let report = train_child(&mut stack, rows.view(), explicit, &tc)?;
    let latents = stack.encode(rows.view())?;
    let inputs = set.train_inputs();
    let rbf = fit_rbf(inputs.view(), latents.view(), cfg.ridge)?;
    Ok((stack, rbf, report))
}

fn losses_csv(report: &TrainReport) -> String {
    let mut text = String::from("epoch,train_ae,val_ae,train_bt,val_bt\n");
    for epoch in 0..report.train_ae.len() {
        writeln!(
            text,
            "{},{},{},{},{}",
            epoch + 1,
            report.train_ae[epoch],
            report.val_ae[epoch],
            report.train_twin[epoch],
            report.val_twin[epoch],
        )
        .expect("writing to a String cannot fail");
    }
    text
}

/// `train` and `chain` share this body; `train` has already rejected
/// configs that list parents.
pub fn train(cfg: &TrainCmdConfig, out: &Path) -> Result<()> {
    let set = io::read_bundle(&cfg.data)?;
    let parents = load_parents(&cfg.parents)?;
    let n_parents = parents.len();
    let (stack, rbf, report) = fit_child(&FitSpec::from(cfg), &set, parents)?;
    io::write_stack(&out.join("checkpoint"), &stack, Some(&rbf))?;
    write_text(&out.join("losses.csv"), &losses_csv(&report))?;
    write_json(&out.join("train_report.json"), &report)?;
    write_resolved(out, cfg)?;
    println!(
        "trained {} epochs on {} rows ({} parents); best val_ae {:e} at epoch {} -> {}",
        report.train_ae.len(),
        report.n_train,
        n_parents,
        report.best_val_ae,
        report.best_epoch,
        out.display()
    );
    Ok(())
}

fn per_mu_csv(report: &EvalReport) -> String {
    let dims = report.per_mu_mae.first().map_or(0, |p| p.mu.len());
    let mut text = String::new();
    for k in 0..dims {
        write!(text, "mu_{k},").expect("writing to a String cannot fail");
    }
    text.push_str("mae\n");
    for point in &report.per_mu_mae {
        for v in &point.mu {
            write!(text, "{v},").expect("writing to a String cannot fail");
        }
        writeln!(text, "{}", point.mae).expect("writing to a String cannot fail");
    }
    text
}

/// Evaluate a checkpoint on a bundle's test samples.
pub fn eval(cfg: &EvalConfig, out: &Path) -> Result<()> {
    let set = io::read_bundle(&cfg.data)?;
    let (stack, rbf) = io::read_stack(&cfg.checkpoint)?;
    let Some(rbf) = rbf else {
        bail!(
            "checkpoint {} has no latent interpolant; train it through this tool first",
            cfg.checkpoint.display()
        );
    };
    let report = evaluate(&stack, &rbf, &set)?;
    write_json(&out.join("eval.json"), &report)?;
    write_text(&out.join("eval_per_mu.csv"), &per_mu_csv(&report))?;
    write_resolved(out, cfg)?;
    println!(
        "evaluated {} test samples: avg_mae {:e}, std_mae {:e} -> {}",
        report.per_mu_mae.len(),
        report.avg_mae,
        report.std_mae,
        out.display()
    );
    Ok(())
}

/// Run the full (parent set x training size x seed) table and write one CSV
/// row per cell.
pub fn sweep(cfg: &SweepConfig, out: &Path) -> Result<()> {
    if cfg.m_values.is_empty() || cfg.seeds.is_empty() || cfg.parent_sets.is_empty() {
        bail!("sweep needs at least one entry in each of m_values, seeds, parent_sets");
    }
    let spec = cfg.overrides.resolve(cfg.problem);
    let mut sets = Vec::new();
    for &m in &cfg.m_values {
        sets.push(assemble_set(&spec, m, cfg.m_test, cfg.data_seed)?);
    }
    let pools: Vec<Vec<Column>> = cfg
        .parent_sets
        .iter()
        .map(|dirs| load_parents(dirs))
        .collect::<Result<_>>()?;

    let mut csv = String::from("parents,m,seed,avg_mae,std_mae,wall_s\n");
    for pool in &pools {
        for (set, &m) in sets.iter().zip(&cfg.m_values) {
            for &seed in &cfg.seeds {
                let started = Instant::now();
                let cell = FitSpec {
                    latent_dim: cfg.latent_dim,
                    projector_dim: cfg.projector_dim,
                    init: cfg.init,
                    ridge: cfg.ridge,
                    seed,
                    train: &cfg.train,
                };
                let (stack, rbf, _) = fit_child(&cell, set, pool.clone())?;
                let report = evaluate(&stack, &rbf, set)?;
                let wall = started.elapsed().as_secs_f64();
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    pool.len(),
                    m,
                    seed,
                    report.avg_mae,
                    report.std_mae,
                    wall
                )
                .expect("writing to a String cannot fail");
                println!(
                    "cell parents={} m={} seed={}: avg_mae {:e} ({:.1}s)",
                    pool.len(),
                    m,
                    seed,
                    report.avg_mae,
                    wall
                );
            }
        }
    }
    write_text(&out.join("sweep.csv"), &csv)?;
    write_resolved(out, cfg)?;
    println!(
        "wrote {} sweep rows -> {}",
        cfg.parent_sets.len() * cfg.m_values.len() * cfg.seeds.len(),
        out.display()
    );
    Ok(())
}

/// Parameter counts of a stored checkpoint as pretty JSON.
pub fn inspect(ckpt: &Path) -> Result<String> {
    let (stack, _) = io::read_stack(ckpt)?;
    let counts = stack.count_parameters();
    serde_json::to_string_pretty(&counts).context("serializing parameter counts")
}
