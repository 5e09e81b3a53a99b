//! Two-phase training loop for a (possibly gated) column.
//!
//! Each epoch walks the shuffled training rows in outer batches. Every outer
//! batch first takes one twin-view step — both augmented views go through
//! the encoder and projector, and the redundancy-reduction loss updates
//! encoder + projector — and then a full pass of inner batches updates
//! encoder + decoder on the *original* (non-augmented) rows under plain
//! reconstruction loss. The two phases use separate Adam states and separate
//! cosine learning-rate schedules.
//!
//! Validation rows are held out before the first epoch; the best child
//! (by validation reconstruction loss) is restored at the end.

use std::time::Instant;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::augment::{augment, BlurMode};
use crate::column::{Column, Component, MinMaxScaler};
use crate::error::{Error, Result};
use crate::loss::{
    reconstruction_loss, reconstruction_loss_with_grad, twin_loss, twin_loss_with_grads,
    DEFAULT_LAMBDA,
};
use crate::net::{AdamState, DenseLayer, LrSchedule, SeededRng};
use crate::progressive::{solo_stack, ProgressiveStack};

/// Knobs for one training run. `Default` gives the reference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Twin-view batch size (outer loop).
    pub batch_outer: usize,
    /// Reconstruction batch size (inner loop).
    pub batch_inner: usize,
    /// Off-diagonal weight of the twin-view loss.
    pub lambda: f64,
    /// Noise amplitude as a fraction of each row's standard deviation.
    pub noise_eps: f64,
    pub blur: BlurMode,
    pub eta_min: f64,
    pub eta_max: f64,
    /// Fraction of rows held out when no explicit validation rows are given.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_outer: 32,
            batch_inner: 32,
            lambda: DEFAULT_LAMBDA,
            noise_eps: 0.1,
            blur: BlurMode::PointwisePdf,
            eta_min: 1e-16,
            eta_max: 1e-5,
            validation_fraction: 0.05,
            seed: 0,
        }
    }
}

/// Per-epoch loss series plus the checkpoint that was kept.
/// `best_epoch` is 1-based; 0 means no epoch ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_ae: Vec<f64>,
    pub val_ae: Vec<f64>,
    pub train_twin: Vec<f64>,
    pub val_twin: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_ae: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub wall_seconds: f64,
}

impl TrainReport {
    fn empty(n_train: usize, n_val: usize) -> Self {
        TrainReport {
            train_ae: Vec::new(),
            val_ae: Vec::new(),
            train_twin: Vec::new(),
            val_twin: Vec::new(),
            best_epoch: 0,
            best_val_ae: f64::INFINITY,
            n_train,
            n_val,
            wall_seconds: 0.0,
        }
    }
}

fn validate_config(cfg: &TrainConfig) -> Result<()> {
    if cfg.batch_outer == 0 || cfg.batch_inner == 0 {
        return Err(Error::InvalidConfig("batch sizes must be positive".into()));
    }
    if !cfg.lambda.is_finite() || cfg.lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
    }
    if !cfg.noise_eps.is_finite() || cfg.noise_eps < 0.0 {
        return Err(Error::InvalidConfig("noise_eps must be finite and >= 0".into()));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::InvalidConfig(
            "validation_fraction must lie in [0, 1)".into(),
        ));
    }
    Ok(())
}

/// Split row indices into train and validation sets. Explicit validation
/// rows win; otherwise a seeded shuffle holds out `validation_fraction`
/// (at least one row).
fn split_rows(
    n_all: usize,
    validation_rows: Option<&[usize]>,
    cfg: &TrainConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_all < 2 {
        return Err(Error::EmptyTrainingSet(format!(
            "need at least 2 rows to split train/validation, got {n_all}"
        )));
    }
    let val_idx: Vec<usize> = match validation_rows {
        Some(rows) => {
            if rows.is_empty() {
                return Err(Error::InvalidConfig(
                    "explicit validation row list must be non-empty".into(),
                ));
            }
            let mut sorted = rows.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != rows.len() {
                return Err(Error::InvalidConfig("duplicate validation rows".into()));
            }
            if *sorted.last().unwrap() >= n_all {
                return Err(Error::InvalidConfig(format!(
                    "validation row {} out of range for {n_all} rows",
                    sorted.last().unwrap()
                )));
            }
            sorted
        }
        None => {
            let n_val = ((n_all as f64 * cfg.validation_fraction).floor() as usize).max(1);
            let mut order: Vec<usize> = (0..n_all).collect();
            let mut rng = SeededRng::substream(cfg.seed, 0x0030_0000);
            rng.shuffle(&mut order);
            let mut val: Vec<usize> = order[..n_val].to_vec();
            val.sort_unstable();
            val
        }
    };
    if val_idx.len() >= n_all {
        return Err(Error::EmptyTrainingSet(
            "validation set leaves no training rows".into(),
        ));
    }
    let mut is_val = vec![false; n_all];
    for &i in &val_idx {
        is_val[i] = true;
    }
    let train_idx: Vec<usize> = (0..n_all).filter(|&i| !is_val[i]).collect();
    Ok((train_idx, val_idx))
}

fn gather_rows(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), src.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&src.row(i));
    }
    out
}

/// Snapshot of everything a training run can change.
struct BestState {
    components: Vec<Vec<DenseLayer>>,
    gate_rows: Vec<Vec<Vec<DenseLayer>>>,
}

impl BestState {
    fn capture(stack: &ProgressiveStack) -> Self {
        BestState {
            components: Component::ALL
                .iter()
                .map(|&c| stack.child().layers(c).to_vec())
                .collect(),
            gate_rows: Component::ALL
                .iter()
                .map(|&c| stack.gates(c).rows.clone())
                .collect(),
        }
    }

    fn restore(self, stack: &mut ProgressiveStack) {
        for (ci, component) in Component::ALL.into_iter().enumerate() {
            *stack.child_mut().layers_mut(component) = self.components[ci].clone();
            stack.gates_mut(component).rows = self.gate_rows[ci].clone();
        }
    }
}

/// Train the child of `stack` on raw snapshot rows (one field per row).
/// Parents stay untouched by construction; gates and child weights move.
pub fn train_child(
    stack: &mut ProgressiveStack,
    rows: ArrayView2<f64>,
    validation_rows: Option<&[usize]>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let start = Instant::now();
    validate_config(cfg)?;
    if stack.child().frozen {
        return Err(Error::FrozenColumn(
            "cannot train a frozen column".into(),
        ));
    }
    if rows.ncols() != stack.child().arch.dof {
        return Err(Error::shape(
            "training rows",
            format!("{} columns", stack.child().arch.dof),
            format!("{}", rows.ncols()),
        ));
    }
    let n_all = rows.nrows();
    let (train_idx, val_idx) = split_rows(n_all, validation_rows, cfg)?;
    let n_train = train_idx.len();
    let n_val = val_idx.len();
    if cfg.epochs == 0 {
        return Ok(TrainReport::empty(n_train, n_val));
    }

    // The scaler is fitted over the full set once, before any epoch.
    stack.child_mut().scaler = MinMaxScaler::fit(rows.iter().copied());
    let scaled = stack.child().scaler.scale_array(&rows);

    // Both augmented views are drawn once, up front, over all rows.
    let (view_a, view_b) = augment(scaled.view(), cfg.noise_eps, cfg.seed, cfg.blur);

    // Batch counts are fixed by the index counts, not the shuffle, so the
    // schedules can be sized exactly.
    let n_outer = n_train.div_ceil(cfg.batch_outer);
    let n_inner = n_train.div_ceil(cfg.batch_inner);
    let twin_batches_per_epoch = (0..n_outer)
        .filter(|&b| {
            let size = if b + 1 == n_outer {
                n_train - b * cfg.batch_outer
            } else {
                cfg.batch_outer
            };
            size >= 2
        })
        .count();

    let twin_schedule = if twin_batches_per_epoch > 0 {
        Some(LrSchedule::new(
            cfg.eta_min,
            cfg.eta_max,
            (cfg.epochs * twin_batches_per_epoch) as u64,
        )?)
    } else {
        None
    };
    let ae_schedule = LrSchedule::new(cfg.eta_min, cfg.eta_max, (cfg.epochs * n_outer * n_inner) as u64)?;
    let mut twin_adam = AdamState::default();
    let mut ae_adam = AdamState::default();
    let mut twin_step: u64 = 0;
    let mut ae_step: u64 = 0;

    let val_scaled = gather_rows(&scaled, &val_idx);
    let val_a = gather_rows(&view_a, &val_idx);
    let val_b = gather_rows(&view_b, &val_idx);

    let mut report = TrainReport::empty(n_train, n_val);
    let mut best: Option<BestState> = None;

    for epoch in 1..=cfg.epochs {
        let mut outer_order = train_idx.clone();
        let mut outer_rng = SeededRng::substream(cfg.seed, 0x0010_0000 + epoch as u64);
        outer_rng.shuffle(&mut outer_order);
        let mut inner_order = train_idx.clone();
        let mut inner_rng = SeededRng::substream(cfg.seed, 0x0020_0000 + epoch as u64);
        inner_rng.shuffle(&mut inner_order);

        let mut twin_sum = 0.0;
        let mut twin_count = 0usize;
        let mut ae_sum = 0.0;
        let mut ae_count = 0usize;

        for outer in outer_order.chunks(cfg.batch_outer) {
            if outer.len() >= 2 {
                let schedule = twin_schedule.as_ref().expect("eligible batches imply a schedule");
                let xa = gather_rows(&view_a, outer);
                let xb = gather_rows(&view_b, outer);
                let mut cat = Array2::zeros((2 * outer.len(), xa.ncols()));
                cat.slice_mut(s![..outer.len(), ..]).assign(&xa);
                cat.slice_mut(s![outer.len().., ..]).assign(&xb);

                let (z_cat, enc_trace) = stack.forward_component_train(Component::Encoder, cat.view());
                let (p_cat, proj_trace) = stack.forward_component_train(Component::Projector, z_cat.view());
                let pa = p_cat.slice(s![..outer.len(), ..]).to_owned();
                let pb = p_cat.slice(s![outer.len().., ..]).to_owned();
                let back = twin_loss_with_grads(pa.view(), pb.view(), cfg.lambda)?;

                let mut upstream = Array2::zeros(p_cat.dim());
                upstream.slice_mut(s![..outer.len(), ..]).assign(&back.grad_a);
                upstream.slice_mut(s![outer.len().., ..]).assign(&back.grad_b);
                let (z_grad, proj_grads) =
                    stack.backward_component(Component::Projector, &upstream, proj_trace)?;
                let (_, enc_grads) = stack.backward_component(Component::Encoder, &z_grad, enc_trace)?;

                let lr = schedule.lr_at(twin_step)?;
                let mut grads: Vec<&[f64]> = enc_grads.flat_slices();
                grads.extend(proj_grads.flat_slices());
                let mut params = stack.param_slices_mut(&[Component::Encoder, Component::Projector]);
                twin_adam.step(lr, &mut params, &grads)?;
                twin_step += 1;

                twin_sum += back.loss;
                twin_count += 1;
            }

            for inner in inner_order.chunks(cfg.batch_inner) {
                let x = gather_rows(&scaled, inner);
                let (z, enc_trace) = stack.forward_component_train(Component::Encoder, x.view());
                let (xh, dec_trace) = stack.forward_component_train(Component::Decoder, z.view());
                let (loss, out_grad) = reconstruction_loss_with_grad(xh.view(), x.view())?;
                let (z_grad, dec_grads) =
                    stack.backward_component(Component::Decoder, &out_grad, dec_trace)?;
                let (_, enc_grads) = stack.backward_component(Component::Encoder, &z_grad, enc_trace)?;

                let lr = ae_schedule.lr_at(ae_step)?;
                let mut grads: Vec<&[f64]> = enc_grads.flat_slices();
                grads.extend(dec_grads.flat_slices());
                let mut params = stack.param_slices_mut(&[Component::Encoder, Component::Decoder]);
                ae_adam.step(lr, &mut params, &grads)?;
                ae_step += 1;

                ae_sum += loss;
                ae_count += 1;
            }
        }

        report.train_twin.push(if twin_count > 0 {
            twin_sum / twin_count as f64
        } else {
            f64::NAN
        });
        report.train_ae.push(ae_sum / ae_count as f64);

        // Validation pass, read-only.
        let z_val = stack
            .forward_component(Component::Encoder, val_scaled.view())?
            .output()
            .clone();
        let xh_val = stack
            .forward_component(Component::Decoder, z_val.view())?
            .output()
            .clone();
        let val_ae = reconstruction_loss(xh_val.view(), val_scaled.view())?;
        report.val_ae.push(val_ae);

        let val_twin = if n_val >= 2 {
            let za = stack
                .forward_component(Component::Encoder, val_a.view())?
                .output()
                .clone();
            let zb = stack
                .forward_component(Component::Encoder, val_b.view())?
                .output()
                .clone();
            let pa = stack
                .forward_component(Component::Projector, za.view())?
                .output()
                .clone();
            let pb = stack
                .forward_component(Component::Projector, zb.view())?
                .output()
                .clone();
            twin_loss(pa.view(), pb.view(), cfg.lambda)?.0
        } else {
            f64::NAN
        };
        report.val_twin.push(val_twin);

        if val_ae < report.best_val_ae {
            report.best_val_ae = val_ae;
            report.best_epoch = epoch;
            best = Some(BestState::capture(stack));
        }
    }

    if let Some(state) = best {
        state.restore(stack);
    }
    stack.clear_caches();
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Train a standalone column (no parents). The column is consumed and the
/// trained version returned alongside the report.
pub fn train_column(
    column: Column,
    rows: ArrayView2<f64>,
    validation_rows: Option<&[usize]>,
    cfg: &TrainConfig,
) -> Result<(Column, TrainReport)> {
    let mut stack = solo_stack(column);
    let report = train_child(&mut stack, rows, validation_rows, cfg)?;
    Ok((stack.columns.pop().expect("solo stack has one column"), report))
}

/// Validation reconstruction loss of an existing stack on given raw rows,
/// computed exactly as the training loop computes it.
pub fn validation_ae(stack: &ProgressiveStack, rows: ArrayView2<f64>) -> Result<f64> {
    let scaled = stack.child().scaler.scale_array(&rows);
    let z = stack
        .forward_component(Component::Encoder, scaled.view())?
        .output()
        .clone();
    let xh = stack
        .forward_component(Component::Decoder, z.view())?
        .output()
        .clone();
    reconstruction_loss(xh.view(), scaled.view())
}
