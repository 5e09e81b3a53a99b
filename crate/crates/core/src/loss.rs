//! Training losses with analytic gradients: the twin-view redundancy
//! reduction loss over batch-standardized projector outputs, and the plain
//! per-entry reconstruction loss.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Default weight on the off-diagonal (redundancy) term.
pub const DEFAULT_LAMBDA: f64 = 5e-3;

/// Columns with a batch SD below this are standardized with the floor value
/// instead, so near-constant projector outputs cannot blow up the loss.
pub const SD_FLOOR: f64 = 1e-12;

struct Standardized {
    values: Array2<f64>,
    /// Per-column clamped SD and whether the floor kicked in.
    sd: Vec<(f64, bool)>,
}

fn standardize_columns(p: &ArrayView2<f64>) -> Standardized {
    let b = p.nrows() as f64;
    let mut values = p.to_owned();
    let mut sd = Vec::with_capacity(p.ncols());
    for mut col in values.columns_mut() {
        let mean = col.sum() / b;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / b;
        let raw_sd = var.sqrt();
        let clamped = raw_sd < SD_FLOOR;
        let denom = if clamped { SD_FLOOR } else { raw_sd };
        col.mapv_inplace(|v| (v - mean) / denom);
        sd.push((denom, clamped));
    }
    Standardized { values, sd }
}

fn check_pair(a: &ArrayView2<f64>, b: &ArrayView2<f64>, context: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(
            context,
            format!("{:?}", a.dim()),
            format!("{:?}", b.dim()),
        ));
    }
    Ok(())
}

/// Batch cross-correlation of the standardized views: C = A^T B / batch.
pub fn cross_correlation(pa: ArrayView2<f64>, pb: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_pair(&pa, &pb, "cross correlation")?;
    if pa.nrows() < 2 {
        return Err(Error::BatchTooSmall { got: pa.nrows() });
    }
    let a = standardize_columns(&pa);
    let b = standardize_columns(&pb);
    Ok(a.values.t().dot(&b.values) / pa.nrows() as f64)
}

/// sum_d (1 - C_dd)^2 + lambda * sum_{i != j} C_ij^2.
pub fn twin_loss_from_correlation(c: &Array2<f64>, lambda: f64) -> f64 {
    let mut loss = 0.0;
    for ((i, j), &v) in c.indexed_iter() {
        if i == j {
            loss += (1.0 - v) * (1.0 - v);
        } else {
            loss += lambda * v * v;
        }
    }
    loss
}

/// Twin-view loss and the cross-correlation it was computed from.
pub fn twin_loss(pa: ArrayView2<f64>, pb: ArrayView2<f64>, lambda: f64) -> Result<(f64, Array2<f64>)> {
    let c = cross_correlation(pa, pb)?;
    Ok((twin_loss_from_correlation(&c, lambda), c))
}

/// Everything the twin-view backward pass produces.
pub struct TwinLossBackward {
    pub loss: f64,
    pub cross_correlation: Array2<f64>,
    /// dL/d(pa) in raw (pre-standardization) projector outputs.
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
}

/// Backward through one column of the standardization y = (x - m)/s with
/// batch statistics: dx = (g - mean(g) - y * mean(g .* y)) / s, dropping the
/// y-term when the SD floor froze s.
fn standardization_backward(std: &Standardized, grad_std: &Array2<f64>) -> Array2<f64> {
    let b = grad_std.nrows() as f64;
    let mut out = grad_std.clone();
    for (d, ((denom, clamped), mut col)) in std.sd.iter().zip(out.columns_mut()).enumerate() {
        let y = std.values.column(d);
        let g_mean = col.sum() / b;
        if *clamped {
            col.mapv_inplace(|g| (g - g_mean) / denom);
        } else {
            let gy_mean = col.iter().zip(y.iter()).map(|(&g, &yv)| g * yv).sum::<f64>() / b;
            for (g, &yv) in col.iter_mut().zip(y.iter()) {
                *g = (*g - g_mean - yv * gy_mean) / denom;
            }
        }
    }
    out
}

/// Twin-view loss plus gradients with respect to both raw projector outputs.
pub fn twin_loss_with_grads(pa: ArrayView2<f64>, pb: ArrayView2<f64>, lambda: f64) -> Result<TwinLossBackward> {
    check_pair(&pa, &pb, "twin loss")?;
    if pa.nrows() < 2 {
        return Err(Error::BatchTooSmall { got: pa.nrows() });
    }
    let batch = pa.nrows() as f64;
    let a = standardize_columns(&pa);
    let b = standardize_columns(&pb);
    let c = a.values.t().dot(&b.values) / batch;
    let loss = twin_loss_from_correlation(&c, lambda);

    // dL/dC
    let mut g = c.clone();
    for ((i, j), v) in g.indexed_iter_mut() {
        if i == j {
            *v = -2.0 * (1.0 - *v);
        } else {
            *v *= 2.0 * lambda;
        }
    }
    let grad_a_std = b.values.dot(&g.t()) / batch;
    let grad_b_std = a.values.dot(&g) / batch;
    Ok(TwinLossBackward {
        loss,
        cross_correlation: c,
        grad_a: standardization_backward(&a, &grad_a_std),
        grad_b: standardization_backward(&b, &grad_b_std),
    })
}

/// Mean squared error over every entry of the batch.
pub fn reconstruction_loss(x_hat: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<f64> {
    check_pair(&x_hat, &x, "reconstruction loss")?;
    if x.is_empty() {
        return Err(Error::EmptyTrainingSet("reconstruction loss over zero entries".into()));
    }
    let n = x.len() as f64;
    let mut acc = 0.0;
    for (&a, &b) in x_hat.iter().zip(x.iter()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / n)
}

/// Reconstruction loss and dL/d(x_hat) = 2 (x_hat - x) / n_entries.
pub fn reconstruction_loss_with_grad(x_hat: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    let loss = reconstruction_loss(x_hat, x)?;
    let n = x.len() as f64;
    let mut grad = x_hat.to_owned();
    ndarray::Zip::from(&mut grad).and(&x).for_each(|g, &t| {
        *g = 2.0 * (*g - t) / n;
    });
    Ok((loss, grad))
}

/// Mean over rows of the per-entry squared error (same value as
/// `reconstruction_loss`; kept for call sites that already have row count).
pub fn mean_over_entries(sum_sq: f64, rows: usize, cols: usize) -> f64 {
    sum_sq / (rows as f64 * cols as f64)
}

#[allow(unused)]
fn _suppress(_: Axis) {}
