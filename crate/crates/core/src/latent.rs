//! Linear-kernel RBF interpolation from query coordinates (time and/or
//! parameters) to latent coordinates, and its composition with a trained
//! decoder. Inputs are normalized per dimension to [0,1] using the training
//! ranges; the dense symmetric system is solved directly.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::progressive::ProgressiveStack;

/// Default Tikhonov ridge added to the kernel matrix diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// Fitted interpolant: normalized centers, per-latent-dimension
/// coefficients, and the normalization ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    /// n × d, already normalized to [0,1] per dimension.
    pub centers: Array2<f64>,
    /// n × Q.
    pub coefficients: Array2<f64>,
    /// Per-dimension (lo, hi) of the raw training inputs.
    pub ranges: Vec<(f64, f64)>,
    pub ridge: f64,
}

impl RbfModel {
    pub fn n_centers(&self) -> usize {
        self.centers.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Normalize a raw query; the flag reports extrapolation (any
    /// normalized coordinate outside [0,1]).
    fn normalize(&self, query: &[f64]) -> (Vec<f64>, bool) {
        let mut out = Vec::with_capacity(query.len());
        let mut outside = false;
        for (d, &q) in query.iter().enumerate() {
            let (lo, hi) = self.ranges[d];
            let v = if hi > lo { (q - lo) / (hi - lo) } else { 0.0 };
            if !(0.0..=1.0).contains(&v) {
                outside = true;
            }
            out.push(v);
        }
        (out, outside)
    }
}

/// Solve A·X = B by Gaussian elimination with partial pivoting. A is
/// consumed. Errors with a pivot-ratio condition estimate when a pivot
/// underflows.
pub(crate) fn solve_dense(mut a: Array2<f64>, mut b: Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "square system");
    assert_eq!(b.nrows(), n, "right-hand side height");
    let mut max_pivot = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = a[[k, k]].abs();
        for r in (k + 1)..n {
            if a[[r, k]].abs() > pivot_val {
                pivot_val = a[[r, k]].abs();
                pivot_row = r;
            }
        }
        if pivot_val < 1e-300 || !pivot_val.is_finite() {
            return Err(Error::SingularSystem {
                cond_estimate: if min_pivot > 0.0 { max_pivot / pivot_val.max(1e-300) } else { f64::INFINITY },
            });
        }
        if pivot_row != k {
            for c in 0..n {
                a.swap([k, c], [pivot_row, c]);
            }
            for c in 0..b.ncols() {
                b.swap([k, c], [pivot_row, c]);
            }
        }
        max_pivot = max_pivot.max(pivot_val);
        min_pivot = min_pivot.min(pivot_val);
        let diag = a[[k, k]];
        for r in (k + 1)..n {
            let factor = a[[r, k]] / diag;
            if factor == 0.0 {
                continue;
            }
            for c in k..n {
                a[[r, c]] -= factor * a[[k, c]];
            }
            for c in 0..b.ncols() {
                b[[r, c]] -= factor * b[[k, c]];
            }
        }
    }
    // Back substitution.
    let mut x = Array2::zeros(b.dim());
    for c in 0..b.ncols() {
        for r in (0..n).rev() {
            let mut acc = b[[r, c]];
            for k in (r + 1)..n {
                acc -= a[[r, k]] * x[[k, c]];
            }
            x[[r, c]] = acc / a[[r, r]];
        }
    }
    Ok(x)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fit the interpolant. Duplicate inputs (after normalization) are merged
/// by averaging their latents; a single center degenerates to a constant
/// map.
pub fn fit_rbf(inputs: ArrayView2<f64>, latents: ArrayView2<f64>, ridge: f64) -> Result<RbfModel> {
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::EmptyTrainingSet("no interpolation points".into()));
    }
    if latents.nrows() != n {
        return Err(Error::shape(
            "interpolation latents",
            format!("{n} rows"),
            format!("{}", latents.nrows()),
        ));
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::InvalidConfig(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let d = inputs.ncols();
    let q = latents.ncols();

    let ranges: Vec<(f64, f64)> = (0..d)
        .map(|c| {
            let col = inputs.column(c);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::NonFinite("interpolation inputs".into()));
    }

    let normalize_row = |row: usize| -> Vec<f64> {
        (0..d)
            .map(|c| {
                let (lo, hi) = ranges[c];
                if hi > lo {
                    (inputs[[row, c]] - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    };

    // Merge exact duplicates by averaging their latent rows.
    let mut unique: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<Array1<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for r in 0..n {
        let point = normalize_row(r);
        match unique.iter().position(|u| u == &point) {
            Some(k) => {
                sums[k] = &sums[k] + &latents.row(r);
                counts[k] += 1;
            }
            None => {
                unique.push(point);
                sums.push(latents.row(r).to_owned());
                counts.push(1);
            }
        }
    }
    let m = unique.len();
    let mut centers = Array2::zeros((m, d));
    for (r, u) in unique.iter().enumerate() {
        for (c, &v) in u.iter().enumerate() {
            centers[[r, c]] = v;
        }
    }
    let mut z = Array2::zeros((m, q));
    for (r, (sum, &count)) in sums.iter().zip(&counts).enumerate() {
        z.row_mut(r).assign(&(sum / count as f64));
    }

    if m == 1 {
        // Constant map: prediction always returns the single latent row.
        return Ok(RbfModel {
            centers,
            coefficients: z,
            ranges,
            ridge,
        });
    }

    let mut kernel = Array2::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            kernel[[a, b]] = distance(&unique[a], &unique[b]);
        }
        kernel[[a, a]] += ridge;
    }
    let coefficients = solve_dense(kernel, z)?;
    Ok(RbfModel {
        centers,
        coefficients,
        ranges,
        ridge,
    })
}

/// Evaluate the interpolant at one raw query. Returns the latent vector and
/// whether the query extrapolated beyond the training ranges.
pub fn predict_latent(model: &RbfModel, query: &[f64]) -> Result<(Array1<f64>, bool)> {
    if query.len() != model.input_dim() {
        return Err(Error::shape(
            "interpolation query",
            format!("{}", model.input_dim()),
            format!("{}", query.len()),
        ));
    }
    let (point, outside) = model.normalize(query);
    if model.n_centers() == 1 {
        return Ok((model.coefficients.row(0).to_owned(), outside));
    }
    let mut z = Array1::zeros(model.latent_dim());
    for a in 0..model.n_centers() {
        let center = model.centers.row(a);
        let r = distance(&point, center.as_slice().expect("contiguous"));
        if r != 0.0 {
            z = z + &(&model.coefficients.row(a) * r);
        }
    }
    Ok((z, outside))
}

/// Batch prediction, one query per row.
pub fn predict_latent_batch(model: &RbfModel, queries: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<bool>)> {
    let mut out = Array2::zeros((queries.nrows(), model.latent_dim()));
    let mut flags = Vec::with_capacity(queries.nrows());
    for (r, row) in queries.rows().into_iter().enumerate() {
        let (z, outside) = predict_latent(model, row.as_slice().expect("contiguous"))?;
        out.row_mut(r).assign(&z);
        flags.push(outside);
    }
    Ok((out, flags))
}

/// Full online query: latent prediction composed with the (possibly gated)
/// decoder, unscaled back to raw field units.
pub fn predict_field(stack: &ProgressiveStack, model: &RbfModel, query: &[f64]) -> Result<(Array1<f64>, bool)> {
    if model.latent_dim() != stack.child().arch.latent_dim {
        return Err(Error::shape(
            "latent width of interpolant vs decoder",
            format!("{}", stack.child().arch.latent_dim),
            format!("{}", model.latent_dim()),
        ));
    }
    let (z, outside) = predict_latent(model, query)?;
    let z2 = z.insert_axis(ndarray::Axis(0));
    let field = stack.decode(z2.view())?;
    Ok((field.row(0).to_owned(), outside))
}
