//! Test-set evaluation: global error metrics and per-sample summaries.

use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::datagen::SnapshotSet;
use crate::error::{Error, Result};
use crate::latent::{predict_latent_batch, RbfModel};
use crate::progressive::ProgressiveStack;

/// Mean squared error over all entries.
pub fn mse(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::shape(
            "mse operands",
            format!("{:?}", truth.dim()),
            format!("{:?}", pred.dim()),
        ));
    }
    let n = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Mean absolute error over all entries.
pub fn mae(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::shape(
            "mae operands",
            format!("{:?}", truth.dim()),
            format!("{:?}", pred.dim()),
        ));
    }
    let n = pred.len() as f64;
    let sum: f64 = pred.iter().zip(truth.iter()).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / n)
}

/// One test sample's parameter point and its MAE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerSampleMae {
    pub mu: Vec<f64>,
    pub mae: f64,
}

/// Summary of a full test-set evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean of the per-sample MAEs.
    pub avg_mae: f64,
    /// Population standard deviation of the per-sample MAEs.
    pub std_mae: f64,
    /// Global per-entry MSE over the whole test set.
    pub mse: f64,
    pub per_mu_mae: Vec<PerSampleMae>,
    pub runtime_seconds: f64,
}

/// Predict every test snapshot via the latent interpolant + decoder and
/// aggregate the errors.
pub fn evaluate(stack: &ProgressiveStack, rbf: &RbfModel, set: &SnapshotSet) -> Result<EvalReport> {
    let start = Instant::now();
    if set.test_samples().next().is_none() {
        return Err(Error::EmptyTrainingSet("no test samples to evaluate".into()));
    }
    if rbf.latent_dim() != stack.child().arch.latent_dim {
        return Err(Error::shape(
            "latent width of interpolant vs decoder",
            format!("{}", stack.child().arch.latent_dim),
            format!("{}", rbf.latent_dim()),
        ));
    }
    if set.dof() != stack.child().arch.dof {
        return Err(Error::shape(
            "test-set field width vs model",
            format!("{}", stack.child().arch.dof),
            format!("{}", set.dof()),
        ));
    }

    let mut per_mu_mae = Vec::new();
    let mut sq_sum = 0.0;
    let mut entries = 0usize;
    for sample in set.test_samples() {
        let queries = set.sample_inputs(sample);
        let (z, _) = predict_latent_batch(rbf, queries.view())?;
        let pred = stack.decode(z.view())?;
        let sample_mae = mae(pred.view(), sample.fields.view())?;
        per_mu_mae.push(PerSampleMae {
            mu: sample.mu.clone(),
            mae: sample_mae,
        });
        sq_sum += pred
            .iter()
            .zip(sample.fields.iter())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
        entries += pred.len();
    }

    let n = per_mu_mae.len() as f64;
    let avg_mae = per_mu_mae.iter().map(|p| p.mae).sum::<f64>() / n;
    let var = per_mu_mae
        .iter()
        .map(|p| (p.mae - avg_mae) * (p.mae - avg_mae))
        .sum::<f64>()
        / n;
    Ok(EvalReport {
        avg_mae,
        std_mae: var.sqrt(),
        mse: sq_sum / entries as f64,
        per_mu_mae,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn identical_arrays_give_zero() {
        let a = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64);
        assert_eq!(mse(a.view(), a.view()).unwrap(), 0.0);
        assert_eq!(mae(a.view(), a.view()).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_has_known_errors() {
        let truth = Array2::zeros((5, 7));
        let pred = Array2::from_elem((5, 7), 0.1);
        assert!((mae(pred.view(), truth.view()).unwrap() - 0.1).abs() < 1e-15);
        assert!((mse(pred.view(), truth.view()).unwrap() - 0.01).abs() < 1e-16);
    }

    #[test]
    fn matches_element_loop_second_implementation() {
        let mut k = 0.0_f64;
        let pred = Array2::from_shape_fn((3, 4), |_| {
            k += 0.37;
            (k * 7.3).sin()
        });
        let mut k = 0.0_f64;
        let truth = Array2::from_shape_fn((3, 4), |_| {
            k += 0.11;
            (k * 3.1).cos()
        });
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                let d: f64 = pred[[i, j]] - truth[[i, j]];
                abs_sum += d.abs();
                sq_sum += d * d;
            }
        }
        assert!((mae(pred.view(), truth.view()).unwrap() - abs_sum / 12.0).abs() < 1e-15);
        assert!((mse(pred.view(), truth.view()).unwrap() - sq_sum / 12.0).abs() < 1e-15);
    }

    #[test]
    fn symmetry_and_shape_errors() {
        let a = Array2::from_shape_fn((2, 3), |(i, j)| i as f64 - j as f64);
        let b = Array2::from_shape_fn((2, 3), |(i, j)| (i + j) as f64 * 0.5);
        assert_eq!(mae(a.view(), b.view()).unwrap(), mae(b.view(), a.view()).unwrap());
        let c = Array2::zeros((3, 2));
        assert!(mse(a.view(), c.view()).is_err());
        assert!(mae(a.view(), c.view()).is_err());
    }
}
