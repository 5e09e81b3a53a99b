//! Twin-view augmentation: additive Gaussian noise scaled by each
//! snapshot's own spread, followed by an optional pointwise Gaussian-pdf
//! remap. Both views draw from independent streams of the same seed.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::net::SeededRng;

/// Second augmentation stage applied after the additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurMode {
    /// y = exp(-x^2 / (2 sigma^2)) / sqrt(2 pi sigma^2), with sigma the
    /// population SD of the noised snapshot. Skipped on zero-spread rows.
    PointwisePdf,
    Off,
}

/// Population standard deviation of one snapshot row.
pub(crate) fn population_sd(row: ArrayView1<f64>) -> f64 {
    let n = row.len() as f64;
    let mean = row.sum() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

fn noise_view(x: &ArrayView2<f64>, eps: f64, rng: &mut SeededRng) -> Array2<f64> {
    let mut out = x.to_owned();
    if eps == 0.0 {
        return out;
    }
    for mut row in out.rows_mut() {
        let sd = population_sd(row.view());
        if sd == 0.0 {
            continue; // constant snapshot: the noise stage is the identity
        }
        for v in row.iter_mut() {
            *v += eps * sd * rng.standard_normal();
        }
    }
    out
}

fn blur_in_place(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let sd = population_sd(row.view());
        if sd == 0.0 {
            continue; // zero spread: this stage is the identity
        }
        let coef = 1.0 / (2.0 * std::f64::consts::PI * sd * sd).sqrt();
        let inv_two_var = 1.0 / (2.0 * sd * sd);
        for v in row.iter_mut() {
            *v = coef * (-*v * *v * inv_two_var).exp();
        }
    }
}

/// Produce the two augmented views of a snapshot batch (rows = snapshots).
/// Distortion scales per row: noise amplitude is `eps` times the row's
/// population SD, drawn independently per view.
pub fn augment(x: ArrayView2<f64>, eps: f64, seed: u64, blur: BlurMode) -> (Array2<f64>, Array2<f64>) {
    let mut rng_a = SeededRng::substream(seed, 0xA);
    let mut rng_b = SeededRng::substream(seed, 0xB);
    let mut view_a = noise_view(&x, eps, &mut rng_a);
    let mut view_b = noise_view(&x, eps, &mut rng_b);
    if blur == BlurMode::PointwisePdf {
        blur_in_place(&mut view_a);
        blur_in_place(&mut view_b);
    }
    (view_a, view_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_snapshot_passes_through_unchanged() {
        let x = Array2::from_elem((3, 8), 0.4);
        let (a, b) = augment(x.view(), 0.1, 5, BlurMode::PointwisePdf);
        assert_eq!(a, x);
        assert_eq!(b, x);
    }

    #[test]
    fn eps_zero_blur_off_is_bitwise_identity() {
        let x = array![[0.1, 0.9, 0.4, -0.3], [2.0, -1.0, 0.0, 0.5]];
        let (a, b) = augment(x.view(), 0.0, 99, BlurMode::Off);
        assert_eq!(a, x);
        assert_eq!(b, x);
    }

    #[test]
    fn views_differ_and_are_seed_reproducible() {
        let x = Array2::from_shape_fn((4, 16), |(i, j)| ((i * 16 + j) as f64).sin());
        let (a1, b1) = augment(x.view(), 0.1, 7, BlurMode::PointwisePdf);
        let (a2, b2) = augment(x.view(), 0.1, 7, BlurMode::PointwisePdf);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_ne!(a1, b1);
    }

    #[test]
    fn pdf_value_at_zero_with_unit_sd() {
        // Directly exercise the remap formula: x = 0, sigma = 1 gives
        // 1/sqrt(2 pi).
        let mut row = array![[0.0, 1.0, -1.0, 2.0, -2.0]];
        // population SD of this row is sqrt(2); rescale so sigma = 1.
        row.mapv_inplace(|v| v / (2.0_f64).sqrt());
        let sd = population_sd(row.row(0));
        assert!((sd - 1.0).abs() < 1e-12);
        blur_in_place(&mut row);
        assert!((row[[0, 0]] - 0.3989422804014327).abs() < 1e-12);
    }

    #[test]
    fn noise_amplitude_tracks_row_spread() {
        // A row with spread ~1 should move by O(eps); verify the noised view
        // stays within a generous multiple of eps * sd.
        let x = Array2::from_shape_fn((1, 4096), |(_, j)| if j % 2 == 0 { 1.0 } else { -1.0 });
        let (a, _) = augment(x.view(), 0.1, 3, BlurMode::Off);
        let delta = &a - &x;
        let max = delta.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let rms = (delta.iter().map(|&v| v * v).sum::<f64>() / 4096.0).sqrt();
        assert!((rms - 0.1).abs() < 0.02, "rms {rms}");
        assert!(max < 0.6, "max {max}");
    }
}
