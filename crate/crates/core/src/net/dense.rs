//! Fully connected layer with explicit forward/backward passes.
//!
//! Weights are stored row-major as (out_dim, in_dim); a batch is one row
//! per sample. `forward` caches what `backward` needs; `infer` is the
//! read-only path used for frozen columns and evaluation.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::net::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Identity,
    /// max(x, slope*x); the derivative at exactly 0 takes the positive branch.
    LeakyRelu { slope: f64 },
}

impl Activation {
    fn apply(&self, pre: &mut Array2<f64>) {
        if let Activation::LeakyRelu { slope } = *self {
            pre.mapv_inplace(|x| if x > 0.0 { x } else { slope * x });
        }
    }

    fn derivative_at(&self, pre: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu { slope } => {
                if pre >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    /// Derivative recovered from the *output* value. Valid because both
    /// activations here preserve sign (identity trivially; leaky-relu with
    /// positive slope maps pre >= 0 exactly to post >= 0), so the branch can
    /// be decided without the pre-activation.
    pub(crate) fn derivative_from_output(&self, post: f64) -> f64 {
        self.derivative_at(post)
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    input: Array2<f64>,
    pre_activation: Array2<f64>,
}

/// One dense layer: y = act(x W^T + b [+ lateral]).
#[derive(Debug, Clone)]
pub struct DenseLayer {
    w: Array2<f64>,
    b: Array1<f64>,
    activation: Activation,
    cache: Option<ForwardCache>,
}

/// Gradients flowing out of one layer's backward pass.
pub struct LayerBackward {
    /// dL/d(input), batch-shaped.
    pub input_grad: Array2<f64>,
    /// dL/d(pre-activation); laterally connected layers feed this to their gates.
    pub pre_grad: Array2<f64>,
    pub w_grad: Array2<f64>,
    pub b_grad: Array1<f64>,
}

impl DenseLayer {
    /// Seeded init: weights then bias drawn uniform in +-sqrt(1/in_dim).
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        assert!(in_dim > 0 && out_dim > 0, "layer dims must be positive");
        let bound = (1.0 / in_dim as f64).sqrt();
        let mut w = Array2::zeros((out_dim, in_dim));
        for x in w.iter_mut() {
            *x = rng.uniform(-bound, bound);
        }
        let mut b = Array1::zeros(out_dim);
        for x in b.iter_mut() {
            *x = rng.uniform(-bound, bound);
        }
        DenseLayer {
            w,
            b,
            activation,
            cache: None,
        }
    }

    /// Zero-everything layer; lateral gates start here so a fresh gate
    /// contributes exactly nothing.
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
            activation,
            cache: None,
        }
    }

    pub fn from_parts(w: Array2<f64>, b: Array1<f64>, activation: Activation) -> Result<Self> {
        if w.nrows() != b.len() {
            return Err(Error::shape(
                "dense layer parts",
                format!("bias len {}", w.nrows()),
                format!("{}", b.len()),
            ));
        }
        Ok(DenseLayer {
            w,
            b,
            activation,
            cache: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Contiguous views over (weights, bias) for the optimizer.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (
            self.w.as_slice_mut().expect("weights are standard layout"),
            self.b.as_slice_mut().expect("bias is contiguous"),
        )
    }

    pub fn set_params(&mut self, w: Array2<f64>, b: Array1<f64>) {
        assert_eq!(w.dim(), self.w.dim(), "weight shape change");
        assert_eq!(b.len(), self.b.len(), "bias shape change");
        self.w = w;
        self.b = b;
    }

    fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(
            x.ncols(),
            self.in_dim(),
            "dense forward: input has {} columns, layer expects {}",
            x.ncols(),
            self.in_dim()
        );
        x.dot(&self.w.t()) + &self.b
    }

    /// Read-only forward pass (no cache).
    pub fn infer(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = self.affine(x);
        self.activation.apply(&mut pre);
        pre
    }

    /// Read-only forward with an extra pre-activation term (lateral input).
    pub fn infer_with_lateral(&self, x: ArrayView2<f64>, lateral: Option<&Array2<f64>>) -> Array2<f64> {
        let mut pre = self.affine(x);
        if let Some(lat) = lateral {
            pre += lat;
        }
        self.activation.apply(&mut pre);
        pre
    }

    /// Training forward: caches input and pre-activation for `backward`.
    pub fn forward(&mut self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_with_lateral(x, None)
    }

    /// Training forward where `lateral` (already summed over gates) is added
    /// to the pre-activation before the nonlinearity.
    pub fn forward_with_lateral(&mut self, x: ArrayView2<f64>, lateral: Option<&Array2<f64>>) -> Array2<f64> {
        let mut pre = self.affine(x);
        if let Some(lat) = lateral {
            assert_eq!(lat.dim(), pre.dim(), "lateral term shape mismatch");
            pre += lat;
        }
        let mut out = pre.clone();
        self.cache = Some(ForwardCache {
            input: x.to_owned(),
            pre_activation: pre,
        });
        self.activation.apply(&mut out);
        out
    }

    /// Backward pass; consumes the cache from the matching forward.
    pub fn backward(&mut self, upstream: &Array2<f64>) -> Result<LayerBackward> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::MissingForwardCache(format!("dense {}x{}", self.out_dim(), self.in_dim())))?;
        if upstream.dim() != cache.pre_activation.dim() {
            return Err(Error::shape(
                "dense backward",
                format!("{:?}", cache.pre_activation.dim()),
                format!("{:?}", upstream.dim()),
            ));
        }
        let mut pre_grad = upstream.clone();
        ndarray::Zip::from(&mut pre_grad)
            .and(&cache.pre_activation)
            .for_each(|g, &pre| *g *= self.activation.derivative_at(pre));
        let w_grad = pre_grad.t().dot(&cache.input);
        let b_grad = pre_grad.sum_axis(Axis(0));
        let input_grad = pre_grad.dot(&self.w);
        Ok(LayerBackward {
            input_grad,
            pre_grad,
            w_grad,
            b_grad,
        })
    }

    /// Drop any cached forward state (used before cloning weights out of a
    /// training loop so checkpoints stay lean).
    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy_layer(activation: Activation) -> DenseLayer {
        let w = array![[1.0, -2.0], [0.5, 0.25], [0.0, 1.0]];
        let b = array![0.1, -0.1, 0.0];
        DenseLayer::from_parts(w, b, activation).unwrap()
    }

    #[test]
    fn identity_forward_is_affine() {
        let layer = toy_layer(Activation::Identity);
        let x = array![[1.0, 1.0]];
        let y = layer.infer(x.view());
        // Row 1: 1 - 2 + 0.1 = -0.9; row 2: 0.5 + 0.25 - 0.1 = 0.65; row 3: 1.
        assert_eq!(y, array![[-0.9, 0.65, 1.0]]);
    }

    #[test]
    fn leaky_relu_scales_negatives() {
        let layer = toy_layer(Activation::LeakyRelu { slope: 0.2 });
        let x = array![[1.0, 1.0]];
        let y = layer.infer(x.view());
        assert!((y[[0, 0]] - (-0.18)).abs() < 1e-15); // 0.2 * -0.9
        assert!((y[[0, 1]] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn forward_then_infer_agree() {
        let mut rng = SeededRng::new(11);
        let mut layer = DenseLayer::new(4, 3, Activation::LeakyRelu { slope: 0.2 }, &mut rng);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let a = layer.infer(x.view());
        let b = layer.forward(x.view());
        assert_eq!(a, b);
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut layer = toy_layer(Activation::Identity);
        let upstream = Array2::zeros((1, 3));
        assert!(matches!(
            layer.backward(&upstream),
            Err(Error::MissingForwardCache(_))
        ));
    }

    #[test]
    fn identity_chain_rule_by_hand() {
        // y = x W^T + b, upstream all ones: w_grad = 1^T x, b_grad = 1 per
        // output, input_grad = 1 W.
        let mut layer = toy_layer(Activation::Identity);
        let x = array![[2.0, 3.0]];
        layer.forward(x.view());
        let upstream = array![[1.0, 1.0, 1.0]];
        let out = layer.backward(&upstream).unwrap();
        assert_eq!(out.w_grad, array![[2.0, 3.0], [2.0, 3.0], [2.0, 3.0]]);
        assert_eq!(out.b_grad, array![1.0, 1.0, 1.0]);
        // input_grad = sum of weight rows.
        assert_eq!(out.input_grad, array![[1.5, -0.75]]);
    }

    #[test]
    fn second_backward_errors() {
        let mut layer = toy_layer(Activation::Identity);
        let x = array![[2.0, 3.0]];
        layer.forward(x.view());
        let upstream = array![[1.0, 1.0, 1.0]];
        layer.backward(&upstream).unwrap();
        assert!(layer.backward(&upstream).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let mut r1 = SeededRng::new(42);
        let mut r2 = SeededRng::new(42);
        let a = DenseLayer::new(16, 8, Activation::Identity, &mut r1);
        let b = DenseLayer::new(16, 8, Activation::Identity, &mut r2);
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.bias(), b.bias());
        let bound = (1.0_f64 / 16.0).sqrt();
        assert!(a.weights().iter().all(|x| x.abs() <= bound));
    }
}
