//! A single autoencoder column: halving encoder, mirrored decoder, and a
//! two-layer projector head used only by the twin-view loss. Columns carry
//! the min/max scaler fitted on their training set so raw fields round-trip
//! through `encode`/`decode` in physical units.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Activation, DenseLayer, SeededRng};

/// LeakyReLU slope used by every hidden layer.
pub const HIDDEN_SLOPE: f64 = 0.2;

/// Default latent width.
pub const DEFAULT_LATENT_DIM: usize = 16;

/// Default projector width.
pub const DEFAULT_PROJECTOR_DIM: usize = 64;

/// The three independent layer stacks of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Encoder,
    Decoder,
    Projector,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Encoder, Component::Decoder, Component::Projector];

    pub fn name(&self) -> &'static str {
        match self {
            Component::Encoder => "encoder",
            Component::Decoder => "decoder",
            Component::Projector => "projector",
        }
    }
}

/// Per-set min/max normalization into [0, 1]. A zero-range set maps to 0
/// and unscales back to the constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    /// Scaler that passes values through unchanged.
    pub fn identity() -> Self {
        MinMaxScaler { min: 0.0, max: 1.0 }
    }

    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() || !max.is_finite() {
            return MinMaxScaler::identity();
        }
        MinMaxScaler { min, max }
    }

    fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn scale(&self, x: f64) -> f64 {
        let r = self.range();
        if r > 0.0 {
            (x - self.min) / r
        } else {
            0.0
        }
    }

    pub fn unscale(&self, y: f64) -> f64 {
        let r = self.range();
        if r > 0.0 {
            self.min + r * y
        } else {
            self.min
        }
    }

    pub fn scale_array(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.mapv(|v| self.scale(v))
    }

    pub fn unscale_array_in_place(&self, y: &mut Array2<f64>) {
        y.mapv_inplace(|v| self.unscale(v));
    }
}

/// Layer widths for one column. `encoder_widths` runs input -> latent;
/// the decoder mirrors it exactly; the projector is latent -> p -> p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnArch {
    pub dof: usize,
    pub latent_dim: usize,
    pub projector_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub projector_widths: Vec<usize>,
}

impl ColumnArch {
    /// Five halvings (floor) of the input width, then the latent bottleneck.
    pub fn halving(dof: usize, latent_dim: usize, projector_dim: usize) -> Result<Self> {
        if dof < 32 {
            return Err(Error::DofTooSmall { dof });
        }
        if latent_dim == 0 || projector_dim == 0 {
            return Err(Error::InvalidConfig(
                "latent_dim and projector_dim must be positive".into(),
            ));
        }
        let mut encoder_widths = vec![dof];
        for k in 1..=5 {
            encoder_widths.push(dof >> k);
        }
        encoder_widths.push(latent_dim);
        let decoder_widths: Vec<usize> = encoder_widths.iter().rev().copied().collect();
        let projector_widths = vec![latent_dim, projector_dim, projector_dim];
        Ok(ColumnArch {
            dof,
            latent_dim,
            projector_dim,
            encoder_widths,
            decoder_widths,
            projector_widths,
        })
    }

    pub fn widths(&self, component: Component) -> &[usize] {
        match component {
            Component::Encoder => &self.encoder_widths,
            Component::Decoder => &self.decoder_widths,
            Component::Projector => &self.projector_widths,
        }
    }

    /// Dense parameter count (weights + biases) for one component.
    pub fn param_count(&self, component: Component) -> usize {
        let w = self.widths(component);
        w.windows(2).map(|pair| pair[1] * pair[0] + pair[1]).sum()
    }
}

/// One autoencoder column. `frozen` marks it read-only for every training
/// path; the flag is set when the column becomes a transfer parent.
#[derive(Debug, Clone)]
pub struct Column {
    pub arch: ColumnArch,
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
    pub projector: Vec<DenseLayer>,
    pub scaler: MinMaxScaler,
    pub seed: u64,
    pub frozen: bool,
}

fn build_stack(widths: &[usize], rng: &mut SeededRng) -> Vec<DenseLayer> {
    let n_layers = widths.len() - 1;
    widths
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let activation = if i + 1 == n_layers {
                Activation::Identity
            } else {
                Activation::LeakyRelu { slope: HIDDEN_SLOPE }
            };
            DenseLayer::new(pair[0], pair[1], activation, rng)
        })
        .collect()
}

/// Seeded constructor for the halving architecture.
pub fn build_column(dof: usize, latent_dim: usize, projector_dim: usize, seed: u64) -> Result<Column> {
    let arch = ColumnArch::halving(dof, latent_dim, projector_dim)?;
    Ok(Column::from_arch(arch, seed))
}

impl Column {
    /// Build a column with fresh seeded weights for an arbitrary (already
    /// validated) architecture. Streams are split per component so layer
    /// draws never alias.
    pub fn from_arch(arch: ColumnArch, seed: u64) -> Column {
        let mut enc_rng = SeededRng::substream(seed, 0x01);
        let mut dec_rng = SeededRng::substream(seed, 0x02);
        let mut proj_rng = SeededRng::substream(seed, 0x03);
        Column {
            encoder: build_stack(&arch.encoder_widths, &mut enc_rng),
            decoder: build_stack(&arch.decoder_widths, &mut dec_rng),
            projector: build_stack(&arch.projector_widths, &mut proj_rng),
            arch,
            scaler: MinMaxScaler::identity(),
            seed,
            frozen: false,
        }
    }

    /// Assemble a column from explicit layers (tests and deserialization).
    pub fn from_parts(
        arch: ColumnArch,
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
        projector: Vec<DenseLayer>,
        scaler: MinMaxScaler,
        seed: u64,
        frozen: bool,
    ) -> Result<Column> {
        for (component, layers) in [
            (Component::Encoder, &encoder),
            (Component::Decoder, &decoder),
            (Component::Projector, &projector),
        ] {
            let widths = arch.widths(component);
            if layers.len() + 1 != widths.len() {
                return Err(Error::shape(
                    format!("{} layer count", component.name()),
                    format!("{}", widths.len() - 1),
                    format!("{}", layers.len()),
                ));
            }
            for (i, layer) in layers.iter().enumerate() {
                if layer.in_dim() != widths[i] || layer.out_dim() != widths[i + 1] {
                    return Err(Error::shape(
                        format!("{} layer {}", component.name(), i + 1),
                        format!("{}x{}", widths[i + 1], widths[i]),
                        format!("{}x{}", layer.out_dim(), layer.in_dim()),
                    ));
                }
            }
        }
        Ok(Column {
            arch,
            encoder,
            decoder,
            projector,
            scaler,
            seed,
            frozen,
        })
    }

    pub fn layers(&self, component: Component) -> &[DenseLayer] {
        match component {
            Component::Encoder => &self.encoder,
            Component::Decoder => &self.decoder,
            Component::Projector => &self.projector,
        }
    }

    pub fn layers_mut(&mut self, component: Component) -> &mut Vec<DenseLayer> {
        match component {
            Component::Encoder => &mut self.encoder,
            Component::Decoder => &mut self.decoder,
            Component::Projector => &mut self.projector,
        }
    }

    /// Total dense parameter count across all three components.
    pub fn param_count(&self) -> usize {
        Component::ALL
            .iter()
            .map(|&c| self.layers(c).iter().map(|l| l.param_count()).sum::<usize>())
            .sum()
    }

    /// Scale raw fields and run the encoder. Read-only.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.arch.dof {
            return Err(Error::shape(
                "encode input",
                format!("{} columns", self.arch.dof),
                format!("{}", x.ncols()),
            ));
        }
        let mut h = self.scaler.scale_array(&x);
        for layer in &self.encoder {
            h = layer.infer(h.view());
        }
        Ok(h)
    }

    /// Run the decoder and unscale back to raw units. Read-only.
    pub fn decode(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.arch.latent_dim {
            return Err(Error::shape(
                "decode input",
                format!("{} columns", self.arch.latent_dim),
                format!("{}", z.ncols()),
            ));
        }
        let mut h = z.to_owned();
        for layer in &self.decoder {
            h = layer.infer(h.view());
        }
        self.scaler.unscale_array_in_place(&mut h);
        Ok(h)
    }

    /// decode(encode(x)) in raw units.
    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.encode(x)?;
        self.decode(z.view())
    }

    /// Mark the column read-only. Required before it can serve as a
    /// transfer parent; training entry points refuse frozen columns.
    pub fn freeze(&mut self) {
        self.frozen = true;
        self.clear_caches();
    }

    pub fn clear_caches(&mut self) {
        for component in Component::ALL {
            for layer in self.layers_mut(component) {
                layer.clear_cache();
            }
        }
    }
}
