//! Chaining a trainable child column onto frozen parent columns.
//!
//! Parents run read-only; from the child's second layer on, zero-initialized
//! linear gates add each parent's previous-layer activation to the child's
//! pre-activation:
//!
//! ```text
//! h_i = act( L_i(h_{i-1})  +  sum_j U_{i,j}(h_{i-1}^{parent j}) )
//! ```
//!
//! Gates exist independently per component (encoder / decoder / projector);
//! the components never cross-connect. The decoder and projector of every
//! column share the child's latent input, which is why all columns in a
//! stack must agree on the latent width. Encoder inputs are mapped onto
//! each parent's mesh by a fixed, non-trainable adapter.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::column::{Column, ColumnArch, Component};
use crate::error::{Error, Result};
use crate::net::{Activation, DenseLayer};

/// How a fresh child column gets its starting weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Seeded random init for every layer.
    Scratch,
    /// Layers whose shape matches the corresponding layer of at least one
    /// parent start from the arithmetic mean of the matching parents;
    /// everything else keeps the random init.
    ParentAverage,
}

/// Fixed input resampling from the child mesh onto a parent mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterMode {
    Identity,
    /// 1-D linear interpolation over the flattened field index.
    LinearResample,
}

/// Maps child-width rows to one parent's input width. Never trainable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputAdapter {
    pub mode: AdapterMode,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl InputAdapter {
    pub fn new(child_dof: usize, parent_dof: usize) -> Self {
        InputAdapter {
            mode: if child_dof == parent_dof {
                AdapterMode::Identity
            } else {
                AdapterMode::LinearResample
            },
            in_dim: child_dof,
            out_dim: parent_dof,
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.in_dim, "adapter input width");
        match self.mode {
            AdapterMode::Identity => x.to_owned(),
            AdapterMode::LinearResample => {
                let n_src = self.in_dim;
                let n_dst = self.out_dim;
                let mut out = Array2::zeros((x.nrows(), n_dst));
                for i in 0..n_dst {
                    let pos = if n_dst > 1 {
                        i as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64
                    } else {
                        0.0
                    };
                    let lo = pos.floor() as usize;
                    let hi = (lo + 1).min(n_src - 1);
                    let w = pos - lo as f64;
                    for (r, row) in x.rows().into_iter().enumerate() {
                        out[[r, i]] = row[lo] * (1.0 - w) + row[hi] * w;
                    }
                }
                out
            }
        }
    }

    /// Adjoint of `apply`: scatters a gradient over adapter outputs back to
    /// the adapter's input coordinates.
    pub(crate) fn apply_transpose(&self, grad_out: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(grad_out.ncols(), self.out_dim, "adapter grad width");
        match self.mode {
            AdapterMode::Identity => grad_out.to_owned(),
            AdapterMode::LinearResample => {
                let n_src = self.in_dim;
                let n_dst = self.out_dim;
                let mut out = Array2::zeros((grad_out.nrows(), n_src));
                for i in 0..n_dst {
                    let pos = if n_dst > 1 {
                        i as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64
                    } else {
                        0.0
                    };
                    let lo = pos.floor() as usize;
                    let hi = (lo + 1).min(n_src - 1);
                    let w = pos - lo as f64;
                    for (r, row) in grad_out.rows().into_iter().enumerate() {
                        out[[r, lo]] += row[i] * (1.0 - w);
                        out[[r, hi]] += row[i] * w;
                    }
                }
                out
            }
        }
    }
}

/// Lateral gates for one component, laid out as `rows[i - 2][parent_j]`
/// where `i` is the 1-based child layer index (gates start at layer 2).
#[derive(Debug, Clone, Default)]
pub struct GateSet {
    pub rows: Vec<Vec<DenseLayer>>,
}

impl GateSet {
    fn param_count(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|g| g.param_count())
            .sum()
    }
}

/// Frozen parents plus one trainable child, wired by lateral gates.
#[derive(Debug, Clone)]
pub struct ProgressiveStack {
    /// Parents first (in attach order), child last.
    pub columns: Vec<Column>,
    pub adapters: Vec<InputAdapter>,
    pub encoder_gates: GateSet,
    pub decoder_gates: GateSet,
    pub projector_gates: GateSet,
}

/// Activations from a read-only progressive forward pass.
/// `per_column[j][i]` is column j's layer-i output; index 0 holds the
/// column's own input (post-adapter for encoders).
pub struct ComponentForward {
    pub per_column: Vec<Vec<Array2<f64>>>,
}

impl ComponentForward {
    /// The child column's final output.
    pub fn output(&self) -> &Array2<f64> {
        self.per_column
            .last()
            .and_then(|acts| acts.last())
            .expect("non-empty stack")
    }
}

/// Frozen-parent activation traces captured by a training forward pass;
/// entry j is parent j's chain [input, h_1, ..., h_L]. Backward folds the
/// gate-injected gradients through these to reach the shared input.
pub struct ParentTrace {
    acts: Vec<Vec<Array2<f64>>>,
}

/// Parameter gradients for one component in update order: child layers
/// ascending, then gates by (layer, parent).
pub struct ComponentGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub gates: Vec<Vec<(Array2<f64>, Array1<f64>)>>,
}

impl ComponentGrads {
    /// Flatten to optimizer order: layer w, layer b, ..., gate w, gate b, ...
    pub fn flat_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("contiguous"));
        }
        for row in &self.gates {
            for (w, b) in row {
                out.push(w.as_slice().expect("standard layout"));
                out.push(b.as_slice().expect("contiguous"));
            }
        }
        out
    }
}

fn zero_gates(parents: &[Column], child_arch: &ColumnArch, component: Component) -> GateSet {
    let child_widths = child_arch.widths(component);
    let n_layers = child_widths.len() - 1;
    let mut rows = Vec::new();
    for i in 2..=n_layers {
        let mut row = Vec::new();
        for parent in parents {
            let parent_widths = parent.arch.widths(component);
            // Same depth is validated at attach time.
            let in_dim = parent_widths[i - 1];
            let out_dim = child_widths[i];
            row.push(DenseLayer::zeros(in_dim, out_dim, Activation::Identity));
        }
        rows.push(row);
    }
    GateSet { rows }
}

/// Build a child column, wire it to the given frozen parents, and return the
/// stack. With `InitMode::ParentAverage`, shape-matching child layers start
/// from the mean of the matching parents' weights.
pub fn attach_child(
    parents: Vec<Column>,
    child_dof: usize,
    latent_dim: usize,
    projector_dim: usize,
    seed: u64,
    init: InitMode,
) -> Result<ProgressiveStack> {
    for (j, parent) in parents.iter().enumerate() {
        if !parent.frozen {
            return Err(Error::InvalidConfig(format!(
                "parent {j} must be frozen before a child attaches to it"
            )));
        }
        if parent.arch.latent_dim != latent_dim {
            return Err(Error::InvalidConfig(format!(
                "parent {j} has latent width {}, child wants {latent_dim}; a stack shares one latent width",
                parent.arch.latent_dim
            )));
        }
    }
    let mut child = Column::from_arch(ColumnArch::halving(child_dof, latent_dim, projector_dim)?, seed);

    for component in Component::ALL {
        let n_child_layers = child.arch.widths(component).len() - 1;
        for (j, parent) in parents.iter().enumerate() {
            let n_parent_layers = parent.arch.widths(component).len() - 1;
            if n_parent_layers != n_child_layers {
                return Err(Error::shape(
                    format!("parent {j} {} depth", component.name()),
                    format!("{n_child_layers} layers"),
                    format!("{n_parent_layers}"),
                ));
            }
        }
    }

    if init == InitMode::ParentAverage && !parents.is_empty() {
        for component in Component::ALL {
            let n_layers = child.arch.widths(component).len() - 1;
            for li in 0..n_layers {
                let shape = {
                    let l = &child.layers(component)[li];
                    (l.out_dim(), l.in_dim())
                };
                let matching: Vec<&DenseLayer> = parents
                    .iter()
                    .map(|p| &p.layers(component)[li])
                    .filter(|l| (l.out_dim(), l.in_dim()) == shape)
                    .collect();
                if matching.is_empty() {
                    continue;
                }
                let scale = 1.0 / matching.len() as f64;
                let mut w = Array2::zeros(shape);
                let mut b = Array1::zeros(shape.0);
                for l in &matching {
                    w += l.weights();
                    b += l.bias();
                }
                w *= scale;
                b *= scale;
                child.layers_mut(component)[li].set_params(w, b);
            }
        }
    }

    let adapters = parents
        .iter()
        .map(|p| InputAdapter::new(child_dof, p.arch.dof))
        .collect();
    let encoder_gates = zero_gates(&parents, &child.arch, Component::Encoder);
    let decoder_gates = zero_gates(&parents, &child.arch, Component::Decoder);
    let projector_gates = zero_gates(&parents, &child.arch, Component::Projector);

    let mut columns = parents;
    columns.push(child);
    Ok(ProgressiveStack {
        columns,
        adapters,
        encoder_gates,
        decoder_gates,
        projector_gates,
    })
}

/// Wrap an existing column as a parentless stack (the degenerate case the
/// plain training entry point uses).
pub fn solo_stack(column: Column) -> ProgressiveStack {
    ProgressiveStack {
        columns: vec![column],
        adapters: Vec::new(),
        encoder_gates: GateSet::default(),
        decoder_gates: GateSet::default(),
        projector_gates: GateSet::default(),
    }
}

/// Per-column and gate parameter counts for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct ParameterCounts {
    pub columns: Vec<ColumnParamCounts>,
    pub gates: ComponentTotals,
    pub trainable_total: usize,
    pub frozen_total: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnParamCounts {
    pub dof: usize,
    pub frozen: bool,
    pub encoder: usize,
    pub decoder: usize,
    pub projector: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentTotals {
    pub encoder: usize,
    pub decoder: usize,
    pub projector: usize,
    pub total: usize,
}

impl ProgressiveStack {
    pub fn n_parents(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn child(&self) -> &Column {
        self.columns.last().expect("stack has a child")
    }

    pub fn child_mut(&mut self) -> &mut Column {
        self.columns.last_mut().expect("stack has a child")
    }

    pub fn gates(&self, component: Component) -> &GateSet {
        match component {
            Component::Encoder => &self.encoder_gates,
            Component::Decoder => &self.decoder_gates,
            Component::Projector => &self.projector_gates,
        }
    }

    pub fn gates_mut(&mut self, component: Component) -> &mut GateSet {
        match component {
            Component::Encoder => &mut self.encoder_gates,
            Component::Decoder => &mut self.decoder_gates,
            Component::Projector => &mut self.projector_gates,
        }
    }

    fn expected_input_width(&self, component: Component) -> usize {
        match component {
            Component::Encoder => self.child().arch.dof,
            Component::Decoder | Component::Projector => self.child().arch.latent_dim,
        }
    }

    /// The input column j sees: adapted for encoders, shared for the
    /// latent-fed components.
    fn column_input(&self, component: Component, j: usize, input: ArrayView2<f64>) -> Array2<f64> {
        if component == Component::Encoder && j < self.n_parents() {
            self.adapters[j].apply(input)
        } else {
            input.to_owned()
        }
    }

    /// Read-only progressive forward pass through one component.
    pub fn forward_component(&self, component: Component, input: ArrayView2<f64>) -> Result<ComponentForward> {
        let expected = self.expected_input_width(component);
        if input.ncols() != expected {
            return Err(Error::shape(
                format!("progressive {} input", component.name()),
                format!("{expected} columns"),
                format!("{}", input.ncols()),
            ));
        }
        let n_parents = self.n_parents();
        let mut per_column: Vec<Vec<Array2<f64>>> = Vec::with_capacity(self.columns.len());

        // Parents: plain frozen forward, keeping every activation.
        for j in 0..n_parents {
            let mut acts = vec![self.column_input(component, j, input)];
            for layer in self.columns[j].layers(component) {
                let next = layer.infer(acts.last().unwrap().view());
                acts.push(next);
            }
            per_column.push(acts);
        }

        // Child: lateral sums join from layer 2 on.
        let child = self.child();
        let gates = self.gates(component);
        let mut acts = vec![self.column_input(component, n_parents, input)];
        for (li, layer) in child.layers(component).iter().enumerate() {
            let i = li + 1;
            let lateral = if i >= 2 && n_parents > 0 {
                let mut sum: Option<Array2<f64>> = None;
                for (j, gate) in gates.rows[i - 2].iter().enumerate() {
                    let contribution = gate.infer(per_column[j][i - 1].view());
                    match &mut sum {
                        None => sum = Some(contribution),
                        Some(s) => *s += &contribution,
                    }
                }
                sum
            } else {
                None
            };
            let next = layer.infer_with_lateral(acts.last().unwrap().view(), lateral.as_ref());
            acts.push(next);
        }
        per_column.push(acts);
        Ok(ComponentForward { per_column })
    }

    /// Training forward: identical arithmetic to `forward_component`, but
    /// child layers and gates cache what their backward passes need, and the
    /// frozen parent activations are returned so backward can route gradient
    /// through the parent chains into the shared component input.
    pub fn forward_component_train(
        &mut self,
        component: Component,
        input: ArrayView2<f64>,
    ) -> (Array2<f64>, ParentTrace) {
        let n_parents = self.n_parents();

        // Parent activations feed the gates; parents themselves stay frozen.
        let mut parent_acts: Vec<Vec<Array2<f64>>> = Vec::with_capacity(n_parents);
        for j in 0..n_parents {
            let mut acts = vec![self.column_input(component, j, input)];
            for layer in self.columns[j].layers(component) {
                let next = layer.infer(acts.last().unwrap().view());
                acts.push(next);
            }
            parent_acts.push(acts);
        }

        let child_input = self.column_input(component, n_parents, input);
        let child_idx = self.columns.len() - 1;
        let gates = match component {
            Component::Encoder => &mut self.encoder_gates,
            Component::Decoder => &mut self.decoder_gates,
            Component::Projector => &mut self.projector_gates,
        };
        let child = &mut self.columns[child_idx];

        let mut h = child_input;
        for (li, layer) in child.layers_mut(component).iter_mut().enumerate() {
            let i = li + 1;
            let lateral = if i >= 2 && n_parents > 0 {
                let mut sum: Option<Array2<f64>> = None;
                for (j, gate) in gates.rows[i - 2].iter_mut().enumerate() {
                    let contribution = gate.forward(parent_acts[j][i - 1].view());
                    match &mut sum {
                        None => sum = Some(contribution),
                        Some(s) => *s += &contribution,
                    }
                }
                sum
            } else {
                None
            };
            h = layer.forward_with_lateral(h.view(), lateral.as_ref());
        }
        (h, ParentTrace { acts: parent_acts })
    }

    /// Backward through the child and its gates. Returns (input gradient,
    /// parameter gradients in update order). Parent *parameters* receive no
    /// gradient, but because every column reads the same component input,
    /// gradient does flow through the frozen parent chains back into that
    /// input — without it, anything upstream (the encoder, when this is the
    /// decoder or projector) would see a truncated gradient.
    pub fn backward_component(
        &mut self,
        component: Component,
        upstream: &Array2<f64>,
        trace: ParentTrace,
    ) -> Result<(Array2<f64>, ComponentGrads)> {
        let n_parents = self.n_parents();
        assert_eq!(trace.acts.len(), n_parents, "trace is from this stack's forward");
        let child_idx = self.columns.len() - 1;
        let gates = match component {
            Component::Encoder => &mut self.encoder_gates,
            Component::Decoder => &mut self.decoder_gates,
            Component::Projector => &mut self.projector_gates,
        };
        let child = &mut self.columns[child_idx];
        let layers = child.layers_mut(component);
        let n_layers = layers.len();

        let mut layer_grads: Vec<Option<(Array2<f64>, Array1<f64>)>> = (0..n_layers).map(|_| None).collect();
        let mut gate_grads: Vec<Vec<Option<(Array2<f64>, Array1<f64>)>>> = gates
            .rows
            .iter()
            .map(|row| row.iter().map(|_| None).collect())
            .collect();
        // grad_parent[j][i] accumulates dL/d(parent j's layer-i output);
        // slot 0 is the parent's (post-adapter) input.
        let mut grad_parent: Vec<Vec<Option<Array2<f64>>>> = trace
            .acts
            .iter()
            .map(|acts| acts.iter().map(|_| None).collect())
            .collect();

        let mut grad = upstream.clone();
        for li in (0..n_layers).rev() {
            let i = li + 1;
            let back = layers[li].backward(&grad)?;
            if i >= 2 && n_parents > 0 {
                for (j, gate) in gates.rows[i - 2].iter_mut().enumerate() {
                    let gate_back = gate.backward(&back.pre_grad)?;
                    gate_grads[i - 2][j] = Some((gate_back.w_grad, gate_back.b_grad));
                    match &mut grad_parent[j][i - 1] {
                        None => grad_parent[j][i - 1] = Some(gate_back.input_grad),
                        Some(g) => *g += &gate_back.input_grad,
                    }
                }
            }
            layer_grads[li] = Some((back.w_grad, back.b_grad));
            grad = back.input_grad;
        }

        // Sweep each frozen parent chain top-down, folding gate-injected
        // gradients through the parents' own (fixed) layers.
        for (j, acts) in trace.acts.iter().enumerate() {
            let parent_layers = self.columns[j].layers(component);
            for i in (1..acts.len()).rev() {
                let Some(gh) = grad_parent[j][i].take() else {
                    continue;
                };
                let layer = &parent_layers[i - 1];
                let activation = layer.activation();
                let mut g_pre = gh;
                ndarray::Zip::from(&mut g_pre)
                    .and(&acts[i])
                    .for_each(|g, &post| *g *= activation.derivative_from_output(post));
                let down = g_pre.dot(layer.weights());
                match &mut grad_parent[j][i - 1] {
                    None => grad_parent[j][i - 1] = Some(down),
                    Some(g) => *g += &down,
                }
            }
            if let Some(g_in) = grad_parent[j][0].take() {
                let contribution = if component == Component::Encoder {
                    self.adapters[j].apply_transpose(g_in.view())
                } else {
                    g_in
                };
                grad += &contribution;
            }
        }

        Ok((
            grad,
            ComponentGrads {
                layers: layer_grads.into_iter().map(|g| g.expect("filled")).collect(),
                gates: gate_grads
                    .into_iter()
                    .map(|row| row.into_iter().map(|g| g.expect("filled")).collect())
                    .collect(),
            },
        ))
    }

    /// Mutable parameter slices for the given components, in the exact
    /// order `ComponentGrads::flat_slices` produces gradients. Each
    /// component may be listed at most once.
    pub fn param_slices_mut(&mut self, components: &[Component]) -> Vec<&mut [f64]> {
        // Borrow every trainable piece exactly once up front so disjoint
        // components can hand out slices side by side.
        let ProgressiveStack {
            columns,
            encoder_gates,
            decoder_gates,
            projector_gates,
            ..
        } = self;
        let child = columns.last_mut().expect("stack has a child column");
        let Column {
            encoder,
            decoder,
            projector,
            ..
        } = child;
        let mut layer_sets = [Some(encoder), Some(decoder), Some(projector)];
        let mut gate_sets = [Some(encoder_gates), Some(decoder_gates), Some(projector_gates)];
        let slot = |c: Component| match c {
            Component::Encoder => 0,
            Component::Decoder => 1,
            Component::Projector => 2,
        };
        let mut out: Vec<&mut [f64]> = Vec::new();
        for &component in components {
            let layers = layer_sets[slot(component)]
                .take()
                .expect("component listed at most once");
            for layer in layers.iter_mut() {
                let (w, b) = layer.params_mut();
                out.push(w);
                out.push(b);
            }
            let gates = gate_sets[slot(component)]
                .take()
                .expect("component listed at most once");
            for row in gates.rows.iter_mut() {
                for gate in row.iter_mut() {
                    let (w, b) = gate.params_mut();
                    out.push(w);
                    out.push(b);
                }
            }
        }
        out
    }

    /// Raw-field reconstruction through the full progressive path
    /// (child scaler, gated encoder, gated decoder).
    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.encode(x)?;
        self.decode(z.view())
    }

    /// Scale with the child's scaler and run the gated encoder.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.child().arch.dof {
            return Err(Error::shape(
                "stack encode input",
                format!("{} columns", self.child().arch.dof),
                format!("{}", x.ncols()),
            ));
        }
        let scaled = self.child().scaler.scale_array(&x);
        Ok(self
            .forward_component(Component::Encoder, scaled.view())?
            .output()
            .clone())
    }

    /// Run the gated decoder on latents and unscale with the child's scaler.
    pub fn decode(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = self
            .forward_component(Component::Decoder, z)?
            .output()
            .clone();
        self.child().scaler.unscale_array_in_place(&mut out);
        Ok(out)
    }

    /// Reconstruction through column `j` alone for parents; the child index
    /// uses the full progressive path (nothing comes after the child, so the
    /// gates feeding it stay in play).
    pub fn predict_with_column(&self, j: usize, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if j >= self.columns.len() {
            return Err(Error::InvalidConfig(format!(
                "column index {j} out of range for stack of {}",
                self.columns.len()
            )));
        }
        if j + 1 == self.columns.len() {
            self.reconstruct(x)
        } else {
            self.columns[j].reconstruct(x)
        }
    }

    pub fn count_parameters(&self) -> ParameterCounts {
        let columns: Vec<ColumnParamCounts> = self
            .columns
            .iter()
            .map(|c| {
                let encoder: usize = c.encoder.iter().map(|l| l.param_count()).sum();
                let decoder: usize = c.decoder.iter().map(|l| l.param_count()).sum();
                let projector: usize = c.projector.iter().map(|l| l.param_count()).sum();
                ColumnParamCounts {
                    dof: c.arch.dof,
                    frozen: c.frozen,
                    encoder,
                    decoder,
                    projector,
                    total: encoder + decoder + projector,
                }
            })
            .collect();
        let gates = ComponentTotals {
            encoder: self.encoder_gates.param_count(),
            decoder: self.decoder_gates.param_count(),
            projector: self.projector_gates.param_count(),
            total: self.encoder_gates.param_count()
                + self.decoder_gates.param_count()
                + self.projector_gates.param_count(),
        };
        let frozen_total: usize = columns.iter().filter(|c| c.frozen).map(|c| c.total).sum();
        let trainable_total: usize =
            columns.iter().filter(|c| !c.frozen).map(|c| c.total).sum::<usize>() + gates.total;
        ParameterCounts {
            total: frozen_total + trainable_total,
            columns,
            gates,
            trainable_total,
            frozen_total,
        }
    }

    pub fn clear_caches(&mut self) {
        for column in &mut self.columns {
            column.clear_caches();
        }
        for component in Component::ALL {
            for row in self.gates_mut(component).rows.iter_mut() {
                for gate in row.iter_mut() {
                    gate.clear_cache();
                }
            }
        }
    }
}
