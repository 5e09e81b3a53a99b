//! On-disk formats: column checkpoints, stack checkpoints (columns + gates
//! + optional latent interpolant), and snapshot bundles.
//!
//! Every directory pairs a `manifest.json` with binary payloads. Payloads
//! start with a 16-byte header (8-byte magic, u32 LE format version, u32
//! reserved) followed by little-endian f64 data; manifests store a SHA-256
//! digest per payload, checked on load. Nothing in a manifest depends on
//! when it was written, so identical inputs produce identical bytes.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::column::{Column, ColumnArch, Component, MinMaxScaler, HIDDEN_SLOPE};
use crate::datagen::{ProblemSpec, Sample, SnapshotSet, SplitLabel};
use crate::error::{Error, Result};
use crate::latent::RbfModel;
use crate::net::{Activation, DenseLayer};
use crate::progressive::{GateSet, InputAdapter, ProgressiveStack};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC_WEIGHTS: &[u8; 8] = b"PGRSWGT\0";
const MAGIC_GATES: &[u8; 8] = b"PGRSGAT\0";
const MAGIC_RBF: &[u8; 8] = b"PGRSRBF\0";
const MAGIC_DATA: &[u8; 8] = b"PGRSDAT\0";

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

fn header(magic: &[u8; 8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out
}

fn check_header<'a>(bytes: &'a [u8], magic: &[u8; 8], path: &Path) -> Result<&'a [u8]> {
    if bytes.len() < 16 {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: "file shorter than its header".into(),
        });
    }
    if &bytes[..8] != magic {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: "wrong magic bytes".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: format!("format version {version}, expected {FORMAT_VERSION}"),
        });
    }
    Ok(&bytes[16..])
}

fn push_f64s<'a>(buf: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Sequential little-endian f64 reader over a payload.
struct F64Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> F64Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        F64Reader { bytes, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        let need = n * 8;
        if self.pos + need > self.bytes.len() {
            return Err(Error::BadFormat {
                path: self.path.display().to_string(),
                reason: format!(
                    "payload truncated: wanted {n} more values at offset {}",
                    self.pos
                ),
            });
        }
        let out = self.bytes[self.pos..self.pos + need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        self.pos += need;
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::BadFormat {
                path: self.path.display().to_string(),
                reason: format!(
                    "payload has {} trailing bytes",
                    self.bytes.len() - self.pos
                ),
            });
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_manifest<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_manifest<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    write_file(path, &bytes)
}

fn verify_digest(path: &Path, bytes: &[u8], expected: &str) -> Result<()> {
    let got = sha256_hex(bytes);
    if got != expected {
        return Err(Error::DigestMismatch {
            path: path.display().to_string(),
            expected: expected.to_string(),
            got,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Column checkpoints
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ColumnManifest {
    format_version: u32,
    arch: ColumnArch,
    scaler: MinMaxScaler,
    seed: u64,
    frozen: bool,
    weights_sha256: String,
}

fn layer_bytes(layers: &[DenseLayer], buf: &mut Vec<u8>) {
    for layer in layers {
        push_f64s(buf, layer.weights().iter());
        push_f64s(buf, layer.bias().iter());
    }
}

/// Write one column into `dir` (`manifest.json` + `weights.bin`).
pub fn write_column(dir: &Path, column: &Column) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut payload = header(MAGIC_WEIGHTS);
    for component in Component::ALL {
        layer_bytes(column.layers(component), &mut payload);
    }
    let weights_path = dir.join("weights.bin");
    write_file(&weights_path, &payload)?;
    let manifest = ColumnManifest {
        format_version: FORMAT_VERSION,
        arch: column.arch.clone(),
        scaler: column.scaler,
        seed: column.seed,
        frozen: column.frozen,
        weights_sha256: sha256_hex(&payload),
    };
    write_manifest(&dir.join("manifest.json"), &manifest)
}

/// Rebuild layers for one component from a reader, using the width list and
/// the standard activation rule (hidden leaky, final identity).
fn layers_from_reader(widths: &[usize], reader: &mut F64Reader) -> Result<Vec<DenseLayer>> {
    let n_layers = widths.len() - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for li in 0..n_layers {
        let (in_dim, out_dim) = (widths[li], widths[li + 1]);
        let w = Array2::from_shape_vec((out_dim, in_dim), reader.take(out_dim * in_dim)?)
            .expect("shape matches take");
        let b = Array1::from_vec(reader.take(out_dim)?);
        let activation = if li + 1 == n_layers {
            Activation::Identity
        } else {
            Activation::LeakyRelu { slope: HIDDEN_SLOPE }
        };
        layers.push(DenseLayer::from_parts(w, b, activation)?);
    }
    Ok(layers)
}

/// Load a column checkpoint, verifying digest and format.
pub fn read_column(dir: &Path) -> Result<Column> {
    let manifest: ColumnManifest = read_manifest(&dir.join("manifest.json"))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::BadFormat {
            path: dir.join("manifest.json").display().to_string(),
            reason: format!(
                "manifest format version {}, expected {FORMAT_VERSION}",
                manifest.format_version
            ),
        });
    }
    let weights_path = dir.join("weights.bin");
    let bytes = read_file(&weights_path)?;
    verify_digest(&weights_path, &bytes, &manifest.weights_sha256)?;
    let payload = check_header(&bytes, MAGIC_WEIGHTS, &weights_path)?;
    let mut reader = F64Reader::new(payload, &weights_path);
    let encoder = layers_from_reader(&manifest.arch.encoder_widths, &mut reader)?;
    let decoder = layers_from_reader(&manifest.arch.decoder_widths, &mut reader)?;
    let projector = layers_from_reader(&manifest.arch.projector_widths, &mut reader)?;
    reader.finish()?;
    Column::from_parts(
        manifest.arch,
        encoder,
        decoder,
        projector,
        manifest.scaler,
        manifest.seed,
        manifest.frozen,
    )
}

// ---------------------------------------------------------------------------
// Stack checkpoints
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct StackManifest {
    format_version: u32,
    n_columns: usize,
    adapters: Vec<InputAdapter>,
    gates_sha256: String,
    rbf_sha256: Option<String>,
}

fn gate_set_in_order(stack: &ProgressiveStack) -> Vec<&GateSet> {
    vec![&stack.encoder_gates, &stack.decoder_gates, &stack.projector_gates]
}

/// Write a full stack checkpoint: per-column subdirectories, the gate
/// payload, and optionally the fitted latent interpolant.
pub fn write_stack(dir: &Path, stack: &ProgressiveStack, rbf: Option<&RbfModel>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (j, column) in stack.columns.iter().enumerate() {
        write_column(&dir.join("columns").join(j.to_string()), column)?;
    }

    let mut gates_payload = header(MAGIC_GATES);
    for gates in gate_set_in_order(stack) {
        for row in &gates.rows {
            for gate in row {
                push_f64s(&mut gates_payload, gate.weights().iter());
                push_f64s(&mut gates_payload, gate.bias().iter());
            }
        }
    }
    let gates_path = dir.join("gates.bin");
    write_file(&gates_path, &gates_payload)?;

    let rbf_sha256 = match rbf {
        Some(model) => {
            let payload = rbf_bytes(model);
            write_file(&dir.join("rbf.bin"), &payload)?;
            Some(sha256_hex(&payload))
        }
        None => None,
    };

    let manifest = StackManifest {
        format_version: FORMAT_VERSION,
        n_columns: stack.columns.len(),
        adapters: stack.adapters.clone(),
        gates_sha256: sha256_hex(&gates_payload),
        rbf_sha256,
    };
    write_manifest(&dir.join("manifest.json"), &manifest)
}

fn expected_gate_shapes(columns: &[Column], component: Component) -> Vec<Vec<(usize, usize)>> {
    let n_parents = columns.len() - 1;
    let child = columns.last().expect("non-empty");
    let child_widths = child.arch.widths(component);
    let n_layers = child_widths.len() - 1;
    let mut rows = Vec::new();
    if n_parents == 0 {
        return rows;
    }
    for i in 2..=n_layers {
        let mut row = Vec::new();
        for parent in &columns[..n_parents] {
            let pw = parent.arch.widths(component);
            row.push((child_widths[i], pw[i - 1]));
        }
        rows.push(row);
    }
    rows
}

/// Load a stack checkpoint (and its interpolant when present).
pub fn read_stack(dir: &Path) -> Result<(ProgressiveStack, Option<RbfModel>)> {
    let manifest: StackManifest = read_manifest(&dir.join("manifest.json"))?;
    if manifest.n_columns == 0 {
        return Err(Error::BadFormat {
            path: dir.join("manifest.json").display().to_string(),
            reason: "stack with zero columns".into(),
        });
    }
    let mut columns = Vec::with_capacity(manifest.n_columns);
    for j in 0..manifest.n_columns {
        columns.push(read_column(&dir.join("columns").join(j.to_string()))?);
    }
    if manifest.adapters.len() + 1 != manifest.n_columns {
        return Err(Error::BadFormat {
            path: dir.join("manifest.json").display().to_string(),
            reason: format!(
                "{} adapters for {} columns",
                manifest.adapters.len(),
                manifest.n_columns
            ),
        });
    }

    let gates_path = dir.join("gates.bin");
    let bytes = read_file(&gates_path)?;
    verify_digest(&gates_path, &bytes, &manifest.gates_sha256)?;
    let payload = check_header(&bytes, MAGIC_GATES, &gates_path)?;
    let mut reader = F64Reader::new(payload, &gates_path);
    let mut gate_sets = Vec::with_capacity(3);
    for component in Component::ALL {
        let shapes = expected_gate_shapes(&columns, component);
        let mut rows = Vec::with_capacity(shapes.len());
        for shape_row in shapes {
            let mut row = Vec::with_capacity(shape_row.len());
            for (out_dim, in_dim) in shape_row {
                let w = Array2::from_shape_vec((out_dim, in_dim), reader.take(out_dim * in_dim)?)
                    .expect("shape matches take");
                let b = Array1::from_vec(reader.take(out_dim)?);
                row.push(DenseLayer::from_parts(w, b, Activation::Identity)?);
            }
            rows.push(row);
        }
        gate_sets.push(GateSet { rows });
    }
    reader.finish()?;
    let projector_gates = gate_sets.pop().expect("three sets");
    let decoder_gates = gate_sets.pop().expect("three sets");
    let encoder_gates = gate_sets.pop().expect("three sets");

    let rbf = match manifest.rbf_sha256 {
        Some(expected) => {
            let rbf_path = dir.join("rbf.bin");
            let bytes = read_file(&rbf_path)?;
            verify_digest(&rbf_path, &bytes, &expected)?;
            Some(rbf_from_bytes(&bytes, &rbf_path)?)
        }
        None => None,
    };

    Ok((
        ProgressiveStack {
            columns,
            adapters: manifest.adapters,
            encoder_gates,
            decoder_gates,
            projector_gates,
        },
        rbf,
    ))
}

// ---------------------------------------------------------------------------
// RBF payload
// ---------------------------------------------------------------------------

fn rbf_bytes(model: &RbfModel) -> Vec<u8> {
    let mut payload = header(MAGIC_RBF);
    payload.extend_from_slice(&(model.n_centers() as u64).to_le_bytes());
    payload.extend_from_slice(&(model.input_dim() as u64).to_le_bytes());
    payload.extend_from_slice(&(model.latent_dim() as u64).to_le_bytes());
    payload.extend_from_slice(&model.ridge.to_le_bytes());
    for &(lo, hi) in &model.ranges {
        payload.extend_from_slice(&lo.to_le_bytes());
        payload.extend_from_slice(&hi.to_le_bytes());
    }
    push_f64s(&mut payload, model.centers.iter());
    push_f64s(&mut payload, model.coefficients.iter());
    payload
}

fn rbf_from_bytes(bytes: &[u8], path: &Path) -> Result<RbfModel> {
    let payload = check_header(bytes, MAGIC_RBF, path)?;
    if payload.len() < 32 {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: "interpolant payload shorter than its size fields".into(),
        });
    }
    let n = u64::from_le_bytes(payload[0..8].try_into().expect("8")) as usize;
    let d = u64::from_le_bytes(payload[8..16].try_into().expect("8")) as usize;
    let q = u64::from_le_bytes(payload[16..24].try_into().expect("8")) as usize;
    let ridge = f64::from_le_bytes(payload[24..32].try_into().expect("8"));
    let mut reader = F64Reader::new(&payload[32..], path);
    let range_flat = reader.take(2 * d)?;
    let ranges = range_flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let centers = Array2::from_shape_vec((n, d), reader.take(n * d)?).expect("shape matches take");
    let coefficients = Array2::from_shape_vec((n, q), reader.take(n * q)?).expect("shape matches take");
    reader.finish()?;
    Ok(RbfModel {
        centers,
        coefficients,
        ranges,
        ridge,
    })
}

// ---------------------------------------------------------------------------
// Snapshot bundles
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SampleMeta {
    mu: Vec<f64>,
    timestamps: Vec<f64>,
    n_rows: usize,
    split: SplitLabel,
    validation_rows: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleManifest {
    format_version: u32,
    spec: ProblemSpec,
    samples: Vec<SampleMeta>,
    data_sha256: String,
}

/// Write a snapshot bundle (`manifest.json` + `data.bin`).
pub fn write_bundle(dir: &Path, set: &SnapshotSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut payload = header(MAGIC_DATA);
    for sample in &set.samples {
        push_f64s(&mut payload, sample.fields.iter());
    }
    let data_path = dir.join("data.bin");
    write_file(&data_path, &payload)?;
    let manifest = BundleManifest {
        format_version: FORMAT_VERSION,
        spec: set.spec.clone(),
        samples: set
            .samples
            .iter()
            .map(|s| SampleMeta {
                mu: s.mu.clone(),
                timestamps: s.timestamps.clone(),
                n_rows: s.fields.nrows(),
                split: s.split,
                validation_rows: s.validation_rows.clone(),
            })
            .collect(),
        data_sha256: sha256_hex(&payload),
    };
    write_manifest(&dir.join("manifest.json"), &manifest)
}

/// Load a snapshot bundle.
pub fn read_bundle(dir: &Path) -> Result<SnapshotSet> {
    let manifest: BundleManifest = read_manifest(&dir.join("manifest.json"))?;
    let data_path = dir.join("data.bin");
    let bytes = read_file(&data_path)?;
    verify_digest(&data_path, &bytes, &manifest.data_sha256)?;
    let payload = check_header(&bytes, MAGIC_DATA, &data_path)?;
    let mut reader = F64Reader::new(payload, &data_path);
    let dof = manifest.spec.dof();
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for meta in manifest.samples {
        let fields = Array2::from_shape_vec((meta.n_rows, dof), reader.take(meta.n_rows * dof)?)
            .expect("shape matches take");
        samples.push(Sample {
            mu: meta.mu,
            timestamps: meta.timestamps,
            fields,
            split: meta.split,
            validation_rows: meta.validation_rows,
        });
    }
    reader.finish()?;
    Ok(SnapshotSet {
        spec: manifest.spec,
        samples,
    })
}

/// True when `dir` looks like a stack checkpoint (vs. a bare column).
pub fn stack_dir_exists(dir: &Path) -> bool {
    dir.join("manifest.json").is_file() && dir.join("gates.bin").is_file()
}
