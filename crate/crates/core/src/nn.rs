//! Feed-forward network: definition, forward pass, softmax cross-entropy
//! loss, exact reverse-mode gradient, and checkpoint I/O.
//!
//! All parameters of a network live in one flat [`ParameterVector`] with a
//! frozen packing order (version 1): layers in order, and within each layer
//! mapping `d_in -> d_out` first the weight matrix in row-major `(d_out,
//! d_in)` order (`w[o * d_in + i]`), then the `d_out` biases. Checkpoints
//! and gradients use the same layout.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngState;

pub const PACKING_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &[u8; 8] = b"MLPCKPT1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation value `a = act(z)`.
    /// For relu the kink at 0 takes derivative 0.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Architecture of a multilayer perceptron: `layer_sizes` runs from input
/// dimension through hidden widths to class count; `activation` applies to
/// hidden layers and the final affine layer emits logits.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

/// Shape and packing offsets of one affine layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub d_in: usize,
    pub d_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least input and output sizes, got {:?}",
                layer_sizes
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "all layer sizes must be positive, got {:?}",
                layer_sizes
            )));
        }
        Ok(NetworkSpec {
            layer_sizes,
            activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total parameter count: sum over layers of `d_in * d_out + d_out`.
    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.d_in * l.d_out + l.d_out).sum()
    }

    /// Layers in packing order with their offsets into the flat vector.
    pub fn layers(&self) -> impl Iterator<Item = LayerShape> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let (d_in, d_out) = (w[0], w[1]);
            let shape = LayerShape {
                d_in,
                d_out,
                weight_offset: offset,
                bias_offset: offset + d_in * d_out,
            };
            offset += d_in * d_out + d_out;
            shape
        })
    }

    fn check_params(&self, w: &ParameterVector) -> Result<()> {
        if w.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: w.len(),
                context: "parameter vector length",
            });
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.cols(),
                context: "input feature dimension",
            });
        }
        Ok(())
    }
}

/// Flat vector of all weights and biases in packing order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        ParameterVector {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Gradient of the mean batch loss, same length and packing as the
/// parameter vector it was computed against.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
}

impl GradientVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Draw initial weights: per layer, zero-mean normals with variance
/// `2/fan_in` for relu and `1/fan_in` for tanh; biases zero. Draw order
/// equals packing order.
pub fn init_weights(spec: &NetworkSpec, rng: &mut RngState) -> ParameterVector {
    let mut values = vec![0.0; spec.param_count()];
    let gain = match spec.activation() {
        Activation::Relu => 2.0,
        Activation::Tanh => 1.0,
    };
    for layer in spec.layers() {
        let std = (gain / layer.d_in as f64).sqrt();
        for k in 0..layer.d_in * layer.d_out {
            values[layer.weight_offset + k] = std * rng.standard_normal();
        }
        // biases stay zero
    }
    ParameterVector { values }
}

/// Forward pass producing logits, one row per input row.
pub fn forward(spec: &NetworkSpec, w: &ParameterVector, inputs: &Matrix) -> Result<Matrix> {
    spec.check_params(w)?;
    spec.check_inputs(inputs)?;
    let (logits, _) = forward_trace(spec, w, inputs, false);
    Ok(logits)
}

/// Forward pass, optionally retaining hidden activations for backprop.
/// Dimensions must already be checked.
fn forward_trace(
    spec: &NetworkSpec,
    w: &ParameterVector,
    inputs: &Matrix,
    keep_hidden: bool,
) -> (Matrix, Vec<Matrix>) {
    let batch = inputs.rows();
    let layer_count = spec.layer_sizes().len() - 1;
    let mut hidden: Vec<Matrix> = Vec::new();
    let mut current = inputs.clone();

    for (l, layer) in spec.layers().enumerate() {
        let is_output = l == layer_count - 1;
        let mut next = Matrix::zeros(batch, layer.d_out);
        let weights = &w.values[layer.weight_offset..layer.weight_offset + layer.d_in * layer.d_out];
        let biases = &w.values[layer.bias_offset..layer.bias_offset + layer.d_out];
        for s in 0..batch {
            let x = current.row(s);
            let out = next.row_mut(s);
            for o in 0..layer.d_out {
                let row = &weights[o * layer.d_in..(o + 1) * layer.d_in];
                let mut z = biases[o];
                for i in 0..layer.d_in {
                    z += row[i] * x[i];
                }
                out[o] = if is_output {
                    z
                } else {
                    spec.activation().apply(z)
                };
            }
        }
        if keep_hidden && !is_output {
            hidden.push(next.clone());
        }
        current = next;
    }
    (current, hidden)
}

/// Row-wise softmax probabilities with max-subtraction, plus the mean
/// cross-entropy against `labels`.
fn softmax_and_loss(logits: &Matrix, labels: &[usize]) -> Result<(Matrix, f64)> {
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            expected: logits.rows(),
            got: labels.len(),
            context: "one label per logit row",
        });
    }
    if logits.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let classes = logits.cols();
    let mut probs = Matrix::zeros(logits.rows(), classes);
    let mut total = 0.0;
    for (s, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                class_count: classes,
                row: s,
            });
        }
        let row = logits.row(s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let out = probs.row_mut(s);
        for (o, &z) in row.iter().enumerate() {
            let e = (z - max).exp();
            out[o] = e;
            sum += e;
        }
        for p in out.iter_mut() {
            *p /= sum;
        }
        // -log softmax[label] = log(sum) - (z_label - max)
        total += sum.ln() - (row[label] - max);
    }
    Ok((probs, total / logits.rows() as f64))
}

/// Mean softmax cross-entropy of `logits` against class labels.
pub fn loss(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    softmax_and_loss(logits, labels).map(|(_, l)| l)
}

/// Number of rows whose argmax logit equals the label. Ties break toward
/// the lowest class index.
pub fn correct_predictions(logits: &Matrix, labels: &[usize]) -> Result<usize> {
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            expected: logits.rows(),
            got: labels.len(),
            context: "one label per logit row",
        });
    }
    if logits.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let classes = logits.cols();
    let mut correct = 0usize;
    for (s, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                class_count: classes,
                row: s,
            });
        }
        let row = logits.row(s);
        let mut best = 0usize;
        for (o, &z) in row.iter().enumerate() {
            if z > row[best] {
                best = o;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Fraction of rows classified correctly; see [`correct_predictions`].
pub fn accuracy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    Ok(correct_predictions(logits, labels)? as f64 / logits.rows() as f64)
}

/// Mean batch loss and its exact gradient with respect to every parameter.
pub fn loss_and_gradient(
    spec: &NetworkSpec,
    w: &ParameterVector,
    inputs: &Matrix,
    labels: &[usize],
) -> Result<(f64, GradientVector)> {
    spec.check_params(w)?;
    spec.check_inputs(inputs)?;
    if inputs.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let batch = inputs.rows();
    let (logits, hidden) = forward_trace(spec, w, inputs, true);
    let (probs, loss_value) = softmax_and_loss(&logits, labels)?;

    let layers: Vec<LayerShape> = spec.layers().collect();
    let mut grad = vec![0.0; spec.param_count()];

    // d loss / d logits = (softmax - onehot) / batch
    let mut delta = probs;
    for s in 0..batch {
        let row = delta.row_mut(s);
        row[labels[s]] -= 1.0;
        for v in row.iter_mut() {
            *v /= batch as f64;
        }
    }

    for (l, layer) in layers.iter().enumerate().rev() {
        let below: &Matrix = if l == 0 { inputs } else { &hidden[l - 1] };
        let weights = &w.values[layer.weight_offset..layer.weight_offset + layer.d_in * layer.d_out];

        for s in 0..batch {
            let d = delta.row(s);
            let a = below.row(s);
            for o in 0..layer.d_out {
                let g_row =
                    &mut grad[layer.weight_offset + o * layer.d_in..layer.weight_offset + (o + 1) * layer.d_in];
                let dv = d[o];
                for i in 0..layer.d_in {
                    g_row[i] += dv * a[i];
                }
                grad[layer.bias_offset + o] += dv;
            }
        }

        if l > 0 {
            // propagate: delta_below = (delta W) ⊙ act'(a_below)
            let mut next_delta = Matrix::zeros(batch, layer.d_in);
            for s in 0..batch {
                let d = delta.row(s);
                let a = below.row(s);
                let nd = next_delta.row_mut(s);
                for o in 0..layer.d_out {
                    let dv = d[o];
                    let w_row = &weights[o * layer.d_in..(o + 1) * layer.d_in];
                    for i in 0..layer.d_in {
                        nd[i] += dv * w_row[i];
                    }
                }
                for i in 0..layer.d_in {
                    nd[i] *= spec.activation().derivative_from_output(a[i]);
                }
            }
            delta = next_delta;
        }
    }

    Ok((loss_value, GradientVector { values: grad }))
}

/// Write `spec` and `w` to a checkpoint file.
///
/// Layout (all integers little-endian):
/// magic `MLPCKPT1`, packing version u32, activation u8 (0 relu, 1 tanh),
/// layer count u32, layer sizes u32 each, parameter count u64, then raw
/// IEEE-754 f64 parameter values in packing order.
pub fn save_checkpoint(path: &Path, spec: &NetworkSpec, w: &ParameterVector) -> Result<()> {
    spec.check_params(w)?;
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf: Vec<u8> = Vec::with_capacity(32 + w.len() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&PACKING_VERSION.to_le_bytes());
    buf.push(match spec.activation() {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    });
    buf.extend_from_slice(&(spec.layer_sizes().len() as u32).to_le_bytes());
    for &s in spec.layer_sizes() {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(w.len() as u64).to_le_bytes());
    for &v in &w.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(&buf).map_err(io_err)
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(NetworkSpec, ParameterVector)> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |reason: String| Error::BadCheckpoint {
        path: path.to_path_buf(),
        reason,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut bytes)
        .map_err(io_err)?;

    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        if pos + n > bytes.len() {
            return Err(bad(format!("truncated at byte {pos}")));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };

    if take(8)? != CHECKPOINT_MAGIC {
        return Err(bad("wrong magic".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != PACKING_VERSION {
        return Err(bad(format!("unsupported packing version {version}")));
    }
    let activation = match take(1)?[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        a => return Err(bad(format!("unknown activation code {a}"))),
    };
    let layer_count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut sizes = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        sizes.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
    }
    let spec = NetworkSpec::new(sizes, activation)
        .map_err(|e| bad(format!("invalid stored spec: {e}")))?;
    let param_count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    if param_count != spec.param_count() {
        return Err(bad(format!(
            "parameter count {param_count} does not match spec ({})",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(param_count);
    for _ in 0..param_count {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    Ok((spec, ParameterVector { values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn init_rng(seed: u64) -> RngState {
        RngState::new_master(seed).substream(Purpose::Init)
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(vec![4], Activation::Relu).is_err());
        assert!(NetworkSpec::new(vec![4, 0, 2], Activation::Relu).is_err());
        let s = NetworkSpec::new(vec![3, 5, 2], Activation::Relu).unwrap();
        assert_eq!(s.param_count(), 3 * 5 + 5 + 5 * 2 + 2);
    }

    #[test]
    fn init_biases_are_zero() {
        let spec = NetworkSpec::new(vec![4, 3, 2], Activation::Relu).unwrap();
        let w = init_weights(&spec, &mut init_rng(1));
        for layer in spec.layers() {
            for o in 0..layer.d_out {
                assert_eq!(w.values[layer.bias_offset + o], 0.0);
            }
        }
    }

    #[test]
    fn init_he_variance_for_relu() {
        // fan_in 100, relu: target variance 2/100 = 0.02, check over 10^4+ weights
        let spec = NetworkSpec::new(vec![100, 120, 2], Activation::Relu).unwrap();
        let w = init_weights(&spec, &mut init_rng(2));
        let layer = spec.layers().next().unwrap();
        let n = layer.d_in * layer.d_out;
        assert!(n >= 10_000);
        let ws = &w.values[layer.weight_offset..layer.weight_offset + n];
        let mean = ws.iter().sum::<f64>() / n as f64;
        let var = ws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 0.02).abs() < 0.2 * 0.02, "var = {var}");
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::new(vec![6, 4, 3], Activation::Tanh).unwrap();
        let a = init_weights(&spec, &mut init_rng(7));
        let b = init_weights(&spec, &mut init_rng(7));
        assert_eq!(a, b);
    }

    #[test]
    fn forward_zero_weights_gives_zero_logits() {
        let spec = NetworkSpec::new(vec![3, 4, 2], Activation::Relu).unwrap();
        let w = ParameterVector::zeros(spec.param_count());
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 0.5]).unwrap();
        let logits = forward(&spec, &w, &x).unwrap();
        assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_identity_relu_net() {
        // single layer 3 -> 3 with identity weights, relu on hidden layers
        // does not apply (it's the output layer), so logits equal inputs;
        // add a hidden identity layer to exercise relu on non-negatives.
        let spec = NetworkSpec::new(vec![3, 3, 3], Activation::Relu).unwrap();
        let mut w = ParameterVector::zeros(spec.param_count());
        for layer in spec.layers() {
            for o in 0..layer.d_out {
                w.values[layer.weight_offset + o * layer.d_in + o] = 1.0;
            }
        }
        let x = Matrix::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.0, 0.0, 5.0]).unwrap();
        let logits = forward(&spec, &w, &x).unwrap();
        assert_eq!(logits.as_slice(), x.as_slice());
    }

    #[test]
    fn forward_rows_are_independent() {
        let spec = NetworkSpec::new(vec![4, 5, 3], Activation::Tanh).unwrap();
        let w = init_weights(&spec, &mut init_rng(3));
        let rows = vec![
            vec![0.1, 0.2, 0.3, 0.4],
            vec![-1.0, 0.0, 1.0, 2.0],
            vec![0.5, 0.5, 0.5, 0.5],
        ];
        let x = Matrix::from_rows(&rows).unwrap();
        let permuted = Matrix::from_rows(&[rows[2].clone(), rows[0].clone(), rows[1].clone()]).unwrap();
        let y = forward(&spec, &w, &x).unwrap();
        let yp = forward(&spec, &w, &permuted).unwrap();
        assert_eq!(yp.row(0), y.row(2));
        assert_eq!(yp.row(1), y.row(0));
        assert_eq!(yp.row(2), y.row(1));
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let spec = NetworkSpec::new(vec![4, 2], Activation::Relu).unwrap();
        let w = ParameterVector::zeros(spec.param_count());
        let x = Matrix::zeros(1, 3);
        assert!(forward(&spec, &w, &x).is_err());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let spec = NetworkSpec::new(vec![5, 8, 4], Activation::Relu).unwrap();
        let w = init_weights(&spec, &mut init_rng(11));
        let x = Matrix::from_vec(2, 5, (0..10).map(|i| i as f64 * 0.17 - 0.5).collect()).unwrap();
        let a = forward(&spec, &w, &x).unwrap();
        let b = forward(&spec, &w, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let logits = Matrix::zeros(4, 10);
        let labels = vec![0, 3, 7, 9];
        let l = loss(&logits, &labels).unwrap();
        assert!((l - std::f64::consts::LN_10).abs() < 1e-12, "loss = {l}");
    }

    #[test]
    fn confident_correct_logit_drives_loss_to_zero() {
        let mut logits = Matrix::zeros(1, 10);
        logits.set(0, 4, 20.0);
        let l = loss(&logits, &[4]).unwrap();
        assert!(l < 1e-4, "loss = {l}");
        assert!(l > 0.0);
    }

    #[test]
    fn loss_rejects_bad_labels() {
        let logits = Matrix::zeros(2, 3);
        assert!(matches!(
            loss(&logits, &[0, 3]),
            Err(Error::LabelOutOfRange { label: 3, .. })
        ));
        assert!(loss(&logits, &[0]).is_err());
    }

    #[test]
    fn accuracy_perfect_and_tie_break() {
        let onehot = Matrix::from_vec(2, 3, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(accuracy(&onehot, &[1, 2]).unwrap(), 1.0);

        // all-zero logits tie-break to class 0
        let zeros = Matrix::zeros(3, 4);
        assert_eq!(accuracy(&zeros, &[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&zeros, &[1, 0, 0]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn accuracy_half_correct() {
        let logits = Matrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(accuracy(&logits, &[0, 1]).unwrap(), 0.5);
    }

    /// Central finite difference of the mean batch loss along coordinate `k`.
    fn fd_gradient(
        spec: &NetworkSpec,
        w: &ParameterVector,
        inputs: &Matrix,
        labels: &[usize],
        k: usize,
        h: f64,
    ) -> f64 {
        let mut wp = w.clone();
        wp.values[k] += h;
        let lp = loss(&forward(spec, &wp, inputs).unwrap(), labels).unwrap();
        let mut wm = w.clone();
        wm.values[k] -= h;
        let lm = loss(&forward(spec, &wm, inputs).unwrap(), labels).unwrap();
        (lp - lm) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = NetworkSpec::new(vec![6, 9, 7, 5], Activation::Relu).unwrap();
        let mut rng = RngState::new_master(2024).substream(Purpose::Init);
        let w = init_weights(&spec, &mut rng);
        let batch = 8;
        let mut data = Vec::with_capacity(batch * 6);
        let mut labels = Vec::with_capacity(batch);
        for _ in 0..batch {
            for _ in 0..6 {
                data.push(rng.standard_normal());
            }
            labels.push(rng.choice(5).unwrap());
        }
        let inputs = Matrix::from_vec(batch, 6, data).unwrap();
        let (_, grad) = loss_and_gradient(&spec, &w, &inputs, &labels).unwrap();

        let mut coord_rng = RngState::new_master(99).substream(Purpose::Init);
        for _ in 0..20 {
            let k = coord_rng.choice(spec.param_count()).unwrap();
            let fd = fd_gradient(&spec, &w, &inputs, &labels, k, 1e-5);
            let re = rel_err(grad.values[k], fd);
            assert!(re <= 1e-4, "coord {k}: backprop {} vs fd {fd}", grad.values[k]);
        }
    }

    #[test]
    fn gradient_matches_fd_for_tanh() {
        let spec = NetworkSpec::new(vec![4, 6, 3], Activation::Tanh).unwrap();
        let mut rng = RngState::new_master(55).substream(Purpose::Init);
        let w = init_weights(&spec, &mut rng);
        let inputs = Matrix::from_vec(3, 4, (0..12).map(|_| rng.standard_normal()).collect()).unwrap();
        let labels = vec![0, 1, 2];
        let (_, grad) = loss_and_gradient(&spec, &w, &inputs, &labels).unwrap();
        for k in 0..spec.param_count() {
            let fd = fd_gradient(&spec, &w, &inputs, &labels, k, 1e-5);
            assert!(rel_err(grad.values[k], fd) <= 1e-4, "coord {k}");
        }
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_gradient_unchanged() {
        let spec = NetworkSpec::new(vec![3, 5, 2], Activation::Relu).unwrap();
        let mut rng = RngState::new_master(8).substream(Purpose::Init);
        let w = init_weights(&spec, &mut rng);
        let inputs = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.4, 0.5, -0.6]).unwrap();
        let labels = vec![0, 1];
        let doubled = Matrix::from_rows(&[
            inputs.row(0).to_vec(),
            inputs.row(1).to_vec(),
            inputs.row(0).to_vec(),
            inputs.row(1).to_vec(),
        ])
        .unwrap();
        let labels2 = vec![0, 1, 0, 1];
        let (l1, g1) = loss_and_gradient(&spec, &w, &inputs, &labels).unwrap();
        let (l2, g2) = loss_and_gradient(&spec, &w, &doubled, &labels2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_at_stationary_point() {
        // zero inputs and balanced labels: logits reduce to the (zero) biases,
        // softmax is uniform, and the two-class pulls cancel exactly.
        let spec = NetworkSpec::new(vec![1, 2], Activation::Relu).unwrap();
        let w = ParameterVector::zeros(spec.param_count());
        let inputs = Matrix::zeros(2, 1);
        let labels = vec![0, 1];
        let (_, grad) = loss_and_gradient(&spec, &w, &inputs, &labels).unwrap();
        for g in &grad.values {
            assert!(g.abs() < 1e-8);
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let spec = NetworkSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let w = ParameterVector::zeros(spec.param_count());
        let inputs = Matrix::zeros(0, 2);
        assert!(matches!(
            loss_and_gradient(&spec, &w, &inputs, &[]),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let spec = NetworkSpec::new(vec![5, 4, 3], Activation::Tanh).unwrap();
        let w = init_weights(&spec, &mut init_rng(31));
        save_checkpoint(&path, &spec, &w).unwrap();
        let (spec2, w2) = load_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(w, w2);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::BadCheckpoint { .. })
        ));
    }
}
