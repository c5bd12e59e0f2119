//! Finite-difference verification of the backprop gradient.
//!
//! The reference derivative comes from central differences over the forward
//! pass and loss only, so it shares no code with the reverse-mode path it
//! checks.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::{self, Activation, NetworkSpec, ParameterVector};
use crate::rng::{Purpose, RngState};

const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub specs_checked: usize,
    pub coords_checked: usize,
    pub max_rel_error: f64,
}

/// `|a - b| / max(|a|, |b|, 1e-5)`: relative for gradients of ordinary size,
/// absolute below the finite-difference noise floor.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

fn fd_partial(
    spec: &NetworkSpec,
    w: &ParameterVector,
    inputs: &Matrix,
    labels: &[usize],
    coord: usize,
) -> Result<f64> {
    let mut shifted = w.clone();
    shifted.values[coord] += FD_STEP;
    let plus = nn::loss(&nn::forward(spec, &shifted, inputs)?, labels)?;
    shifted.values[coord] = w.values[coord] - FD_STEP;
    let minus = nn::loss(&nn::forward(spec, &shifted, inputs)?, labels)?;
    Ok((plus - minus) / (2.0 * FD_STEP))
}

/// Check backprop against central differences on `n_specs` random networks
/// (1-3 hidden layers of width <= 32, batches <= 16, mixed activations),
/// probing `coords_per_spec` random coordinates each. Returns the report;
/// the caller decides what error is acceptable.
pub fn run(seed: u64, n_specs: usize, coords_per_spec: usize) -> Result<GradCheckReport> {
    let root = RngState::new_master(seed).substream(Purpose::Init);
    let mut max_rel = 0.0f64;
    let mut coords_checked = 0usize;

    for spec_idx in 0..n_specs {
        let mut rng = root.keyed(spec_idx as u64);
        let hidden_count = 1 + rng.choice(3)?;
        let input_dim = 2 + rng.choice(15)?;
        let classes = 2 + rng.choice(7)?;
        let mut sizes = vec![input_dim];
        for _ in 0..hidden_count {
            sizes.push(1 + rng.choice(32)?);
        }
        sizes.push(classes);
        let activation = if rng.choice(2)? == 0 {
            Activation::Relu
        } else {
            Activation::Tanh
        };
        let spec = NetworkSpec::new(sizes, activation)?;

        let mut w = nn::init_weights(&spec, &mut rng);
        for layer in spec.layers() {
            for o in 0..layer.d_out {
                w.values[layer.bias_offset + o] = 0.1 * rng.standard_normal();
            }
        }

        let batch = 1 + rng.choice(16)?;
        let mut data = Vec::with_capacity(batch * input_dim);
        let mut labels = Vec::with_capacity(batch);
        for _ in 0..batch {
            for _ in 0..input_dim {
                data.push(rng.standard_normal());
            }
            labels.push(rng.choice(classes)?);
        }
        let inputs = Matrix::from_vec(batch, input_dim, data)?;

        let (_, grad) = nn::loss_and_gradient(&spec, &w, &inputs, &labels)?;
        for _ in 0..coords_per_spec {
            let k = rng.choice(spec.param_count())?;
            let fd = fd_partial(&spec, &w, &inputs, &labels, k)?;
            max_rel = max_rel.max(rel_err(grad.values[k], fd));
            coords_checked += 1;
        }
    }

    Ok(GradCheckReport {
        specs_checked: n_specs,
        coords_checked,
        max_rel_error: max_rel,
    })
}
