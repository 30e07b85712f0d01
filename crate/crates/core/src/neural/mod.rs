//! Minimal dense feed-forward networks with exact reverse-mode gradients.
//!
//! Weights are 32-bit, row-major. Both the policy (actor) and the value
//! estimator (critic) are built from this module; training happens on the
//! cloud side while the edge holds a flattened snapshot (see `edgelink`).

pub mod io;
mod lion;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lion::{lion_step, LionParams, LionState};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("network spec needs at least 2 layer sizes, got {0}")]
    TooFewLayers(usize),
    #[error("input length {got} does not match spec input {want}")]
    InputShape { got: usize, want: usize },
    #[error("gradient length {got} does not match output {want}")]
    GradShape { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, y: f32) -> f32 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths plus activations. `layer_sizes` counts the input layer, so a
/// "seven-layer" network has seven entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, NeuralError> {
        if layer_sizes.len() < 2 {
            return Err(NeuralError::TooFewLayers(layer_sizes.len()));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        })
    }

    /// Policy network: 80-dim state window in, 4 bounded actions out.
    pub fn actor_default() -> Self {
        Self::new(vec![80, 128, 128, 4], Activation::Tanh, Activation::Tanh).unwrap()
    }

    /// Value network: seven layers, state+action in, scalar out.
    pub fn critic_default() -> Self {
        Self::critic_with_width(256)
    }

    /// Seven-layer critic with a configurable hidden width (desk-scale runs
    /// use a narrower trunk than the reference 256).
    pub fn critic_with_width(width: usize) -> Self {
        Self::new(
            vec![84, width, width, width, width, width, 1],
            Activation::Tanh,
            Activation::Identity,
        )
        .unwrap()
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

/// One affine layer: `y = W·x + b`, `W` row-major with shape (rows, cols).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

/// Gradients in the same layout as the network parameters, plus the
/// gradient with respect to the input vector.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub layers: Vec<(Vec<f32>, Vec<f32>)>,
    pub input: Vec<f32>,
}

impl NetworkGrads {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
            input: vec![0.0; net.spec.input_len()],
        }
    }

    pub fn scale(&mut self, factor: f32) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v *= factor);
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add(&mut self, other: &NetworkGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(v, o)| *v += o);
            b.iter_mut().zip(ob).for_each(|(v, o)| *v += o);
        }
    }
}

/// Cached activations of one forward pass; `activations[0]` is the input
/// and the last entry is the output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub activations: Vec<Vec<f32>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f32] {
        self.activations.last().unwrap()
    }
}

/// Xavier-uniform initialisation with gain 1 and zero biases, deterministic
/// per seed.
pub fn init_xavier(spec: &NetworkSpec, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.layer_sizes.len() - 1);
    for win in spec.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (win[0], win[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = (0..fan_in * fan_out)
            .map(|_| ((rng.gen::<f64>() * 2.0 - 1.0) * limit) as f32)
            .collect();
        layers.push(Layer {
            rows: fan_out,
            cols: fan_in,
            weights,
            bias: vec![0.0; fan_out],
        });
    }
    Network {
        spec: spec.clone(),
        layers,
    }
}

impl Network {
    pub fn activation_for_layer(&self, layer_idx: usize) -> Activation {
        if layer_idx + 1 == self.layers.len() {
            self.spec.output_activation
        } else {
            self.spec.hidden_activation
        }
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &[f32]) -> Result<Vec<f32>, NeuralError> {
        Ok(self.forward_traced(input)?.activations.pop_unwrap())
    }

    /// Forward pass keeping every activation for a later backward pass.
    pub fn forward_traced(&self, input: &[f32]) -> Result<ForwardTrace, NeuralError> {
        if input.len() != self.spec.input_len() {
            return Err(NeuralError::InputShape {
                got: input.len(),
                want: self.spec.input_len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let x = activations.last().unwrap();
            let act = self.activation_for_layer(li);
            let mut y = vec![0.0f32; layer.rows];
            for r in 0..layer.rows {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                let mut acc = layer.bias[r];
                for (w, xv) in row.iter().zip(x.iter()) {
                    acc += w * xv;
                }
                y[r] = act.apply(acc);
            }
            activations.push(y);
        }
        Ok(ForwardTrace { activations })
    }

    /// Exact reverse-mode gradients for all parameters and the input, given
    /// the gradient of a scalar objective with respect to the output.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f32],
    ) -> Result<NetworkGrads, NeuralError> {
        if output_grad.len() != self.spec.output_len() {
            return Err(NeuralError::GradShape {
                got: output_grad.len(),
                want: self.spec.output_len(),
            });
        }
        let mut grads = NetworkGrads::zeros_like(self);
        let mut delta: Vec<f32> = output_grad.to_vec();

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let act = self.activation_for_layer(li);
            let out = &trace.activations[li + 1];
            let inp = &trace.activations[li];

            // δ through the activation
            for (d, y) in delta.iter_mut().zip(out.iter()) {
                *d *= act.derivative_from_output(*y);
            }

            let (gw, gb) = &mut grads.layers[li];
            for r in 0..layer.rows {
                gb[r] = delta[r];
                let row = &mut gw[r * layer.cols..(r + 1) * layer.cols];
                for (g, xv) in row.iter_mut().zip(inp.iter()) {
                    *g = delta[r] * xv;
                }
            }

            // propagate to the previous layer: δ_prev = Wᵀ δ
            let mut prev = vec![0.0f32; layer.cols];
            for r in 0..layer.rows {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                let d = delta[r];
                for (p, w) in prev.iter_mut().zip(row.iter()) {
                    *p += w * d;
                }
            }
            delta = prev;
        }
        grads.input = delta;
        Ok(grads)
    }

    /// Flattened parameter vector: per layer, weights row-major then bias.
    pub fn flatten(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Loads parameters from a flattened vector (inverse of `flatten`).
    pub fn load_flat(&mut self, flat: &[f32]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

// small helper so forward() can move the last activation out
trait PopUnwrap<T> {
    fn pop_unwrap(self) -> T;
}
impl<T> PopUnwrap<T> for Vec<T> {
    fn pop_unwrap(mut self) -> T {
        self.pop().unwrap()
    }
}

/// Verification oracles kept independent of the implementation paths they
/// check. Used by unit tests and the acceptance suite only.
pub mod fd {
    use super::{Activation, Network};

    /// Double-precision forward pass written separately from
    /// [`Network::forward`]; returns the sum of the outputs as a scalar
    /// objective.
    pub fn forward_sum_f64(net: &Network, input: &[f32]) -> f64 {
        let mut x: Vec<f64> = input.iter().map(|v| *v as f64).collect();
        for (li, layer) in net.layers.iter().enumerate() {
            let act = net.activation_for_layer(li);
            let mut y = vec![0.0f64; layer.rows];
            for r in 0..layer.rows {
                let mut acc = layer.bias[r] as f64;
                for c in 0..layer.cols {
                    acc += layer.weights[r * layer.cols + c] as f64 * x[c];
                }
                y[r] = match act {
                    Activation::Tanh => acc.tanh(),
                    Activation::Identity => acc,
                };
            }
            x = y;
        }
        x.iter().sum()
    }

    /// Max relative error between backprop and central finite differences
    /// (h = 1e-3, 64-bit) over a deterministic subset of parameters.
    ///
    /// `samples_per_layer` bounds how many weights per layer are probed;
    /// every bias up to 8 per layer is probed as well.
    pub fn max_fd_relative_error(net: &Network, input: &[f32], samples_per_layer: usize) -> f64 {
        let trace = net.forward_traced(input).unwrap();
        let ones = vec![1.0f32; net.spec.output_len()];
        let grads = net.backward(&trace, &ones).unwrap();

        let h = 1e-3f32;
        let mut max_rel = 0.0f64;
        let mut probe = net.clone();
        for li in 0..net.layers.len() {
            let n_w = net.layers[li].weights.len();
            let stride = (n_w / samples_per_layer.max(1)).max(1);
            for idx in (0..n_w).step_by(stride) {
                let orig = net.layers[li].weights[idx];
                probe.layers[li].weights[idx] = orig + h;
                let fp = forward_sum_f64(&probe, input);
                probe.layers[li].weights[idx] = orig - h;
                let fm = forward_sum_f64(&probe, input);
                probe.layers[li].weights[idx] = orig;
                let fd = (fp - fm) / (2.0 * h as f64);
                let bp = grads.layers[li].0[idx] as f64;
                let rel = (bp - fd).abs() / fd.abs().max(bp.abs()).max(1e-4);
                max_rel = max_rel.max(rel);
            }
            for idx in 0..net.layers[li].bias.len().min(8) {
                let orig = net.layers[li].bias[idx];
                probe.layers[li].bias[idx] = orig + h;
                let fp = forward_sum_f64(&probe, input);
                probe.layers[li].bias[idx] = orig - h;
                let fm = forward_sum_f64(&probe, input);
                probe.layers[li].bias[idx] = orig;
                let fd = (fp - fm) / (2.0 * h as f64);
                let bp = grads.layers[li].1[idx] as f64;
                let rel = (bp - fd).abs() / fd.abs().max(bp.abs()).max(1e-4);
                max_rel = max_rel.max(rel);
            }
        }
        max_rel
    }
}
