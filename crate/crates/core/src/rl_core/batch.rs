//! Batched forward/backward passes over a network (row-per-sample GEMMs).
//!
//! Semantically identical to the per-sample paths in `neural`; the trainer
//! uses these so the 512-sample critic batch runs as matrix products.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::neural::{Activation, Network, NetworkGrads};

/// Cached batch activations; `activations[0]` is the input matrix (B×n_in).
pub struct BatchTrace {
    pub activations: Vec<Array2<f32>>,
}

impl BatchTrace {
    pub fn output(&self) -> &Array2<f32> {
        self.activations.last().unwrap()
    }
}

fn layer_views(net: &Network, li: usize) -> (ArrayView2<'_, f32>, &[f32]) {
    let l = &net.layers[li];
    (
        ArrayView2::from_shape((l.rows, l.cols), &l.weights).unwrap(),
        &l.bias,
    )
}

fn apply_activation(a: &mut Array2<f32>, act: Activation) {
    if act == Activation::Tanh {
        a.mapv_inplace(f32::tanh);
    }
}

/// Forward pass for a batch X (B×n_in).
pub fn batch_forward(net: &Network, x: ArrayView2<'_, f32>) -> BatchTrace {
    assert_eq!(x.ncols(), net.spec.input_len(), "batch input width");
    let mut activations = Vec::with_capacity(net.layers.len() + 1);
    activations.push(x.to_owned());
    for li in 0..net.layers.len() {
        let (w, b) = layer_views(net, li);
        let prev = activations.last().unwrap();
        // (B×cols)·(cols×rows) = B×rows
        let mut y = prev.dot(&w.t());
        let bias = Array1::from(b.to_vec());
        y += &bias;
        apply_activation(&mut y, net.activation_for_layer(li));
        activations.push(y);
    }
    BatchTrace { activations }
}

/// Reverse pass: returns parameter gradients summed over the batch and the
/// per-sample input gradients (B×n_in). Scale `out_grad` by 1/B beforehand
/// for batch means.
pub fn batch_backward(
    net: &Network,
    trace: &BatchTrace,
    out_grad: Array2<f32>,
) -> (NetworkGrads, Array2<f32>) {
    let mut grads = NetworkGrads::zeros_like(net);
    let mut delta = out_grad;
    for li in (0..net.layers.len()).rev() {
        let act = net.activation_for_layer(li);
        let out = &trace.activations[li + 1];
        if act == Activation::Tanh {
            delta = &delta * &out.mapv(|y| 1.0 - y * y);
        }
        let inp = &trace.activations[li];
        // dW = δᵀ · input  (rows×cols), db = column sums of δ
        let dw = delta.t().dot(inp);
        let db = delta.sum_axis(Axis(0));
        let (gw, gb) = &mut grads.layers[li];
        gw.copy_from_slice(dw.as_standard_layout().as_slice().unwrap());
        gb.copy_from_slice(db.as_slice().unwrap());
        // δ_prev = δ · W
        let (w, _) = layer_views(net, li);
        delta = delta.dot(&w);
    }
    (grads, delta)
}
