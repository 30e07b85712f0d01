//! Lion optimizer: sign-of-momentum updates with decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::{Network, NetworkGrads};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LionParams {
    pub beta1: f32,
    pub beta2: f32,
    pub weight_decay: f32,
}

impl Default for LionParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.0,
        }
    }
}

/// One scalar Lion step. Returns the updated (param, momentum) pair.
///
/// `c = β1·m + (1−β1)·g`; `param ← param − lr·(sign(c) + wd·param)`;
/// `m ← β2·m + (1−β2)·g`; `sign(0) = 0`.
#[inline]
pub fn lion_step(param: f32, grad: f32, m: f32, lr: f32, p: &LionParams) -> (f32, f32) {
    let c = p.beta1 * m + (1.0 - p.beta1) * grad;
    let sign = if c > 0.0 {
        1.0
    } else if c < 0.0 {
        -1.0
    } else {
        0.0
    };
    let new_param = param - lr * (sign + p.weight_decay * param);
    let new_m = p.beta2 * m + (1.0 - p.beta2) * grad;
    (new_param, new_m)
}

/// Momentum buffers matching a network's parameter shapes.
#[derive(Debug, Clone)]
pub struct LionState {
    pub params: LionParams,
    momentum: Vec<(Vec<f32>, Vec<f32>)>,
}

impl LionState {
    pub fn new(net: &Network, params: LionParams) -> Self {
        Self {
            params,
            momentum: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    /// Applies one Lion update to every parameter of the network.
    pub fn update(&mut self, net: &mut Network, grads: &NetworkGrads, lr: f32) {
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[li];
            let (mw, mb) = &mut self.momentum[li];
            for i in 0..layer.weights.len() {
                let (p, m) = lion_step(layer.weights[i], gw[i], mw[i], lr, &self.params);
                layer.weights[i] = p;
                mw[i] = m;
            }
            for i in 0..layer.bias.len() {
                let (p, m) = lion_step(layer.bias[i], gb[i], mb[i], lr, &self.params);
                layer.bias[i] = p;
                mb[i] = m;
            }
        }
    }
}
