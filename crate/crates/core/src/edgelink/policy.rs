//! Flattened edge policy with allocation-free inference and staged weight
//! hot-swap.

use crate::concerto::Mode;
use crate::neural::io::WeightLayer;
use crate::neural::Network;

use super::packet::{CodecError, WeightPacket};

/// The actor weights as contiguous row-major buffers plus ping-pong scratch.
/// Every layer applies tanh (the policy head is bounded by construction).
#[derive(Debug, Clone)]
pub struct EdgePolicy {
    layers: Vec<EdgeLayer>,
    scratch_a: Vec<f32>,
    scratch_b: Vec<f32>,
    input_len: usize,
    output_len: usize,
    generation: u64,
}

#[derive(Debug, Clone)]
struct EdgeLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl EdgePolicy {
    pub fn from_layers(layers: &[WeightLayer]) -> Result<Self, CodecError> {
        if layers.is_empty() {
            return Err(CodecError::BadShape(0));
        }
        let mut converted = Vec::with_capacity(layers.len());
        let mut width = layers[0].cols as usize;
        let mut max_width = width;
        for (i, l) in layers.iter().enumerate() {
            if l.cols as usize != width
                || l.weights.len() != (l.rows * l.cols) as usize
                || l.bias.len() != l.rows as usize
            {
                return Err(CodecError::BadShape(i));
            }
            width = l.rows as usize;
            max_width = max_width.max(width);
            converted.push(EdgeLayer {
                rows: l.rows as usize,
                cols: l.cols as usize,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            });
        }
        Ok(Self {
            input_len: converted[0].cols,
            output_len: converted.last().unwrap().rows,
            layers: converted,
            scratch_a: vec![0.0; max_width],
            scratch_b: vec![0.0; max_width],
            generation: 0,
        })
    }

    pub fn from_network(net: &Network) -> Self {
        let layers: Vec<WeightLayer> = net
            .layers
            .iter()
            .map(|l| WeightLayer {
                rows: l.rows as u32,
                cols: l.cols as u32,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            })
            .collect();
        Self::from_layers(&layers).expect("network layers are consistent")
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    /// Shape compatibility check used before installing new weights.
    pub fn shape_matches(&self, layers: &[WeightLayer]) -> bool {
        self.layers.len() == layers.len()
            && self
                .layers
                .iter()
                .zip(layers)
                .all(|(a, b)| a.rows == b.rows as usize && a.cols == b.cols as usize)
    }

    /// Installs validated weights and bumps the generation counter.
    fn install(&mut self, layers: &[WeightLayer]) {
        for (dst, src) in self.layers.iter_mut().zip(layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.bias.copy_from_slice(&src.bias);
        }
        self.generation += 1;
    }

    /// Actor forward pass as direct matrix arithmetic. No allocation after
    /// construction: activations ping-pong between two preallocated buffers.
    pub fn infer(&mut self, state: &[f32]) -> [f32; 4] {
        debug_assert_eq!(state.len(), self.input_len, "validated before the loop");
        debug_assert_eq!(self.output_len, 4);
        let Self {
            layers,
            scratch_a,
            scratch_b,
            ..
        } = self;
        let mut result_in_a = false;
        for (li, layer) in layers.iter().enumerate() {
            if li == 0 {
                matvec_tanh(layer, state, scratch_a);
                result_in_a = true;
            } else if result_in_a {
                matvec_tanh(layer, scratch_a, scratch_b);
                result_in_a = false;
            } else {
                matvec_tanh(layer, scratch_b, scratch_a);
                result_in_a = true;
            }
        }
        let out = if result_in_a { scratch_a } else { scratch_b };
        [out[0], out[1], out[2], out[3]]
    }
}

#[inline]
fn matvec_tanh(layer: &EdgeLayer, input: &[f32], output: &mut [f32]) {
    for r in 0..layer.rows {
        let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
        let mut acc = layer.bias[r];
        for (w, x) in row.iter().zip(input.iter()) {
            acc += w * x;
        }
        output[r] = acc.tanh();
    }
}

/// Edge-side reception state: at most one validated packet staged at a time,
/// sequence numbers strictly increasing.
#[derive(Debug, Default)]
pub struct WeightReceiver {
    staged: Option<WeightPacket>,
    last_sequence: Option<u32>,
    pub rejected_crc: u64,
    pub rejected_shape: u64,
    pub stale: u64,
    pub applied: u64,
}

/// What happened to an offered packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapOutcome {
    /// Installed immediately (Mode-1 slot); carries the new generation.
    Applied(u64),
    /// Valid but arrived during Mode 2; staged for the next Mode-1 step.
    Staged,
    RejectedCrc,
    RejectedShape,
    Stale,
}

/// Validates a received weight packet ("analysis") and installs or stages
/// it depending on the current mode. Corrupt, mis-shaped or out-of-order
/// packets never alter the policy.
pub fn hot_swap(
    policy: &mut EdgePolicy,
    receiver: &mut WeightReceiver,
    bytes: &[u8],
    mode: Mode,
) -> SwapOutcome {
    let packet = match WeightPacket::decode(bytes) {
        Ok(p) => p,
        Err(CodecError::CrcMismatch { .. }) => {
            receiver.rejected_crc += 1;
            return SwapOutcome::RejectedCrc;
        }
        Err(_) => {
            receiver.rejected_shape += 1;
            return SwapOutcome::RejectedShape;
        }
    };
    if let Some(last) = receiver.last_sequence {
        if packet.sequence <= last {
            receiver.stale += 1;
            return SwapOutcome::Stale;
        }
    }
    if !policy.shape_matches(&packet.layers) {
        receiver.rejected_shape += 1;
        return SwapOutcome::RejectedShape;
    }
    receiver.last_sequence = Some(packet.sequence);
    match mode {
        Mode::Mode1 => {
            policy.install(&packet.layers);
            receiver.applied += 1;
            SwapOutcome::Applied(policy.generation())
        }
        Mode::Mode2 => {
            receiver.staged = Some(packet);
            SwapOutcome::Staged
        }
    }
}

impl WeightReceiver {
    /// Installs the staged packet, if any. Called at the start of every
    /// Mode-1 step ("loading"). Returns the new generation when a swap
    /// happened.
    pub fn apply_staged(&mut self, policy: &mut EdgePolicy) -> Option<u64> {
        let packet = self.staged.take()?;
        policy.install(&packet.layers);
        self.applied += 1;
        Some(policy.generation())
    }

    pub fn has_staged(&self) -> bool {
        self.staged.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_xavier, NetworkSpec};

    fn actor() -> Network {
        init_xavier(&NetworkSpec::actor_default(), 42)
    }

    #[test]
    fn zero_weights_give_zero_action() {
        let mut net = actor();
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let mut policy = EdgePolicy::from_network(&net);
        let out = policy.infer(&[0.4; 80]);
        assert_eq!(out, [0.0; 4]);
    }

    #[test]
    fn matches_reference_forward_pass() {
        let net = actor();
        let mut policy = EdgePolicy::from_network(&net);
        let state: Vec<f32> = (0..80).map(|i| ((i * 37) % 19) as f32 * 0.05 - 0.4).collect();
        let fast = policy.infer(&state);
        let reference = net.forward(&state).unwrap();
        for (f, r) in fast.iter().zip(&reference) {
            assert!((f - r).abs() <= 1e-6, "{f} vs {r}");
        }
    }

    #[test]
    fn repeated_inference_bit_identical() {
        let mut policy = EdgePolicy::from_network(&actor());
        let state = [0.123f32; 80];
        let a = policy.infer(&state);
        let b = policy.infer(&state);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn swap_applies_immediately_in_mode1() {
        let old_net = actor();
        let new_net = init_xavier(&NetworkSpec::actor_default(), 77);
        let mut policy = EdgePolicy::from_network(&old_net);
        let mut rx = WeightReceiver::default();
        let state = [0.2f32; 80];

        let bytes = WeightPacket::from_network(&new_net, 1).encode();
        let outcome = hot_swap(&mut policy, &mut rx, &bytes, Mode::Mode1);
        assert_eq!(outcome, SwapOutcome::Applied(1));
        let out = policy.infer(&state);
        let expected = new_net.forward(&state).unwrap();
        for (f, r) in out.iter().zip(&expected) {
            assert!((f - r).abs() <= 1e-6);
        }
    }

    #[test]
    fn swap_stages_in_mode2_and_applies_at_next_mode1() {
        let old_net = actor();
        let new_net = init_xavier(&NetworkSpec::actor_default(), 78);
        let mut policy = EdgePolicy::from_network(&old_net);
        let mut rx = WeightReceiver::default();
        let state = [0.2f32; 80];

        let bytes = WeightPacket::from_network(&new_net, 1).encode();
        let outcome = hot_swap(&mut policy, &mut rx, &bytes, Mode::Mode2);
        assert_eq!(outcome, SwapOutcome::Staged);
        // still on the old weights
        let out = policy.infer(&state);
        let old_expected = old_net.forward(&state).unwrap();
        for (f, r) in out.iter().zip(&old_expected) {
            assert!((f - r).abs() <= 1e-6);
        }
        assert_eq!(policy.generation(), 0);

        // next Mode-1 step loads it
        let gen = rx.apply_staged(&mut policy);
        assert_eq!(gen, Some(1));
        let out = policy.infer(&state);
        let new_expected = new_net.forward(&state).unwrap();
        for (f, r) in out.iter().zip(&new_expected) {
            assert!((f - r).abs() <= 1e-6);
        }
    }

    #[test]
    fn corrupted_packet_never_alters_policy() {
        let mut policy = EdgePolicy::from_network(&actor());
        let mut rx = WeightReceiver::default();
        let mut bytes = WeightPacket::from_network(&actor(), 1).encode();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x55;
        let before = policy.generation();
        let outcome = hot_swap(&mut policy, &mut rx, &bytes, Mode::Mode1);
        assert_eq!(outcome, SwapOutcome::RejectedCrc);
        assert_eq!(policy.generation(), before);
        assert_eq!(rx.rejected_crc, 1);
    }

    #[test]
    fn stale_and_mis_shaped_packets_discarded() {
        let mut policy = EdgePolicy::from_network(&actor());
        let mut rx = WeightReceiver::default();
        let p5 = WeightPacket::from_network(&actor(), 5).encode();
        assert!(matches!(
            hot_swap(&mut policy, &mut rx, &p5, Mode::Mode1),
            SwapOutcome::Applied(_)
        ));
        let p4 = WeightPacket::from_network(&actor(), 4).encode();
        assert_eq!(hot_swap(&mut policy, &mut rx, &p4, Mode::Mode1), SwapOutcome::Stale);
        assert_eq!(rx.stale, 1);

        let wrong = init_xavier(&NetworkSpec::critic_with_width(16), 0);
        let pw = WeightPacket::from_network(&wrong, 9).encode();
        assert_eq!(
            hot_swap(&mut policy, &mut rx, &pw, Mode::Mode1),
            SwapOutcome::RejectedShape
        );
        assert_eq!(rx.rejected_shape, 1);
    }
}
