//! Naive framework-style inference path used as the benchmark baseline.
//!
//! Mirrors an unadjusted deployment: every step re-decodes and reloads the
//! full weight packet, converts the state into a boxed double-precision
//! tensor, runs generic allocating tensor ops, and converts the result back.
//! Exists only so the benchmark can report the speedup of the direct matrix
//! path on identical inputs.

use super::packet::WeightPacket;

/// Heap-boxed dense tensor with shape metadata, the way a generic framework
/// would hold activations.
struct NaiveTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl NaiveTensor {
    fn from_f32(values: &[f32]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.iter().map(|v| *v as f64).collect(),
        }
    }

    fn matmul_vec(&self, x: &NaiveTensor) -> NaiveTensor {
        assert_eq!(self.cols, x.rows);
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += self.data[r * self.cols + c] * x.data[c];
            }
            out.push(acc);
        }
        NaiveTensor {
            rows: self.rows,
            cols: 1,
            data: out,
        }
    }

    fn add(&self, other: &NaiveTensor) -> NaiveTensor {
        NaiveTensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn tanh(&self) -> NaiveTensor {
        NaiveTensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.tanh()).collect(),
        }
    }
}

/// Per-step stage times of the naive path, seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveStepTimings {
    pub weight_reload_s: f64,
    pub tensorize_s: f64,
    pub inference_s: f64,
    pub detensorize_s: f64,
}

impl NaiveStepTimings {
    pub fn total(&self) -> f64 {
        self.weight_reload_s + self.tensorize_s + self.inference_s + self.detensorize_s
    }
}

/// Keeps only the encoded packet; every inference pays the full decode.
pub struct NaivePolicy {
    packet_bytes: Vec<u8>,
}

impl NaivePolicy {
    pub fn new(packet: &WeightPacket) -> Self {
        Self {
            packet_bytes: packet.encode(),
        }
    }

    pub fn infer(&self, state: &[f32]) -> ([f32; 4], NaiveStepTimings) {
        let mut t = NaiveStepTimings::default();

        // full weight reception + analysis + loading, every step
        let start = std::time::Instant::now();
        let packet = WeightPacket::decode(&self.packet_bytes).expect("stored packet is valid");
        let weights: Vec<(NaiveTensor, NaiveTensor)> = packet
            .layers
            .iter()
            .map(|l| {
                (
                    NaiveTensor {
                        rows: l.rows as usize,
                        cols: l.cols as usize,
                        data: l.weights.iter().map(|v| *v as f64).collect(),
                    },
                    NaiveTensor::from_f32(&l.bias),
                )
            })
            .collect();
        t.weight_reload_s = start.elapsed().as_secs_f64();

        // state tensorization
        let start = std::time::Instant::now();
        let mut x = NaiveTensor::from_f32(state);
        t.tensorize_s = start.elapsed().as_secs_f64();

        // generic allocating inference
        let start = std::time::Instant::now();
        for (w, b) in &weights {
            x = w.matmul_vec(&x).add(b).tanh();
        }
        t.inference_s = start.elapsed().as_secs_f64();

        // action de-tensorization
        let start = std::time::Instant::now();
        let floats: Vec<f32> = x.data.iter().map(|v| *v as f32).collect();
        let action = [floats[0], floats[1], floats[2], floats[3]];
        t.detensorize_s = start.elapsed().as_secs_f64();

        (action, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edgelink::EdgePolicy;
    use crate::neural::{init_xavier, NetworkSpec};

    #[test]
    fn naive_path_agrees_with_matrix_path() {
        let net = init_xavier(&NetworkSpec::actor_default(), 55);
        let packet = WeightPacket::from_network(&net, 1);
        let naive = NaivePolicy::new(&packet);
        let mut fast = EdgePolicy::from_network(&net);
        let state: Vec<f32> = (0..80).map(|i| (i as f32 * 0.11).cos() * 0.3).collect();
        let (naive_out, timings) = naive.infer(&state);
        let fast_out = fast.infer(&state);
        for (a, b) in naive_out.iter().zip(&fast_out) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert!(timings.total() > 0.0);
    }
}
