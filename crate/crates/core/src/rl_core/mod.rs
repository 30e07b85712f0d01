//! Reward, replay storage and the on-policy deterministic actor-critic.
//!
//! The reward is a cost: lower is better, zero at perfect tracking. The
//! critic follows Sarsa updates on stored (state, action, reward, next
//! state, next action) records — next actions come from the executed
//! trajectory, so classical-controller steps act as imitation data. The
//! segment-level value estimate `Q̄ ≈ r̄/(1−γ̄)` gives the composer a
//! critic-free signal.

mod batch;
mod buffer;
mod trainer;

use serde::{Deserialize, Serialize};

pub use batch::{batch_backward, batch_forward, BatchTrace};
pub use buffer::ReplayBuffer;
pub use trainer::{actor_gradient, actor_update, critic_update, Trainer, TrainerStepReport};

pub const STATE_LEN: usize = 80;
pub const ACTION_LEN: usize = 4;

/// The 80-dimensional observation window: 8 past (observation, action)
/// pairs followed by 4 future command vectors. See `harness::state` for the
/// exact slot layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f32; STATE_LEN]);

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f32>::deserialize(deserializer)?;
        if values.len() != STATE_LEN {
            return Err(serde::de::Error::invalid_length(
                values.len(),
                &"an 80-element state vector",
            ));
        }
        let mut out = [0.0f32; STATE_LEN];
        out.copy_from_slice(&values);
        Ok(StateVector(out))
    }
}

impl Default for StateVector {
    fn default() -> Self {
        Self([0.0; STATE_LEN])
    }
}

impl StateVector {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

/// Which controller produced an executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSource {
    Classical,
    Rl,
    Composer,
}

impl ActionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionSource::Classical => "classical",
            ActionSource::Rl => "rl",
            ActionSource::Composer => "composer",
        }
    }
}

/// One replay record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateVector,
    pub action: [f32; ACTION_LEN],
    /// Cost in [0, 1].
    pub reward: f32,
    pub next_state: StateVector,
    pub next_action: [f32; ACTION_LEN],
    pub source: ActionSource,
}

/// Reward scale. The default λ = 1/(2π) saturates the cost at 1 exactly
/// when all four errors sit on the ±90° safety boundary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardSpec {
    pub lambda: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            lambda: 1.0 / (2.0 * std::f64::consts::PI),
        }
    }
}

/// Weighted sum of absolute tracking errors, clamped to [0, 1].
pub fn reward(errors: &[f64; 4], spec: &RewardSpec) -> f64 {
    let sum: f64 = errors.iter().map(|e| e.abs()).sum();
    (spec.lambda * sum).clamp(0.0, 1.0)
}

/// Sarsa temporal-difference error: `r + γ·q_next − q`.
pub fn td_error(r: f64, gamma: f64, q_next: f64, q: f64) -> f64 {
    r + gamma * q_next - q
}

/// Discounted-cost estimate from a reward window: `mean(rewards)/(1−γ̄)`.
pub fn estimate_qbar(rewards: &[f64], gamma_bar: f64) -> f64 {
    assert!(
        !rewards.is_empty() && gamma_bar > 0.0 && gamma_bar < 1.0,
        "estimate_qbar needs a nonempty window and 0 < gamma_bar < 1"
    );
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    mean / (1.0 - gamma_bar)
}

/// Change of the discounted-cost estimate between two reward means.
pub fn estimate_delta_q(rbar_before: f64, rbar_after: f64, gamma_bar: f64) -> f64 {
    assert!(gamma_bar > 0.0 && gamma_bar < 1.0);
    (rbar_after - rbar_before) / (1.0 - gamma_bar)
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerHyper {
    pub gamma: f64,
    pub alpha_actor: f32,
    pub alpha_critic: f32,
    pub critic_batch: usize,
    pub policy_batch: usize,
    /// No update of any kind before this many completed transitions.
    pub warmup: u64,
    /// Critic update cadence in control steps. The policy updates every
    /// step; the heavier 512-sample critic batch runs every `critic_interval`
    /// steps (desk-scale knob; 1 recovers per-step updates).
    pub critic_interval: u64,
}

impl Default for TrainerHyper {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha_actor: 0.015,
            alpha_critic: 0.0015,
            critic_batch: 512,
            policy_batch: 16,
            warmup: 10,
            critic_interval: 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        let spec = RewardSpec::default();
        assert_eq!(reward(&[0.0; 4], &spec), 0.0);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let saturated = reward(&[half_pi; 4], &spec);
        assert!((saturated - 1.0).abs() < 1e-15);
        let single = reward(&[0.1, 0.0, 0.0, 0.0], &spec);
        assert!((single - 0.0159155).abs() < 1e-6);
    }

    #[test]
    fn reward_permutation_invariant_and_monotone() {
        let spec = RewardSpec::default();
        let base = [0.1, -0.2, 0.05, 0.3];
        let r0 = reward(&base, &spec);
        let permuted = [0.3, 0.05, -0.2, 0.1];
        assert_eq!(r0, reward(&permuted, &spec));
        for i in 0..4 {
            let mut grown = base;
            grown[i] *= 1.5;
            assert!(reward(&grown, &spec) >= r0);
        }
    }

    #[test]
    fn td_error_examples() {
        assert!((td_error(0.1, 0.9, 1.0, 0.95) - 0.05).abs() < 1e-15);
        assert!(td_error(0.0, 0.9, 1.0, 0.9).abs() < 1e-15);
        assert_eq!(td_error(0.5, 0.0, 123.0, 0.0), 0.5);
    }

    #[test]
    fn qbar_constant_window_matches_geometric_series() {
        let window = vec![0.05; 64];
        let qbar = estimate_qbar(&window, 0.9);
        assert!((qbar - 0.5).abs() < 1e-15);
        assert_eq!(estimate_qbar(&[0.0; 8], 0.9), 0.0);

        // brute-force discounted rollout of the constant-mean process
        let rbar = 0.05;
        let brute: f64 = (0..500).map(|k| 0.9f64.powi(k) * rbar).sum();
        assert!((qbar - brute).abs() / qbar < 1e-12);
    }

    #[test]
    fn qbar_linear_in_window() {
        let a = vec![0.1, 0.3, 0.2, 0.05];
        let b = vec![0.02, 0.0, 0.08, 0.4];
        let gamma = 0.9;
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = estimate_qbar(&sum, gamma);
        let rhs = estimate_qbar(&a, gamma) + estimate_qbar(&b, gamma);
        assert!((lhs - rhs).abs() < 1e-12);
        let scaled: Vec<f64> = a.iter().map(|x| 3.0 * x).collect();
        assert!((estimate_qbar(&scaled, gamma) - 3.0 * estimate_qbar(&a, gamma)).abs() < 1e-12);
    }

    #[test]
    fn delta_q_examples_and_consistency() {
        assert_eq!(estimate_delta_q(0.05, 0.05, 0.9), 0.0);
        assert!((estimate_delta_q(0.05, 0.03, 0.9) + 0.2).abs() < 1e-12);

        let before = vec![0.2, 0.25, 0.22];
        let after = vec![0.1, 0.12, 0.08];
        let gamma = 0.9;
        let direct = estimate_delta_q(
            before.iter().sum::<f64>() / 3.0,
            after.iter().sum::<f64>() / 3.0,
            gamma,
        );
        let via_qbar = estimate_qbar(&after, gamma) - estimate_qbar(&before, gamma);
        assert!((direct - via_qbar).abs() < 1e-12);
    }
}
