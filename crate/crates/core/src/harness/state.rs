//! Observation-window construction (the 80-dimensional policy state).
//!
//! Layout, oldest first: 8 pairs of (observation₄, action₄) covering steps
//! t−7..t — the action slot of each pair holds the action applied in the
//! interval leading to that observation — followed by the 4 future command
//! vectors E^t..E^{t+3}. History is zero-padded until 8 pairs exist.

use std::collections::VecDeque;

use crate::rl_core::{StateVector, STATE_LEN};

/// Past (observation, action) pairs kept for the embedding.
pub const HISTORY_PAIRS: usize = 8;
/// Future command vectors in the window (H + 1).
pub const COMMAND_WINDOW: usize = 4;

/// Deterministic concatenation of history pairs and the command window.
/// `pairs` are oldest-first and may be shorter than [`HISTORY_PAIRS`]
/// (zero-padded at the old end); `window` must have exactly
/// [`COMMAND_WINDOW`] entries.
pub fn build_state(
    pairs: &[([f32; 4], [f32; 4])],
    window: &[[f64; 4]],
) -> Result<StateVector, String> {
    if window.len() != COMMAND_WINDOW {
        return Err(format!(
            "command window must have {COMMAND_WINDOW} entries, got {}",
            window.len()
        ));
    }
    if pairs.len() > HISTORY_PAIRS {
        return Err(format!(
            "at most {HISTORY_PAIRS} history pairs, got {}",
            pairs.len()
        ));
    }
    let mut out = [0.0f32; STATE_LEN];
    let pad = HISTORY_PAIRS - pairs.len();
    for (p, (obs, act)) in pairs.iter().enumerate() {
        let base = (pad + p) * 8;
        out[base..base + 4].copy_from_slice(obs);
        out[base + 4..base + 8].copy_from_slice(act);
    }
    for (n, cmd) in window.iter().enumerate() {
        let base = HISTORY_PAIRS * 8 + n * 4;
        for (i, v) in cmd.iter().enumerate() {
            out[base + i] = *v as f32;
        }
    }
    Ok(StateVector(out))
}

/// Rolling history owned by the edge runtime.
#[derive(Debug, Clone, Default)]
pub struct StateHistory {
    ring: VecDeque<([f32; 4], [f32; 4])>,
}

impl StateHistory {
    /// Pushes the newest observation paired with the action that preceded it.
    pub fn push(&mut self, obs: [f64; 4], prev_action: [f32; 4]) {
        if self.ring.len() == HISTORY_PAIRS {
            self.ring.pop_front();
        }
        let obs_f32 = [obs[0] as f32, obs[1] as f32, obs[2] as f32, obs[3] as f32];
        self.ring.push_back((obs_f32, prev_action));
    }

    pub fn build(&self, window: &[[f64; 4]]) -> StateVector {
        let pairs: Vec<([f32; 4], [f32; 4])> = self.ring.iter().copied().collect();
        build_state(&pairs, window).expect("ring bounded by HISTORY_PAIRS")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_history_zero_commands_is_all_zero() {
        let state = build_state(&[], &[[0.0; 4]; 4]).unwrap();
        assert!(state.0.iter().all(|v| *v == 0.0));
        assert_eq!(state.0.len(), 80);
    }

    #[test]
    fn wrong_window_length_rejected() {
        assert!(build_state(&[], &[[0.0; 4]; 3]).is_err());
        assert!(build_state(&[], &[[0.0; 4]; 5]).is_err());
    }

    #[test]
    fn sentinel_values_land_in_their_slots() {
        // distinguishable sentinel per (pair, channel) and command slot
        let mut pairs = Vec::new();
        for p in 0..HISTORY_PAIRS {
            let obs = [
                1000.0 + p as f32,
                2000.0 + p as f32,
                3000.0 + p as f32,
                4000.0 + p as f32,
            ];
            let act = [
                5000.0 + p as f32,
                6000.0 + p as f32,
                7000.0 + p as f32,
                8000.0 + p as f32,
            ];
            pairs.push((obs, act));
        }
        let window: Vec<[f64; 4]> = (0..COMMAND_WINDOW)
            .map(|n| {
                [
                    9000.0 + n as f64,
                    9100.0 + n as f64,
                    9200.0 + n as f64,
                    9300.0 + n as f64,
                ]
            })
            .collect();
        let state = build_state(&pairs, &window).unwrap();
        for p in 0..HISTORY_PAIRS {
            for ch in 0..4 {
                assert_eq!(state.0[p * 8 + ch], 1000.0 * (ch as f32 + 1.0) + p as f32);
                assert_eq!(
                    state.0[p * 8 + 4 + ch],
                    5000.0 + 1000.0 * ch as f32 + p as f32
                );
            }
        }
        for n in 0..COMMAND_WINDOW {
            for ch in 0..4 {
                assert_eq!(
                    state.0[64 + n * 4 + ch],
                    9000.0 + 100.0 * ch as f32 + n as f32
                );
            }
        }
    }

    #[test]
    fn shifting_history_moves_pairs_by_eight_slots() {
        let mut history = StateHistory::default();
        let window = [[0.0; 4]; 4];
        for step in 0..HISTORY_PAIRS {
            history.push([step as f64; 4], [step as f32 + 0.5; 4]);
        }
        let before = history.build(&window);
        history.push([99.0; 4], [99.5; 4]);
        let after = history.build(&window);
        // pair p after the shift equals pair p+1 before it
        for p in 0..HISTORY_PAIRS - 1 {
            for s in 0..8 {
                assert_eq!(after.0[p * 8 + s], before.0[(p + 1) * 8 + s]);
            }
        }
        assert_eq!(after.0[(HISTORY_PAIRS - 1) * 8], 99.0);
        assert_eq!(after.0[(HISTORY_PAIRS - 1) * 8 + 4], 99.5);
    }

    #[test]
    fn partial_history_pads_oldest_slots() {
        let mut history = StateHistory::default();
        history.push([7.0; 4], [3.0; 4]);
        let state = history.build(&[[0.0; 4]; 4]);
        // first 7 pairs zero, the newest pair in the last slot
        assert!(state.0[..56].iter().all(|v| *v == 0.0));
        assert_eq!(state.0[56], 7.0);
        assert_eq!(state.0[60], 3.0);
    }
}
