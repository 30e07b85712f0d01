//! Desk-scale runtime for real-time reinforcement-learning control of a
//! simulated direct-drive tandem-wing platform.
//!
//! The crate is organised around the control stack it implements:
//!
//! - [`plant`] — 8-DOF tandem-wing dynamics with surrogate load models and a
//!   stiff-capable implicit (Radau IIA) integrator at a fixed 0.5 ms event step.
//! - [`cpg`] — sinusoidal per-wing command generation and stochastic operating
//!   conditions.
//! - [`classical`] — PID / adaptive-PID / MRAC controllers plus the capability
//!   perturbation (TICP) used for exploration.
//! - [`neural`] — minimal dense networks with exact backprop, Xavier init and
//!   the Lion optimizer.
//! - [`rl_core`] — reward, replay buffer, Sarsa actor-critic updates and the
//!   critic-free discounted-cost estimator.
//! - [`concerto`] — mode interleaving, Lipschitz safety monitoring, gradient
//!   descent segmentation and the rule-based policy composer.
//! - [`edgelink`] — the edge inference runtime, cloud/edge wire protocol,
//!   weight hot-swap and microsecond timing instrumentation.
//! - [`harness`] — experiment orchestration: closed-loop runs, metrics and
//!   timing benchmarks.

pub mod classical;
pub mod concerto;
pub mod config;
pub mod cpg;
pub mod edgelink;
pub mod harness;
pub mod neural;
pub mod plant;
pub mod rl_core;

/// Derives a per-subsystem RNG seed from the master experiment seed.
///
/// Uses a splitmix64 scramble so adjacent master seeds do not produce
/// correlated subsystem streams.
pub fn stream_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
