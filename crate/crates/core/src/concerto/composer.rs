//! Physics-inspired rule-based policy composer.
//!
//! At every segment boundary the composer decides what to do with the
//! accumulated policy delta, comparing the segment's value estimate against
//! the phase benchmark and the fit statistics against the previous segment:
//! the descent slope plays the role of potential energy, the residual
//! spread of kinetic energy. Runs on the training side only.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gds::GdsRecord;

/// Segmentation and perturbation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposerConfig {
    /// Steps per gradient-descent segment (the inclusive accumulation makes
    /// a segment span `segment_steps + 1` update events).
    pub segment_steps: usize,
    /// Max segments per descent phase before a forced anchor reset.
    pub max_segments: usize,
    /// Partial-update scale β ∈ [0, 1].
    pub beta: f64,
    /// Noise σ for the partial / slowdown / explore branches.
    pub noise_sigmas: [f64; 3],
    /// Additive σ floor so zero-valued parameters can still move.
    pub noise_floor: f64,
    /// Cost semantics: improvement means a lower value estimate. The
    /// literal (reward-ascent) inequality direction is kept behind this
    /// switch.
    pub cost_semantics: bool,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        Self {
            segment_steps: 500,
            max_segments: 8,
            beta: 0.5,
            noise_sigmas: [0.064, 0.04, 0.2],
            noise_floor: 1e-3,
            cost_semantics: true,
        }
    }
}

impl ComposerConfig {
    /// Update events per segment (inclusive bound).
    pub fn segment_events(&self) -> usize {
        self.segment_steps + 1
    }
}

/// Descent-phase record: anchor weights and the benchmark value estimate.
#[derive(Debug, Clone)]
pub struct DdpRecord {
    /// Phase index.
    pub g: u64,
    /// Anchor weights θ_{g,0}.
    pub theta_g0: Vec<f32>,
    /// Benchmark value estimate; only the accept-all branch moves it.
    pub best_qbar: f64,
    /// Post-hoc acceleration factor (diagnostics fill this in).
    pub m_g: f64,
}

impl DdpRecord {
    pub fn initial(theta: Vec<f32>, qbar: f64) -> Self {
        Self {
            g: 0,
            theta_g0: theta,
            best_qbar: qbar,
            m_g: 0.0,
        }
    }
}

/// Which rule fired at a segment boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposerBranch {
    /// (i) new historical best: accept all updates, new anchor.
    AcceptNewBest,
    /// (ii) phase timed out: reset to the anchor.
    ResetToAnchor,
    /// (iii) slope and spread both improving: accept all updates.
    AcceptAll,
    /// (iv) slope improving, spread not: β-scaled update plus noise.
    PartialWithNoise,
    /// (v) slope degrading, spread improving: drop the update, noise only.
    NoiseOnly,
    /// (vi) both degrading: explore around the anchor.
    ExploreAnchor,
}

impl ComposerBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComposerBranch::AcceptNewBest => "accept_new_best",
            ComposerBranch::ResetToAnchor => "reset_to_anchor",
            ComposerBranch::AcceptAll => "accept_all",
            ComposerBranch::PartialWithNoise => "partial_with_noise",
            ComposerBranch::NoiseOnly => "noise_only",
            ComposerBranch::ExploreAnchor => "explore_anchor",
        }
    }
}

/// Result of one composer decision.
#[derive(Debug, Clone)]
pub struct ComposeOutcome {
    pub theta_next: Vec<f32>,
    pub ddp: DdpRecord,
    pub j_next: usize,
    pub branch: ComposerBranch,
}

fn add(theta: &[f32], delta: &[f32], scale: f64) -> Vec<f32> {
    theta
        .iter()
        .zip(delta)
        .map(|(t, d)| t + (scale as f32) * d)
        .collect()
}

/// Zero-mean Gaussian perturbation with per-parameter σ scaled by the
/// parameter magnitude (plus a floor).
fn add_noise(base: &mut [f32], sigma: f64, floor: f64, rng: &mut ChaCha8Rng) {
    let unit = Normal::new(0.0f64, 1.0).unwrap();
    for v in base.iter_mut() {
        let std = sigma * ((*v as f64).abs() + floor);
        *v += (unit.sample(rng) * std) as f32;
    }
}

/// One composer decision at the boundary of segment `j` of phase `ddp.g`.
///
/// `theta_j` is the policy at the segment start, `delta_theta` the
/// accumulated update over the segment, `prev`/`cur` the fit records of the
/// previous and the just-completed segment (`prev = None` only for the
/// first-ever segment, which accepts all updates).
#[allow(clippy::too_many_arguments)]
pub fn compose(
    theta_j: &[f32],
    delta_theta: &[f32],
    prev: Option<&GdsRecord>,
    cur: &GdsRecord,
    ddp: &DdpRecord,
    j: usize,
    cfg: &ComposerConfig,
    rng: &mut ChaCha8Rng,
) -> ComposeOutcome {
    let improved = if cfg.cost_semantics {
        cur.qbar < ddp.best_qbar
    } else {
        cur.qbar > ddp.best_qbar
    };

    if improved {
        let theta_next = add(theta_j, delta_theta, 1.0);
        let ddp_next = DdpRecord {
            g: ddp.g + 1,
            theta_g0: theta_next.clone(),
            best_qbar: cur.qbar,
            m_g: ddp.m_g,
        };
        return ComposeOutcome {
            theta_next,
            ddp: ddp_next,
            j_next: 0,
            branch: ComposerBranch::AcceptNewBest,
        };
    }

    if j > cfg.max_segments {
        let theta_next = ddp.theta_g0.clone();
        let ddp_next = DdpRecord {
            g: ddp.g + 1,
            theta_g0: ddp.theta_g0.clone(),
            best_qbar: ddp.best_qbar,
            m_g: ddp.m_g,
        };
        return ComposeOutcome {
            theta_next,
            ddp: ddp_next,
            j_next: 0,
            branch: ComposerBranch::ResetToAnchor,
        };
    }

    let j_next = j + 1;
    let (theta_next, branch) = match prev {
        None => (add(theta_j, delta_theta, 1.0), ComposerBranch::AcceptAll),
        Some(p) => {
            let slope_up = p.a < cur.a;
            let spread_up = p.c < cur.c;
            match (slope_up, spread_up) {
                (true, true) => (add(theta_j, delta_theta, 1.0), ComposerBranch::AcceptAll),
                (true, false) => {
                    let mut t = add(theta_j, delta_theta, cfg.beta);
                    add_noise(&mut t, cfg.noise_sigmas[0], cfg.noise_floor, rng);
                    (t, ComposerBranch::PartialWithNoise)
                }
                (false, true) => {
                    let mut t = theta_j.to_vec();
                    add_noise(&mut t, cfg.noise_sigmas[1], cfg.noise_floor, rng);
                    (t, ComposerBranch::NoiseOnly)
                }
                (false, false) => {
                    let mut t = ddp.theta_g0.clone();
                    add_noise(&mut t, cfg.noise_sigmas[2], cfg.noise_floor, rng);
                    (t, ComposerBranch::ExploreAnchor)
                }
            }
        }
    };
    ComposeOutcome {
        theta_next,
        ddp: ddp.clone(),
        j_next,
        branch,
    }
}
