//! The decision layer: time interleaving, Lipschitz safety monitoring,
//! gradient-descent segmentation and the rule-based policy composer.

mod composer;
mod diagnostics;
mod gds;
mod monitor;

pub use composer::{compose, ComposeOutcome, ComposerBranch, ComposerConfig, DdpRecord};
pub use diagnostics::{convergence_diagnostics, ConvergenceReport};
pub use gds::{fit_gds, GdsAccumulator, GdsError, GdsRecord};
pub use monitor::{
    analyze_error_series, required_pc, LipschitzReport, PairVerdict, SafetyMonitor,
};

/// The two interleaved edge phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    /// Classical control plus weight reception/analysis/loading.
    Mode1,
    /// Learned-policy inference.
    Mode2,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Mode1 => "mode1",
            Mode::Mode2 => "mode2",
        }
    }
}

/// Even steps run the classical controller (and weight maintenance), odd
/// steps run the learned policy.
pub fn select_mode(k: u64) -> Mode {
    if k % 2 == 0 {
        Mode::Mode1
    } else {
        Mode::Mode2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parity() {
        assert_eq!(select_mode(0), Mode::Mode1);
        assert_eq!(select_mode(1), Mode::Mode2);
        assert_eq!(select_mode(7), Mode::Mode2);
        // equal counts over any window of even length
        let classical = (0..1000).filter(|k| select_mode(*k) == Mode::Mode1).count();
        assert_eq!(classical, 500);
    }
}
