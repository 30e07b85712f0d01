//! Experiment orchestration: algorithm roster, closed-loop runs, metrics
//! and timing benchmarks.

pub mod bench;
pub mod cloud;
pub mod edge;
pub mod experiment;
pub mod metrics;
pub mod split;
pub mod state;

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, FileConfig};
use crate::cpg::ConditionSpec;
use crate::plant::PlantError;

pub use bench::{bench_timing, BenchOptions, BenchReport};
pub use experiment::{run_experiment, RunOutput};
pub use metrics::{compare, last_quarter_error, MetricsError, MetricsLog, RunSummary, StepRecord};
pub use state::{build_state, StateHistory, COMMAND_WINDOW, HISTORY_PAIRS};

/// The six algorithm variants under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Pid2000,
    Apid2000,
    Mrac2000,
    Crl2rtPid,
    Crl2rtApid,
    Crl2rtMrac,
}

/// Which classical controller backs an algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicalKind {
    Pid,
    Apid,
    Mrac,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Pid2000,
        Algorithm::Apid2000,
        Algorithm::Mrac2000,
        Algorithm::Crl2rtPid,
        Algorithm::Crl2rtApid,
        Algorithm::Crl2rtMrac,
    ];

    /// Time-interleaved variants run the learned policy on odd steps.
    pub fn is_crl(&self) -> bool {
        matches!(
            self,
            Algorithm::Crl2rtPid | Algorithm::Crl2rtApid | Algorithm::Crl2rtMrac
        )
    }

    pub fn classical_kind(&self) -> ClassicalKind {
        match self {
            Algorithm::Pid2000 | Algorithm::Crl2rtPid => ClassicalKind::Pid,
            Algorithm::Apid2000 | Algorithm::Crl2rtApid => ClassicalKind::Apid,
            Algorithm::Mrac2000 | Algorithm::Crl2rtMrac => ClassicalKind::Mrac,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pid2000 => "PID2000",
            Algorithm::Apid2000 => "APID2000",
            Algorithm::Mrac2000 => "MRAC2000",
            Algorithm::Crl2rtPid => "CRL2RT_PID",
            Algorithm::Crl2rtApid => "CRL2RT_APID",
            Algorithm::Crl2rtMrac => "CRL2RT_MRAC",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "PID2000" | "2000HZ_PID" => Ok(Algorithm::Pid2000),
            "APID2000" | "2000HZ_APID" => Ok(Algorithm::Apid2000),
            "MRAC2000" | "2000HZ_MRAC" => Ok(Algorithm::Mrac2000),
            "CRL2RT_PID" => Ok(Algorithm::Crl2rtPid),
            "CRL2RT_APID" => Ok(Algorithm::Crl2rtApid),
            "CRL2RT_MRAC" => Ok(Algorithm::Crl2rtMrac),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub condition: ConditionSpec,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub total_steps: u64,
    /// Output directory for logs; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub file: FileConfig,
}

impl ExperimentConfig {
    pub fn new(condition: ConditionSpec, algorithm: Algorithm, seed: u64, steps: u64) -> Self {
        Self {
            condition,
            algorithm,
            seed,
            total_steps: steps,
            out_dir: None,
            file: FileConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metrics error: {0}")]
    Metrics(#[from] MetricsError),
    #[error("worker protocol error: {0}")]
    Protocol(String),
}

// Seed-stream tags (see `crate::stream_seed`).
pub(crate) const SEED_ACTOR: u64 = 1;
pub(crate) const SEED_CRITIC: u64 = 2;
pub(crate) const SEED_TRAINER: u64 = 3;
pub(crate) const SEED_CPG: u64 = 4;
pub(crate) const SEED_TICP: u64 = 5;
pub(crate) const SEED_COMPOSER: u64 = 6;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_roundtrip() {
        for algo in Algorithm::ALL {
            assert_eq!(algo.name().parse::<Algorithm>().unwrap(), algo);
        }
        assert!("SAC".parse::<Algorithm>().is_err());
    }

    #[test]
    fn roster_split() {
        assert!(!Algorithm::Pid2000.is_crl());
        assert!(Algorithm::Crl2rtMrac.is_crl());
        assert_eq!(Algorithm::Crl2rtApid.classical_kind(), ClassicalKind::Apid);
    }
}
