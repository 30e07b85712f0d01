//! Per-step, per-stage timing instrumentation and summary tables.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

/// Stages of one control step. Labels mirror the timing-table rows of the
/// reference breakdown; the tensorization stages stay at zero on the direct
/// matrix path and are only exercised by the naive baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    SensorUnpack,
    SharedSection,
    WeightMaintenance,
    ClassicalControl,
    StateTensorization,
    NetworkInference,
    ActionDetensorization,
    BufferTransmission,
    ActionTransmission,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::SensorUnpack,
        Stage::SharedSection,
        Stage::WeightMaintenance,
        Stage::ClassicalControl,
        Stage::StateTensorization,
        Stage::NetworkInference,
        Stage::ActionDetensorization,
        Stage::BufferTransmission,
        Stage::ActionTransmission,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Stage::SensorUnpack => "Sensor data unpacking process",
            Stage::SharedSection => "Shared Section of the Two Modes",
            Stage::WeightMaintenance => "Reception, Analysis, and Loading of Weight",
            Stage::ClassicalControl => "Classical Control",
            Stage::StateTensorization => "State Tensorization",
            Stage::NetworkInference => "Network inference",
            Stage::ActionDetensorization => "Action de-tensorization",
            Stage::BufferTransmission => "Transmission of Memory Buffer",
            Stage::ActionTransmission => "Transmission of Action",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

/// Stage durations (seconds) for one control step.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TimingRecord {
    durations: [f64; 9],
}

impl TimingRecord {
    pub fn set(&mut self, stage: Stage, seconds: f64) {
        self.durations[stage.index()] = seconds;
    }

    pub fn add(&mut self, stage: Stage, seconds: f64) {
        self.durations[stage.index()] += seconds;
    }

    pub fn get(&self, stage: Stage) -> f64 {
        self.durations[stage.index()]
    }

    pub fn total(&self) -> f64 {
        self.durations.iter().sum()
    }
}

/// Monotonic stopwatch that writes elapsed segments into a record.
pub struct StageClock {
    last: Instant,
}

impl StageClock {
    pub fn start() -> Self {
        Self {
            last: Instant::now(),
        }
    }

    /// Charges the time since the previous mark to `stage`.
    pub fn mark(&mut self, record: &mut TimingRecord, stage: Stage) {
        let now = Instant::now();
        record.add(stage, now.duration_since(self.last).as_secs_f64());
        self.last = now;
    }

    /// Resets the reference point without charging anything.
    pub fn skip(&mut self) {
        self.last = Instant::now();
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub label: &'static str,
    pub mean_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub stages: Vec<StageSummary>,
    pub total_mean_s: f64,
    pub total_p99_s: f64,
    pub total_max_s: f64,
    pub total_median_s: f64,
    /// 1 / max(total): the control frequency the slowest step would allow.
    pub slowest_hz: f64,
    pub steps: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Mean/p99/max per stage plus the total-time distribution.
pub fn summarize(records: &[TimingRecord]) -> TimingSummary {
    let n = records.len().max(1) as f64;
    let mut stages = Vec::with_capacity(Stage::ALL.len());
    for stage in Stage::ALL {
        let mut values: Vec<f64> = records.iter().map(|r| r.get(stage)).collect();
        values.sort_by(f64::total_cmp);
        stages.push(StageSummary {
            label: stage.label(),
            mean_s: values.iter().sum::<f64>() / n,
            p99_s: percentile(&values, 0.99),
            max_s: values.last().copied().unwrap_or(0.0),
        });
    }
    let mut totals: Vec<f64> = records.iter().map(|r| r.total()).collect();
    totals.sort_by(f64::total_cmp);
    let total_max = totals.last().copied().unwrap_or(0.0);
    TimingSummary {
        stages,
        total_mean_s: totals.iter().sum::<f64>() / n,
        total_p99_s: percentile(&totals, 0.99),
        total_max_s: total_max,
        total_median_s: percentile(&totals, 0.5),
        slowest_hz: if total_max > 0.0 { 1.0 / total_max } else { 0.0 },
        steps: records.len(),
    }
}

impl TimingSummary {
    /// CSV mirroring the timing-table row labels.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "stage,mean_s,p99_s,max_s")?;
        for s in &self.stages {
            writeln!(out, "\"{}\",{:.9e},{:.9e},{:.9e}", s.label, s.mean_s, s.p99_s, s.max_s)?;
        }
        writeln!(
            out,
            "\"Total Algorithm Execution Time\",{:.9e},{:.9e},{:.9e}",
            self.total_mean_s, self.total_p99_s, self.total_max_s
        )?;
        writeln!(out, "\"Slowest Control Frequency /Hz\",{:.2},,", self.slowest_hz)?;
        Ok(())
    }
}
