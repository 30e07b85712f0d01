//! Per-step metrics log, end-performance metrics and the comparison ratio.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::concerto::{ConvergenceReport, LipschitzReport, Mode};
use crate::rl_core::ActionSource;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty log")]
    EmptyLog,
    #[error("baseline must be > 0, got {0}")]
    NonPositiveBaseline(f64),
    #[error("malformed metrics row {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One control step as logged.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    pub t: f64,
    pub errors: [f64; 4],
    pub reward: f64,
    pub mode: Mode,
    pub source: ActionSource,
    pub safety_violation: bool,
}

impl StepRecord {
    /// Mean absolute tracking error over the four wings.
    pub fn mean_abs_error(&self) -> f64 {
        self.errors.iter().map(|e| e.abs()).sum::<f64>() / 4.0
    }
}

/// Append-only per-step log: one record per control step.
#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    pub records: Vec<StepRecord>,
}

impl MetricsLog {
    pub fn push(&mut self, r: StepRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_abs_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_abs_error()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "k,t,e1,e2,e3,e4,reward,mode,source,safety")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.t,
                r.errors[0],
                r.errors[1],
                r.errors[2],
                r.errors[3],
                r.reward,
                r.mode.as_str(),
                r.source.as_str(),
                u8::from(r.safety_violation),
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, MetricsError> {
        let mut log = MetricsLog::default();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(MetricsError::Malformed {
                    line: idx + 1,
                    reason: format!("expected 10 fields, got {}", fields.len()),
                });
            }
            let parse_f = |s: &str, what: &str| -> Result<f64, MetricsError> {
                s.parse().map_err(|_| MetricsError::Malformed {
                    line: idx + 1,
                    reason: format!("bad {what}: '{s}'"),
                })
            };
            let mode = match fields[7] {
                "mode1" => Mode::Mode1,
                "mode2" => Mode::Mode2,
                other => {
                    return Err(MetricsError::Malformed {
                        line: idx + 1,
                        reason: format!("bad mode '{other}'"),
                    })
                }
            };
            let source = match fields[8] {
                "classical" => ActionSource::Classical,
                "rl" => ActionSource::Rl,
                "composer" => ActionSource::Composer,
                other => {
                    return Err(MetricsError::Malformed {
                        line: idx + 1,
                        reason: format!("bad source '{other}'"),
                    })
                }
            };
            log.push(StepRecord {
                k: fields[0].parse().map_err(|_| MetricsError::Malformed {
                    line: idx + 1,
                    reason: "bad step index".into(),
                })?,
                t: parse_f(fields[1], "t")?,
                errors: [
                    parse_f(fields[2], "e1")?,
                    parse_f(fields[3], "e2")?,
                    parse_f(fields[4], "e3")?,
                    parse_f(fields[5], "e4")?,
                ],
                reward: parse_f(fields[6], "reward")?,
                mode,
                source,
                safety_violation: fields[9].trim() == "1",
            });
        }
        Ok(log)
    }
}

/// Mean absolute tracking error over the final quarter of the log, rad.
pub fn last_quarter_error(log: &MetricsLog) -> Result<f64, MetricsError> {
    if log.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let n = log.len();
    let start = n - (n / 4).max(1);
    let tail = &log.records[start..];
    Ok(tail.iter().map(|r| r.mean_abs_error()).sum::<f64>() / tail.len() as f64)
}

/// Improvement of `crl` over `baseline` in percent; negative when worse.
pub fn compare(baseline: f64, crl: f64) -> Result<f64, MetricsError> {
    if baseline <= 0.0 {
        return Err(MetricsError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - crl) / baseline)
}

/// Deterministic run summary (no wall-clock content; timing goes to its own
/// CSV).
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub condition: String,
    pub seed: u64,
    pub steps_requested: u64,
    pub steps_completed: u64,
    /// Step index of the safety violation that ended the run, if any. A
    /// failed run carries no end-performance metric, so it can never be
    /// silently averaged into summaries.
    pub failed_at_step: Option<u64>,
    pub last_quarter_error_rad: Option<f64>,
    /// Same metric as a fraction of the nominal 60° amplitude.
    pub last_quarter_error_norm: Option<f64>,
    pub mean_reward: f64,
    pub action_source_counts: BTreeMap<String, u64>,
    pub clamp_events: u64,
    pub weight_swaps: u64,
    pub crc_rejects: u64,
    pub stale_packets: u64,
    pub shipped_batches: u64,
    pub dropped_batches: u64,
    pub composer_branches: BTreeMap<String, u64>,
    pub lipschitz: Option<LipschitzReport>,
    pub convergence: Option<ConvergenceReport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: u64, err: f64) -> StepRecord {
        StepRecord {
            k,
            t: k as f64 * 5e-4,
            errors: [err, -err, err, err],
            reward: err.abs(),
            mode: if k % 2 == 0 { Mode::Mode1 } else { Mode::Mode2 },
            source: if k % 2 == 0 {
                ActionSource::Classical
            } else {
                ActionSource::Rl
            },
            safety_violation: false,
        }
    }

    #[test]
    fn constant_error_last_quarter() {
        let mut log = MetricsLog::default();
        for k in 0..1000 {
            log.push(record(k, 0.05));
        }
        let lq = last_quarter_error(&log).unwrap();
        assert!((lq - 0.05).abs() < 1e-12);
    }

    #[test]
    fn linear_ramp_last_quarter() {
        // e_k = k/(T−1) ramps 0→1: the final quarter averages 0.875
        let mut log = MetricsLog::default();
        let t = 10_000u64;
        for k in 0..t {
            log.push(record(k, k as f64 / (t - 1) as f64));
        }
        let lq = last_quarter_error(&log).unwrap();
        assert!((lq - 0.875).abs() < 1e-3, "lq = {lq}");
    }

    #[test]
    fn empty_log_rejected() {
        assert!(matches!(
            last_quarter_error(&MetricsLog::default()),
            Err(MetricsError::EmptyLog)
        ));
    }

    #[test]
    fn compare_published_pairs() {
        assert!((compare(0.060237, 0.034895).unwrap() - 42.1).abs() < 0.1);
        assert_eq!(compare(0.5, 0.5).unwrap(), 0.0);
        assert!((compare(0.01303, 0.035438).unwrap() + 172.0).abs() < 0.1);
        assert!(compare(0.0, 0.1).is_err());
        assert!(compare(-1.0, 0.1).is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_records() {
        let mut log = MetricsLog::default();
        for k in 0..50 {
            log.push(record(k, 0.01 * k as f64 + 0.123456789012345));
        }
        let mut bytes = Vec::new();
        log.write_csv(&mut bytes).unwrap();
        let back = MetricsLog::read_csv(std::io::BufReader::new(bytes.as_slice())).unwrap();
        assert_eq!(back.records.len(), log.records.len());
        for (a, b) in back.records.iter().zip(&log.records) {
            assert_eq!(a, b, "round-trip must be exact");
        }
    }

    #[test]
    fn external_recomputation_of_last_quarter_matches() {
        // simulate the "spreadsheet" path: recompute from the CSV text
        let mut log = MetricsLog::default();
        for k in 0..400 {
            log.push(record(k, (k as f64 * 0.37).sin().abs() * 0.1));
        }
        let mut bytes = Vec::new();
        log.write_csv(&mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| {
                l.split(',')
                    .take(7)
                    .skip(2)
                    .map(|v| v.parse::<f64>().unwrap())
                    .collect::<Vec<f64>>()
            })
            .collect();
        let per_step: Vec<f64> = rows
            .iter()
            .map(|e| (e[0].abs() + e[1].abs() + e[2].abs() + e[3].abs()) / 4.0)
            .collect();
        let tail = &per_step[300..];
        let external = tail.iter().sum::<f64>() / tail.len() as f64;
        let internal = last_quarter_error(&log).unwrap();
        assert!((external - internal).abs() < 1e-12);
    }
}
