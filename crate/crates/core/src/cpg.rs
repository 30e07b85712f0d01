//! Central-pattern-generator command trajectories and operating conditions.
//!
//! Each wing tracks `A_i·sin(2π·f·t + φ_i)` in the rest-relative frame.
//! Amplitudes are resampled stochastically at each wing's period boundary;
//! the operating conditions (frequency × yaw load) mirror the six-row
//! condition table used by the experiments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::WINGS;

pub const AMP_MIN_DEG: f64 = 45.0;
pub const AMP_MAX_DEG: f64 = 75.0;
pub const CONDITION_FREQUENCIES: [f64; 3] = [20.0, 40.0, 60.0];

/// 13-point amplitude grid in degrees: 45, 47.5, …, 75.
pub const AMP_GRID_DEG: [f64; 13] = [
    45.0, 47.5, 50.0, 52.5, 55.0, 57.5, 60.0, 62.5, 65.0, 67.5, 70.0, 72.5, 75.0,
];

#[derive(Debug, Error, PartialEq)]
pub enum CpgError {
    #[error("frequency {0} Hz is not one of the tabulated conditions")]
    UnknownFrequency(f64),
    #[error("load class must be 1 or 2, got {0}")]
    UnknownLoad(u8),
    #[error("wing index {0} out of range 1..=4")]
    BadWing(usize),
}

/// Desired-trajectory parameters for all four wings.
#[derive(Debug, Clone, Copy)]
pub struct WingCommandSpec {
    /// Amplitude per wing, rad (45°..75°).
    pub amplitude: [f64; WINGS],
    /// Flapping frequency, Hz.
    pub frequency: f64,
    /// Phase per wing, rad.
    pub phase: [f64; WINGS],
}

impl WingCommandSpec {
    /// Default phasing: fore wings (1, 4) at phase 0, hind wings (2, 3) in
    /// antiphase.
    pub fn new(amplitude_rad: f64, frequency: f64) -> Self {
        Self {
            amplitude: [amplitude_rad; WINGS],
            frequency,
            phase: [0.0, std::f64::consts::PI, std::f64::consts::PI, 0.0],
        }
    }
}

/// Desired rest-relative flapping angle of wing `i` (1-based) at time `t`.
pub fn desired_angle(spec: &WingCommandSpec, t: f64, i: usize) -> Result<f64, CpgError> {
    if !(1..=WINGS).contains(&i) {
        return Err(CpgError::BadWing(i));
    }
    let idx = i - 1;
    Ok(spec.amplitude[idx]
        * (2.0 * std::f64::consts::PI * spec.frequency * t + spec.phase[idx]).sin())
}

/// Desired angles for all wings at `t`, `t+dt`, …, `t+(horizon−1)·dt`.
pub fn command_window(
    spec: &WingCommandSpec,
    t: f64,
    dt: f64,
    horizon: usize,
) -> Vec<[f64; WINGS]> {
    (0..horizon)
        .map(|n| {
            let tn = t + n as f64 * dt;
            let mut cmd = [0.0; WINGS];
            for (idx, c) in cmd.iter_mut().enumerate() {
                *c = spec.amplitude[idx]
                    * (2.0 * std::f64::consts::PI * spec.frequency * tn + spec.phase[idx]).sin();
            }
            cmd
        })
        .collect()
}

/// Draws a flapping amplitude in radians: exactly 60° with probability 0.5,
/// otherwise a grid point weighted by the normal density N(60°, 10°).
pub fn sample_amplitude(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<f64>() < 0.5 {
        return 60.0f64.to_radians();
    }
    // discretized-normal pmf over the grid
    let weights: Vec<f64> = AMP_GRID_DEG
        .iter()
        .map(|&a| {
            let z = (a - 60.0) / 10.0;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (a, w) in AMP_GRID_DEG.iter().zip(&weights) {
        if u < *w {
            return a.to_radians();
        }
        u -= w;
    }
    AMP_GRID_DEG[AMP_GRID_DEG.len() - 1].to_radians()
}

/// One row of the operating-condition table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionSpec {
    pub frequency: f64,
    pub amp_min: f64,
    pub amp_max: f64,
    pub yaw_enabled: bool,
    pub label: String,
}

/// Builds the condition for a load class (1: no yaw, 2: yaw) and frequency.
pub fn make_condition(load: u8, frequency: f64) -> Result<ConditionSpec, CpgError> {
    if !CONDITION_FREQUENCIES.contains(&frequency) {
        return Err(CpgError::UnknownFrequency(frequency));
    }
    let yaw_enabled = match load {
        1 => false,
        2 => true,
        other => return Err(CpgError::UnknownLoad(other)),
    };
    Ok(ConditionSpec {
        frequency,
        amp_min: AMP_MIN_DEG.to_radians(),
        amp_max: AMP_MAX_DEG.to_radians(),
        yaw_enabled,
        label: format!("Load {load}, {frequency:.0} Hz configuration"),
    })
}

/// Parses a condition label like "Load 1, 40 Hz configuration" (also accepts
/// the short form "load1-40").
pub fn condition_from_label(label: &str) -> Result<ConditionSpec, CpgError> {
    let lower = label.to_lowercase();
    let load = if lower.contains("load 1") || lower.contains("load1") {
        1
    } else if lower.contains("load 2") || lower.contains("load2") {
        2
    } else {
        return Err(CpgError::UnknownLoad(0));
    };
    for f in CONDITION_FREQUENCIES {
        if lower.contains(&format!("{f:.0} hz")) || lower.contains(&format!("-{f:.0}")) {
            return make_condition(load, f);
        }
    }
    Err(CpgError::UnknownFrequency(0.0))
}

/// Stateful command generator: holds the per-wing amplitudes and resamples
/// each wing independently at its full-period boundaries, keeping commands
/// continuous at zero crossings.
#[derive(Debug, Clone)]
pub struct CommandGenerator {
    pub spec: WingCommandSpec,
    next_boundary: [f64; WINGS],
    rng: ChaCha8Rng,
}

impl CommandGenerator {
    pub fn new(condition: &ConditionSpec, rng: ChaCha8Rng) -> Self {
        let mut rng = rng;
        let mut spec = WingCommandSpec::new(60.0f64.to_radians(), condition.frequency);
        let period = 1.0 / condition.frequency;
        let mut next_boundary = [0.0; WINGS];
        for i in 0..WINGS {
            spec.amplitude[i] = sample_amplitude(&mut rng);
            // first zero-crossing boundary: 2πft + φ = 2π
            next_boundary[i] = (1.0 - spec.phase[i] / (2.0 * std::f64::consts::PI)) * period;
        }
        Self {
            spec,
            next_boundary,
            rng,
        }
    }

    /// Advances the generator to time `t` (resampling amplitudes at period
    /// boundaries) and returns the command window of length `horizon`.
    pub fn window_at(&mut self, t: f64, dt: f64, horizon: usize) -> Vec<[f64; WINGS]> {
        let period = 1.0 / self.spec.frequency;
        for i in 0..WINGS {
            while t >= self.next_boundary[i] - 1e-12 {
                self.spec.amplitude[i] = sample_amplitude(&mut self.rng);
                self.next_boundary[i] += period;
            }
        }
        command_window(&self.spec, t, dt, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn desired_angle_basics() {
        let mut spec = WingCommandSpec::new(60.0f64.to_radians(), 20.0);
        spec.phase = [0.0; 4];
        assert_eq!(desired_angle(&spec, 0.0, 1).unwrap(), 0.0);
        let quarter = desired_angle(&spec, 0.0125, 1).unwrap();
        assert!((quarter - 60.0f64.to_radians()).abs() < 1e-12);
        spec.phase[0] = std::f64::consts::FRAC_PI_2;
        let cos_start = desired_angle(&spec, 0.0, 1).unwrap();
        assert!((cos_start - 60.0f64.to_radians()).abs() < 1e-12);
        assert_eq!(desired_angle(&spec, 0.0, 5), Err(CpgError::BadWing(5)));
    }

    #[test]
    fn desired_angle_periodic() {
        let spec = WingCommandSpec::new(1.0, 40.0);
        for wing in 1..=4 {
            for k in 0..10 {
                let t = 0.013 * k as f64;
                let a = desired_angle(&spec, t, wing).unwrap();
                let b = desired_angle(&spec, t + 1.0 / 40.0, wing).unwrap();
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn window_matches_pointwise_calls() {
        let spec = WingCommandSpec::new(0.9, 20.0);
        let window = command_window(&spec, 0.37, 5e-4, 4);
        assert_eq!(window.len(), 4);
        for (n, cmd) in window.iter().enumerate() {
            for wing in 1..=4 {
                let direct = desired_angle(&spec, 0.37 + n as f64 * 5e-4, wing).unwrap();
                assert_eq!(cmd[wing - 1], direct);
            }
        }
        let single = command_window(&spec, 0.0, 5e-4, 1);
        assert_eq!(single.len(), 1);
        let zero_spec = WingCommandSpec::new(0.0, 20.0);
        assert!(command_window(&zero_spec, 0.1, 5e-4, 4)
            .iter()
            .all(|c| c.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn amplitude_support_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let grid: Vec<f64> = AMP_GRID_DEG.iter().map(|a| a.to_radians()).collect();
        for _ in 0..5000 {
            let a = sample_amplitude(&mut rng);
            let b = sample_amplitude(&mut rng2);
            assert_eq!(a, b);
            assert!(
                grid.iter().any(|g| (g - a).abs() < 1e-12),
                "amplitude {a} off-grid"
            );
        }
    }

    #[test]
    fn amplitude_distribution_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200_000;
        let sixty = 60.0f64.to_radians();
        let mut exact_sixty = 0usize;
        let mut sum = 0.0;
        for _ in 0..n {
            let a = sample_amplitude(&mut rng);
            if a == sixty {
                exact_sixty += 1;
            }
            sum += a.to_degrees();
        }
        let p60 = exact_sixty as f64 / n as f64;
        assert!(p60 >= 0.5, "P(60°) = {p60}");
        let mean = sum / n as f64;
        assert!((mean - 60.0).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn condition_table_bijection() {
        let mut labels = Vec::new();
        for load in [1u8, 2] {
            for f in CONDITION_FREQUENCIES {
                let c = make_condition(load, f).unwrap();
                assert_eq!(c.yaw_enabled, load == 2);
                assert!((c.amp_min - 45.0f64.to_radians()).abs() < 1e-12);
                assert!((c.amp_max - 75.0f64.to_radians()).abs() < 1e-12);
                labels.push(c.label.clone());
                assert_eq!(condition_from_label(&c.label).unwrap(), c);
            }
        }
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 6);
        assert!(make_condition(1, 30.0).is_err());
        assert!(make_condition(3, 20.0).is_err());
    }

    #[test]
    fn condition_labels_match_table_text() {
        assert_eq!(
            make_condition(2, 40.0).unwrap().label,
            "Load 2, 40 Hz configuration"
        );
        assert!(!make_condition(1, 20.0).unwrap().yaw_enabled);
        assert!(make_condition(2, 60.0).unwrap().yaw_enabled);
    }

    #[test]
    fn generator_resamples_at_period_boundaries() {
        let cond = make_condition(1, 20.0).unwrap();
        let mut generator = CommandGenerator::new(&cond, ChaCha8Rng::seed_from_u64(3));
        let initial = generator.spec.amplitude;
        // walk past several period boundaries
        let mut changed = false;
        for k in 0..4000 {
            generator.window_at(k as f64 * 5e-4, 5e-4, 4);
            if generator.spec.amplitude != initial {
                changed = true;
                break;
            }
        }
        assert!(changed, "amplitudes should eventually resample");
    }
}
