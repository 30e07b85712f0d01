//! Lipschitz-bound safety monitoring over classical/RL step pairs.
//!
//! Over one interleaved pair the tracking error changes by
//! `ΔEr = (−PC_class + PE_rl)/2 · Δt*`; keeping a running maximum of the
//! learned policy's error-growth rate gives the empirical Lipschitz constant
//! `λ = (−PC_class + PE_rl,max)/2` and the pair-level bound
//! `ΔEr < λ·Δt*`.

use serde::Serialize;

/// Verdict of one pair check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairVerdict {
    WithinBound,
    /// The pair's error increase reached or exceeded the bound implied by
    /// the history so far.
    Violation,
}

/// Minimum admissible classical capability for a hard error bound:
/// `PC_class > PE_rl,max − ΔEr_max/Δt`.
pub fn required_pc(pe_rl_max: f64, delta_er_max: f64, dt: f64) -> f64 {
    assert!(dt > 0.0);
    pe_rl_max - delta_er_max / dt
}

/// Running capability estimates. `pc_class` is refreshed from Mode-1 steps
/// at segment boundaries; `pe_rl_max` only grows within a run.
#[derive(Debug, Clone, Serialize)]
pub struct SafetyMonitor {
    /// Classical per-step error-reduction rate, rad/s.
    pub pc_class: f64,
    /// Running max of the learned policy's error-growth rate, rad/s.
    pub pe_rl_max: f64,
    /// Hard bound on the per-pair error increase, rad.
    pub delta_er_max: f64,
    /// Pair checks that came back as violations.
    pub violations: u64,
    pub pairs_checked: u64,
    // rolling Mode-1 reduction samples for the next pc_class refresh
    #[serde(skip)]
    window_sum: f64,
    #[serde(skip)]
    window_count: u64,
}

impl SafetyMonitor {
    pub fn new(initial_pc: f64, delta_er_max: f64) -> Self {
        Self {
            pc_class: initial_pc,
            pe_rl_max: 0.0,
            delta_er_max,
            violations: 0,
            pairs_checked: 0,
            window_sum: 0.0,
            window_count: 0,
        }
    }

    /// Empirical Lipschitz constant from the current estimates.
    pub fn lambda_lipschitz(&self) -> f64 {
        (-self.pc_class + self.pe_rl_max) / 2.0
    }

    /// Records one classical step's error reduction for the next pc refresh.
    pub fn record_classical_step(&mut self, er_before: f64, er_after: f64, dt: f64) {
        self.window_sum += (er_before - er_after) / dt;
        self.window_count += 1;
    }

    /// Folds the accumulated Mode-1 samples into `pc_class` (called at
    /// segment boundaries).
    pub fn roll_segment(&mut self) {
        if self.window_count > 0 {
            self.pc_class = self.window_sum / self.window_count as f64;
            self.window_sum = 0.0;
            self.window_count = 0;
        }
    }

    /// Checks one classical/RL pair given the tracking error at the pair
    /// start and end (`dt_star` = two control periods). The verdict uses the
    /// bound established by the history so far; afterwards the pair's
    /// implied RL growth rate (from the pair identity and the current
    /// `pc_class`) feeds the running `pe_rl_max`.
    pub fn monitor_pair(&mut self, er_t: f64, er_t2: f64, dt_star: f64) -> PairVerdict {
        assert!(dt_star > 0.0);
        let delta_er = er_t2 - er_t;
        let bound = self.lambda_lipschitz() * dt_star;
        let verdict = if delta_er >= bound {
            self.violations += 1;
            PairVerdict::Violation
        } else {
            PairVerdict::WithinBound
        };
        self.pairs_checked += 1;

        // Eq. pair identity: ΔEr/Δt = (−PC + PE)/2 ⇒ PE = 2ΔEr/Δt* + PC
        let pe = 2.0 * delta_er / dt_star + self.pc_class;
        if pe > self.pe_rl_max {
            self.pe_rl_max = pe;
        }
        verdict
    }
}

/// Post-hoc Lipschitz analysis of a logged run.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub pc_class: f64,
    pub pe_rl_max: f64,
    pub lambda_lipschitz: f64,
    pub pairs: u64,
    /// Pairs whose error increase strictly exceeds λ·Δt* (beyond float
    /// slack) under the run-level constants.
    pub violations: u64,
}

/// Analyses a per-step tracking-error series (error observed at the start
/// of step k; step parity follows `select_mode`: even steps classical, odd
/// steps learned). Pairs are (RL step, classical step) starting at odd k.
pub fn analyze_error_series(errors: &[f64], dt: f64) -> Option<LipschitzReport> {
    if errors.len() < 3 {
        return None;
    }
    let dt_star = 2.0 * dt;

    // run-level classical capability: mean reduction over Mode-1 steps
    let mut sum = 0.0;
    let mut count = 0u64;
    for k in (0..errors.len() - 1).step_by(2) {
        sum += (errors[k] - errors[k + 1]) / dt;
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let pc_class = sum / count as f64;

    let mut pe_rl_max = f64::NEG_INFINITY;
    let mut deltas = Vec::new();
    let mut k = 1;
    while k + 2 < errors.len() {
        let delta_er = errors[k + 2] - errors[k];
        deltas.push(delta_er);
        let pe = 2.0 * delta_er / dt_star + pc_class;
        pe_rl_max = pe_rl_max.max(pe);
        k += 2;
    }
    if deltas.is_empty() {
        return None;
    }
    let lambda = (-pc_class + pe_rl_max) / 2.0;
    let slack = 1e-12 * (1.0 + lambda.abs() * dt_star);
    let violations = deltas
        .iter()
        .filter(|d| **d > lambda * dt_star + slack)
        .count() as u64;
    Some(LipschitzReport {
        pc_class,
        pe_rl_max,
        lambda_lipschitz: lambda,
        pairs: deltas.len() as u64,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_pc_substitutions() {
        assert!((required_pc(2.0, 0.001, 0.001) - 1.0).abs() < 1e-15);
        assert!(required_pc(2.0, 1e9, 0.001) < -1e11);
        assert_eq!(required_pc(2.0, 0.0, 0.01), 2.0);
    }

    #[test]
    fn decreasing_error_never_violates() {
        let mut m = SafetyMonitor::new(1.0, 0.1);
        m.pe_rl_max = 2.0;
        let v = m.monitor_pair(0.5, 0.4, 1e-3);
        assert_eq!(v, PairVerdict::WithinBound);
    }

    #[test]
    fn critical_point_flags_any_increase() {
        // pc_class == pe_rl_max ⇒ λ = 0 ⇒ any nonnegative ΔEr flags
        let mut m = SafetyMonitor::new(2.0, 0.1);
        m.pe_rl_max = 2.0;
        assert_eq!(m.lambda_lipschitz(), 0.0);
        let v = m.monitor_pair(0.5, 0.5001, 1e-3);
        assert_eq!(v, PairVerdict::Violation);
    }

    #[test]
    fn lambda_from_synthetic_capabilities() {
        let mut m = SafetyMonitor::new(1.0, 0.1);
        m.pe_rl_max = 2.0;
        let dt_star = 1e-3;
        assert!((m.lambda_lipschitz() * dt_star - 0.5 * dt_star).abs() < 1e-15);
    }

    #[test]
    fn pe_rl_max_monotone_nondecreasing() {
        let mut m = SafetyMonitor::new(1.0, 0.1);
        let mut last = m.pe_rl_max;
        for (a, b) in [(0.5, 0.52), (0.52, 0.51), (0.51, 0.58), (0.58, 0.40)] {
            m.monitor_pair(a, b, 1e-3);
            assert!(m.pe_rl_max >= last);
            last = m.pe_rl_max;
        }
    }

    #[test]
    fn pc_refresh_from_classical_steps() {
        let mut m = SafetyMonitor::new(0.0, 0.1);
        m.record_classical_step(0.5, 0.4, 0.1); // reduction rate 1.0
        m.record_classical_step(0.4, 0.2, 0.1); // reduction rate 2.0
        m.roll_segment();
        assert!((m.pc_class - 1.5).abs() < 1e-12);
    }

    #[test]
    fn post_hoc_analysis_zero_violations_by_construction() {
        // synthetic run: errors wiggle but stay bounded
        let mut errors = Vec::new();
        for k in 0..501 {
            let t = k as f64;
            errors.push(0.1 + 0.05 * (0.1 * t).sin());
        }
        let report = analyze_error_series(&errors, 5e-4).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.lambda_lipschitz.is_finite());
        assert!(report.pairs > 100);
    }
}
