//! Post-hoc convergence diagnostics over completed descent phases.
//!
//! Purely observational: estimates the per-phase acceleration factors and
//! fits the finite-time convergence envelope `dQ/dt ≤ −c·Q^α` to the value
//! trajectory. No control action is derived from this report.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// Per-phase acceleration factors m_g (phase g vs g−1).
    pub m_g: Vec<f64>,
    /// Π(1 + m_g): overall descent-rate growth across phases.
    pub product: f64,
    /// Mean m_g > 0: the per-phase descent rate is accelerating.
    pub accelerating: bool,
    /// Value estimate grew over the run.
    pub diverging: bool,
    /// (c, α) of the envelope fit, when at least two descending phase
    /// transitions exist.
    pub lyapunov_fit: Option<(f64, f64)>,
}

/// Builds the report from the per-phase value estimates (one Q̄ per
/// completed descent phase). Returns `None` for fewer than two phases.
pub fn convergence_diagnostics(qbar_per_ddp: &[f64]) -> Option<ConvergenceReport> {
    if qbar_per_ddp.len() < 2 {
        return None;
    }
    let floor = 1e-12;
    let mut m_g = Vec::with_capacity(qbar_per_ddp.len() - 1);
    for w in qbar_per_ddp.windows(2) {
        let (prev, cur) = (w[0].max(floor), w[1].max(floor));
        m_g.push(prev / cur - 1.0);
    }
    let product = m_g.iter().map(|m| 1.0 + m).product();
    let mean_m = m_g.iter().sum::<f64>() / m_g.len() as f64;
    let accelerating = mean_m > 0.0;
    let diverging = qbar_per_ddp.last().unwrap() > qbar_per_ddp.first().unwrap();

    // envelope fit on descending transitions: ln(−ΔQ) = ln c + α·ln Q
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in qbar_per_ddp.windows(2) {
        let dq = w[1] - w[0];
        if dq < 0.0 && w[0] > floor {
            xs.push(w[0].ln());
            ys.push((-dq).ln());
        }
    }
    let lyapunov_fit = if xs.len() >= 2 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        if sxx > 1e-12 {
            let alpha = sxy / sxx;
            let c = (my - alpha * mx).exp();
            Some((c, alpha))
        } else {
            None
        }
    } else {
        None
    };

    Some(ConvergenceReport {
        m_g,
        product,
        accelerating,
        diverging,
        lyapunov_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_halving_gives_unit_acceleration() {
        let qbars: Vec<f64> = (0..6).map(|g| 0.5f64.powi(g)).collect();
        let report = convergence_diagnostics(&qbars).unwrap();
        for m in &report.m_g {
            assert!((m - 1.0).abs() < 1e-12, "m_g = {m}");
        }
        assert!(report.accelerating);
        assert!(!report.diverging);
    }

    #[test]
    fn constant_sequence_is_flat() {
        let report = convergence_diagnostics(&[0.3, 0.3, 0.3, 0.3]).unwrap();
        assert!(report.m_g.iter().all(|m| m.abs() < 1e-12));
        assert!(!report.accelerating);
        assert!(!report.diverging);
    }

    #[test]
    fn increasing_sequence_flags_divergence() {
        let report = convergence_diagnostics(&[0.1, 0.2, 0.4]).unwrap();
        assert!(report.m_g.iter().all(|m| *m < 0.0));
        assert!(report.diverging);
        assert!(!report.accelerating);
    }

    #[test]
    fn insufficient_history_gives_none() {
        assert!(convergence_diagnostics(&[0.5]).is_none());
        assert!(convergence_diagnostics(&[]).is_none());
    }

    #[test]
    fn envelope_fit_recovers_known_power_law() {
        // construct Q_{g+1} = Q_g − c·Q_g^α
        let (c, alpha) = (0.2, 1.5);
        let mut q = vec![1.0f64];
        for _ in 0..20 {
            let last = *q.last().unwrap();
            q.push(last - c * last.powf(alpha));
        }
        let report = convergence_diagnostics(&q).unwrap();
        let (c_fit, a_fit) = report.lyapunov_fit.unwrap();
        assert!((c_fit - c).abs() < 0.02, "c = {c_fit}");
        assert!((a_fit - alpha).abs() < 0.05, "alpha = {a_fit}");
    }
}
