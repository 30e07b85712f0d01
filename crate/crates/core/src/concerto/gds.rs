//! Gradient-descent-segment statistics and update accumulation.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GdsError {
    #[error("need at least 2 points for a segment fit, got {0}")]
    TooShort(usize),
}

/// Per-segment composer statistics: least-squares line over the in-segment
/// value estimates plus the accumulated policy delta.
#[derive(Debug, Clone)]
pub struct GdsRecord {
    /// Segment index within the current descent phase.
    pub j: usize,
    /// Descent slope (value estimate per step).
    pub a: f64,
    /// Fit intercept.
    pub b: f64,
    /// Residual spread (RMS about the fitted line).
    pub c: f64,
    /// Accumulated policy delta over the segment.
    pub delta_theta: Vec<f32>,
    /// Segment-level discounted-cost estimate.
    pub qbar: f64,
}

/// Ordinary least squares of `q_series[k]` against k = 0..n−1.
/// Returns (slope, intercept, residual RMS).
pub fn fit_gds(q_series: &[f64]) -> Result<(f64, f64, f64), GdsError> {
    let n = q_series.len();
    if n < 2 {
        return Err(GdsError::TooShort(n));
    }
    let nf = n as f64;
    let mean_k = (nf - 1.0) / 2.0;
    let mean_q = q_series.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, q) in q_series.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxx += dk * dk;
        sxy += dk * (q - mean_q);
    }
    let a = sxy / sxx;
    let b = mean_q - a * mean_k;
    let ss: f64 = q_series
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let r = q - (a * k as f64 + b);
            r * r
        })
        .sum();
    Ok((a, b, (ss / nf).sqrt()))
}

/// Exact running sums of the per-step policy deltas at both hierarchy
/// levels. A segment spans `segment_len` update events (the inclusive
/// k = 0..L summation makes that L+1 for segment length parameter L).
#[derive(Debug, Clone)]
pub struct GdsAccumulator {
    segment_len: usize,
    segment_sum: Vec<f32>,
    phase_sum: Vec<f32>,
    in_segment: usize,
}

impl GdsAccumulator {
    pub fn new(param_count: usize, segment_len: usize) -> Self {
        assert!(segment_len >= 1);
        Self {
            segment_len,
            segment_sum: vec![0.0; param_count],
            phase_sum: vec![0.0; param_count],
            in_segment: 0,
        }
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn in_segment(&self) -> usize {
        self.in_segment
    }

    /// Adds one update event; returns the completed segment sum `Δθ_j` when
    /// this event closes the segment.
    pub fn push(&mut self, delta: &[f32]) -> Option<Vec<f32>> {
        debug_assert_eq!(delta.len(), self.segment_sum.len());
        for ((seg, phase), d) in self
            .segment_sum
            .iter_mut()
            .zip(self.phase_sum.iter_mut())
            .zip(delta)
        {
            *seg += d;
            *phase += d;
        }
        self.in_segment += 1;
        if self.in_segment >= self.segment_len {
            self.in_segment = 0;
            let sum = std::mem::replace(&mut self.segment_sum, vec![0.0; self.phase_sum.len()]);
            Some(sum)
        } else {
            None
        }
    }

    /// Running `Δθ_g` for the current descent phase.
    pub fn phase_sum(&self) -> &[f32] {
        &self.phase_sum
    }

    /// Clears the phase-level sum (descent-phase boundary).
    pub fn reset_phase(&mut self) {
        self.phase_sum.iter_mut().for_each(|v| *v = 0.0);
    }
}
