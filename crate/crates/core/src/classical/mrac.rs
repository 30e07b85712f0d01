//! Model-reference adaptive control with an online ARX plant model.
//!
//! A second-order reference model filters the desired command; recursive
//! least squares identifies a third-order autoregressive model with one
//! input term from the (measured, torque) history; the control output is an
//! inverted-model feedforward plus PID feedback on the reference tracking
//! error.

use serde::{Deserialize, Serialize};

use super::{PidGains, PidState};

const AR_ORDER: usize = 3;
/// Input taps: a zero-order-hold second-order plant needs two.
const INPUT_TAPS: usize = 2;
/// Regressor: three past outputs plus two past inputs.
const N_PARAMS: usize = AR_ORDER + INPUT_TAPS;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MracConfig {
    pub feedback: PidGains,
    /// Natural frequency of the reference model, rad/s.
    pub ref_natural_freq: f64,
    /// Damping ratio of the reference model (> 0).
    pub ref_damping: f64,
    /// RLS forgetting factor.
    pub forgetting: f64,
    /// Initial RLS covariance diagonal.
    pub initial_covariance: f64,
    /// Enables the inverted-model feedforward term.
    pub feedforward: bool,
    /// When false the raw command bypasses the reference model and the
    /// controller reduces to pure PID feedback.
    pub use_reference_model: bool,
    /// Identification samples required before the feedforward engages.
    pub ff_warmup: u64,
    /// Hard bound on the feedforward magnitude (the model inversion is only
    /// as good as the identified input gain).
    pub ff_limit: f64,
    /// Smallest identified input gain the inversion will divide by.
    pub min_input_gain: f64,
    /// Control period the reference model is discretised for.
    pub control_period: f64,
}

impl Default for MracConfig {
    fn default() -> Self {
        Self {
            feedback: PidGains::TABLE_MRAC,
            ref_natural_freq: 2.0 * std::f64::consts::PI * 20.0,
            ref_damping: 1.0,
            forgetting: 0.995,
            initial_covariance: 100.0,
            feedforward: true,
            use_reference_model: true,
            ff_warmup: 100,
            ff_limit: 1.0,
            min_input_gain: 1e-5,
            control_period: 5e-4,
        }
    }
}

/// Second-order reference dynamics discretised exactly (zero-order hold)
/// via the matrix exponential of the augmented system.
#[derive(Debug, Clone)]
struct ReferenceModel {
    omega: f64,
    zeta: f64,
    y: f64,
    y_dot: f64,
    dt: f64,
    // discrete propagator [y; y_dot] ← Ad·[y; y_dot] + Bd·u
    ad: [[f64; 2]; 2],
    bd: [f64; 2],
}

impl ReferenceModel {
    fn new(omega: f64, zeta: f64, dt: f64) -> Self {
        let (ad, bd) = discretize(omega, zeta, dt);
        Self {
            omega,
            zeta,
            y: 0.0,
            y_dot: 0.0,
            dt,
            ad,
            bd,
        }
    }

    fn ensure_dt(&mut self, dt: f64) {
        if dt != self.dt {
            let (ad, bd) = discretize(self.omega, self.zeta, dt);
            self.ad = ad;
            self.bd = bd;
            self.dt = dt;
        }
    }

    fn advance(&mut self, command: f64) -> f64 {
        let y = self.ad[0][0] * self.y + self.ad[0][1] * self.y_dot + self.bd[0] * command;
        let y_dot = self.ad[1][0] * self.y + self.ad[1][1] * self.y_dot + self.bd[1] * command;
        self.y = y;
        self.y_dot = y_dot;
        y
    }

    fn peek(&self, command: f64) -> f64 {
        self.ad[0][0] * self.y + self.ad[0][1] * self.y_dot + self.bd[0] * command
    }
}

/// ZOH discretisation of ÿ = ωₙ²(u − y) − 2ζωₙ·ẏ through the 3×3 augmented
/// matrix exponential (scaling and squaring).
fn discretize(omega: f64, zeta: f64, dt: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    // augmented [A B; 0 0], A = [[0,1],[−ω²,−2ζω]], B = [0, ω²]
    let mut m = [[0.0f64; 3]; 3];
    m[0][1] = 1.0;
    m[1][0] = -omega * omega;
    m[1][1] = -2.0 * zeta * omega;
    m[1][2] = omega * omega;
    let e = expm3(scale(&m, dt));
    ([[e[0][0], e[0][1]], [e[1][0], e[1][1]]], [e[0][2], e[1][2]])
}

fn scale(m: &[[f64; 3]; 3], s: f64) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = m[r][c] * s;
        }
    }
    out
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn expm3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    // scaling and squaring with a Taylor core
    let norm: f64 = m
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
    let scaled = scale(&m, 0.5f64.powi(squarings as i32));

    let mut result = [[0.0; 3]; 3];
    for (i, row) in result.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut term = result;
    for k in 1..=12 {
        term = scale(&matmul3(&term, &scaled), 1.0 / k as f64);
        for r in 0..3 {
            for c in 0..3 {
                result[r][c] += term[r][c];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul3(&result, &result);
    }
    result
}

/// MRAC controller state for one wing.
#[derive(Debug, Clone)]
pub struct MracState {
    pub cfg: MracConfig,
    /// Identified parameters [a1, a2, a3, b0, b1].
    pub ar_coeffs: [f64; N_PARAMS],
    covariance: [[f64; N_PARAMS]; N_PARAMS],
    reference: ReferenceModel,
    feedback: PidState,
    y_hist: [f64; AR_ORDER],
    u_hist: [f64; INPUT_TAPS],
    samples: u64,
    /// Covariance reset events.
    pub covariance_resets: u32,
}

impl MracState {
    pub fn new(cfg: MracConfig) -> Self {
        let reference =
            ReferenceModel::new(cfg.ref_natural_freq, cfg.ref_damping, cfg.control_period);
        let mut covariance = [[0.0; N_PARAMS]; N_PARAMS];
        for (i, row) in covariance.iter_mut().enumerate() {
            row[i] = cfg.initial_covariance;
        }
        Self {
            cfg,
            ar_coeffs: [0.0; N_PARAMS],
            covariance,
            reference,
            feedback: PidState::default(),
            y_hist: [0.0; AR_ORDER],
            u_hist: [0.0; INPUT_TAPS],
            samples: 0,
            covariance_resets: 0,
        }
    }

    /// Reference-model output the next `step` call will track for this
    /// command (the model state does not advance).
    pub fn reference_preview(&self, desired: f64) -> f64 {
        if self.cfg.use_reference_model {
            self.reference.peek(desired)
        } else {
            desired
        }
    }

    /// One control step: returns the torque and the reference-model output
    /// used for the feedback error.
    pub fn step(&mut self, desired: f64, measured: f64, dt: f64) -> (f64, f64) {
        debug_assert!(dt > 0.0);
        self.reference.ensure_dt(dt);

        // identify from the previous sample before computing a new torque
        if self.samples >= 1 {
            self.rls_update(measured);
        }

        let ref_out = if self.cfg.use_reference_model {
            self.reference.advance(desired)
        } else {
            desired
        };

        let u_fb = self.feedback.step(&self.cfg.feedback, ref_out - measured, dt);

        let u_ff = if self.cfg.feedforward && self.samples >= self.cfg.ff_warmup {
            let target = if self.cfg.use_reference_model {
                self.reference.peek(desired)
            } else {
                desired
            };
            let b0 = self.ar_coeffs[AR_ORDER];
            if b0.abs() > self.cfg.min_input_gain {
                // y_{k+1} = a·[y_k, y_{k−1}, y_{k−2}] + b0·u_k + b1·u_{k−1}
                let ar: f64 = (0..AR_ORDER)
                    .map(|i| {
                        self.ar_coeffs[i] * if i == 0 { measured } else { self.y_hist[i - 1] }
                    })
                    .sum();
                let carry = self.ar_coeffs[AR_ORDER + 1] * self.u_hist[0];
                ((target - ar - carry) / b0).clamp(-self.cfg.ff_limit, self.cfg.ff_limit)
            } else {
                0.0
            }
        } else {
            0.0
        };

        let torque = u_ff + u_fb;

        // shift history
        self.y_hist.rotate_right(1);
        self.y_hist[0] = measured;
        self.u_hist.rotate_right(1);
        self.u_hist[0] = torque;
        self.samples += 1;

        (torque, ref_out)
    }

    fn rls_update(&mut self, y_new: f64) {
        let x = [
            self.y_hist[0],
            self.y_hist[1],
            self.y_hist[2],
            self.u_hist[0],
            self.u_hist[1],
        ];
        let lambda = self.cfg.forgetting;

        // P x
        let mut px = [0.0; N_PARAMS];
        for r in 0..N_PARAMS {
            px[r] = (0..N_PARAMS).map(|c| self.covariance[r][c] * x[c]).sum();
        }
        let denom = lambda + x.iter().zip(&px).map(|(a, b)| a * b).sum::<f64>();
        let gain: Vec<f64> = px.iter().map(|v| v / denom).collect();
        let predicted: f64 = x.iter().zip(&self.ar_coeffs).map(|(a, b)| a * b).sum();
        let innovation = y_new - predicted;
        for i in 0..N_PARAMS {
            self.ar_coeffs[i] += gain[i] * innovation;
        }
        // P ← (P − K xᵀ P)/λ
        let mut xtp = [0.0; N_PARAMS];
        for c in 0..N_PARAMS {
            xtp[c] = (0..N_PARAMS).map(|r| x[r] * self.covariance[r][c]).sum();
        }
        for r in 0..N_PARAMS {
            for c in 0..N_PARAMS {
                self.covariance[r][c] = (self.covariance[r][c] - gain[r] * xtp[c]) / lambda;
            }
        }

        let trace: f64 = (0..N_PARAMS).map(|i| self.covariance[i][i]).sum();
        if !trace.is_finite() || trace > 1e12 || self.ar_coeffs.iter().any(|v| !v.is_finite()) {
            self.reset_covariance();
        }
    }

    fn reset_covariance(&mut self) {
        self.covariance = [[0.0; N_PARAMS]; N_PARAMS];
        for (i, row) in self.covariance.iter_mut().enumerate() {
            row[i] = self.cfg.initial_covariance;
        }
        if self.ar_coeffs.iter().any(|v| !v.is_finite()) {
            self.ar_coeffs = [0.0; N_PARAMS];
        }
        self.covariance_resets += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1e-3;

    #[test]
    fn zero_tracking_error_gives_feedforward_only() {
        // feed measured = reference output every step: the feedback error is
        // exactly zero, so with feedforward disabled the torque is exactly 0
        // and with it enabled the output is the feedforward term alone
        let mut fb_only = MracState::new(MracConfig {
            feedforward: false,
            control_period: DT,
            ..MracConfig::default()
        });
        let mut full = MracState::new(MracConfig {
            control_period: DT,
            ..MracConfig::default()
        });
        for _ in 0..300 {
            let m = fb_only.reference_preview(1.0);
            let (u_fb, ref_out) = fb_only.step(1.0, m, DT);
            assert_eq!(ref_out, m);
            assert_eq!(u_fb, 0.0, "feedback term must vanish at zero error");

            let m2 = full.reference_preview(1.0);
            let (_u, r2) = full.step(1.0, m2, DT);
            assert_eq!(r2, m2);
        }
    }

    #[test]
    fn disabled_feedforward_reduces_to_pid() {
        let mut mrac = MracState::new(MracConfig {
            feedforward: false,
            use_reference_model: false,
            control_period: DT,
            ..MracConfig::default()
        });
        let mut pid = PidState::default();
        let desired = [0.4, 0.5, 0.1, -0.2, 0.0];
        let measured = [0.0, 0.1, 0.2, 0.1, -0.1];
        for (d, m) in desired.iter().zip(&measured) {
            let (u_mrac, _) = mrac.step(*d, *m, DT);
            let u_pid = pid.step(&PidGains::TABLE_MRAC, d - m, DT);
            assert_eq!(u_mrac.to_bits(), u_pid.to_bits());
        }
    }

    #[test]
    fn tracks_known_second_order_plant_after_half_second() {
        // independent plant: y'' = −2·0.7·ωp·y' − ωp²·y + ωp²·0.8·u
        let omega_p = 30.0;
        let (ad, bd) = discretize(omega_p, 0.7, DT);
        let gain = 0.8;

        let mut mrac = MracState::new(MracConfig {
            ref_natural_freq: 15.0,
            control_period: DT,
            ff_limit: 1e4,
            ..MracConfig::default()
        });
        let (mut y, mut y_dot) = (0.0, 0.0);
        let mut ref_out = 0.0;
        for _ in 0..500 {
            let (u, r) = mrac.step(1.0, y, DT);
            ref_out = r;
            let y_next = ad[0][0] * y + ad[0][1] * y_dot + bd[0] * gain * u;
            let yd_next = ad[1][0] * y + ad[1][1] * y_dot + bd[1] * gain * u;
            y = y_next;
            y_dot = yd_next;
        }
        let offset = (y - ref_out).abs();
        assert!(
            offset < 0.05,
            "tracking offset {offset} after 0.5 s (y={y}, ref={ref_out})"
        );
    }

    #[test]
    fn covariance_blowup_resets() {
        let mut mrac = MracState::new(MracConfig::default());
        mrac.samples = 1;
        mrac.covariance[0][0] = f64::INFINITY;
        mrac.rls_update(0.1);
        assert!(mrac.covariance_resets >= 1);
        assert!(mrac.covariance[0][0].is_finite());
    }

    #[test]
    fn reference_model_discretization_matches_closed_form() {
        // critically damped: e^{At} = e^{λt}(I + N·t) with λ = −ω, N = A − λI
        let omega = 25.0;
        let dt = 1e-3;
        let (ad, bd) = discretize(omega, 1.0, dt);
        let decay = (-omega * dt).exp();
        let expected = [
            [decay * (1.0 + omega * dt), decay * dt],
            [-decay * omega * omega * dt, decay * (1.0 - omega * dt)],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (ad[r][c] - expected[r][c]).abs() < 1e-9,
                    "ad[{r}][{c}] = {} vs {}",
                    ad[r][c],
                    expected[r][c]
                );
            }
        }
        // ZOH input column: steady state of a unit step is y = 1, so
        // (I − Ad)·[1, 0]ᵀ = Bd·1 must hold
        let lhs0 = (1.0 - ad[0][0]) * 1.0 - ad[0][1] * 0.0;
        let lhs1 = -ad[1][0] * 1.0 + (1.0 - ad[1][1]) * 0.0;
        assert!((lhs0 - bd[0]).abs() < 1e-9, "{lhs0} vs {}", bd[0]);
        assert!((lhs1 - bd[1]).abs() < 1e-9, "{lhs1} vs {}", bd[1]);
    }
}
