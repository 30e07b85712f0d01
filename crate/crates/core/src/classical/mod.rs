//! Classical controllers for the time-interleaved schedule: PID, MIT-rule
//! adaptive PID, and MRAC, plus the capability perturbation (TICP) applied
//! to controller gains at inference time.

mod mrac;

use serde::{Deserialize, Serialize};

pub use mrac::{MracConfig, MracState};

/// PID gains mapping rad-error to N·m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Baseline PID gains.
    pub const TABLE_PID: PidGains = PidGains {
        kp: 4.80e-1,
        ki: 2.00e-5,
        kd: 7.00e-4,
    };

    /// Adaptive-PID initial gains: 20% above the baseline so adaptation has
    /// headroom to decay without losing capability.
    pub const TABLE_APID: PidGains = PidGains {
        kp: 5.76e-1,
        ki: 2.40e-5,
        kd: 8.40e-4,
    };

    /// Feedback gains of the MRAC controller (same values as the APID row).
    pub const TABLE_MRAC: PidGains = PidGains {
        kp: 5.76e-1,
        ki: 2.40e-5,
        kd: 8.40e-4,
    };

    pub fn scaled(&self, factor: f64) -> PidGains {
        PidGains {
            kp: self.kp * factor,
            ki: self.ki * factor,
            kd: self.kd * factor,
        }
    }
}

/// One discrete PID step: rectangular integration, backward-difference
/// derivative, no derivative kick on the first step (`prev_error = None`).
///
/// Returns `(torque, updated integral, updated previous error)`.
pub fn pid_step(
    gains: &PidGains,
    error: f64,
    integ: f64,
    prev_error: Option<f64>,
    dt: f64,
) -> (f64, f64, f64) {
    debug_assert!(dt > 0.0);
    let integ_next = integ + error * dt;
    let derivative = (error - prev_error.unwrap_or(error)) / dt;
    let torque = gains.kp * error + gains.ki * integ_next + gains.kd * derivative;
    (torque, integ_next, error)
}

/// Per-wing PID controller state.
#[derive(Debug, Clone, Default)]
pub struct PidState {
    pub integ: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    pub fn step(&mut self, gains: &PidGains, error: f64, dt: f64) -> f64 {
        let (u, integ, prev) = pid_step(gains, error, self.integ, self.prev_error, dt);
        self.integ = integ;
        self.prev_error = Some(prev);
        u
    }
}

/// Adaptive PID: gains follow the MIT rule with the standard sensitivity
/// surrogate (the error signal itself, its integral, and its difference
/// quotient for kp/ki/kd respectively).
#[derive(Debug, Clone)]
pub struct ApidState {
    pub gains: PidGains,
    pub mit_rate: f64,
    pub pid: PidState,
    /// Which gains adapt. All three by default.
    pub adapt: [bool; 3],
    /// Count of gain-floor clamp events.
    pub floor_clamps: u32,
}

impl Default for ApidState {
    fn default() -> Self {
        Self {
            gains: PidGains::TABLE_APID,
            mit_rate: 5e-6,
            pid: PidState::default(),
            adapt: [true; 3],
            floor_clamps: 0,
        }
    }
}

impl ApidState {
    /// Adapts the gains from the current error, then runs the PID step with
    /// the adapted gains. `_ref_out` is accepted for interface symmetry with
    /// MRAC; the MIT surrogate here uses the raw tracking error.
    pub fn step(&mut self, error: f64, _ref_out: f64, dt: f64) -> f64 {
        let integ_next = self.pid.integ + error * dt;
        let derivative = (error - self.pid.prev_error.unwrap_or(error)) / dt;
        if self.adapt[0] {
            self.gains.kp -= self.mit_rate * error * error;
        }
        if self.adapt[1] {
            self.gains.ki -= self.mit_rate * error * integ_next;
        }
        if self.adapt[2] {
            self.gains.kd -= self.mit_rate * error * derivative;
        }
        for g in [&mut self.gains.kp, &mut self.gains.ki, &mut self.gains.kd] {
            if *g < 0.0 {
                *g = 0.0;
                self.floor_clamps += 1;
            }
        }
        self.pid.step(&self.gains, error, dt)
    }
}

/// Multiplicative capability perturbation applied to controller gains at
/// inference time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TicpConfig {
    /// Fractional gain perturbation, |epsilon| <= 0.2.
    pub epsilon: f64,
    /// +1 or −1.
    pub sign: f64,
}

impl TicpConfig {
    pub fn new(epsilon: f64, sign: f64) -> Result<Self, String> {
        if !(epsilon.is_finite() && epsilon.abs() <= 0.2) {
            return Err(format!("|epsilon| must be <= 0.2, got {epsilon}"));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(format!("sign must be ±1, got {sign}"));
        }
        Ok(Self { epsilon, sign })
    }
}

/// Scales all gains by `(1 + sign·epsilon)`.
pub fn apply_ticp(gains: &PidGains, cfg: &TicpConfig) -> PidGains {
    gains.scaled(1.0 + cfg.sign * cfg.epsilon)
}
