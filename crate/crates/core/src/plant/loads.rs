//! Surrogate aerodynamic, interference, membrane and yaw load models.
//!
//! The platform's detailed load sub-models (quasi-steady single-wing
//! aerodynamics, tandem interference correction, viscoelastic tensioned
//! membrane, yaw mechanism) are replaced by configurable surrogates that
//! keep their qualitative character: quadratic drag, periodic interference
//! scaling, a stiff deadzone spring-damper constraint on torsion, and an
//! impulsive square-wave yaw disturbance.

use serde::{Deserialize, Serialize};

use super::PlantState;

/// Per-wing torques entering the equations of motion.
///
/// `t_yw`/`t_zw` already include the `(c_tandem + 1)` interference scaling;
/// the membrane and yaw torques are not scaled.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadSet {
    /// Torsion-axis aerodynamic torque per wing, N·m.
    pub t_yw: [f64; 4],
    /// Flapping-axis aerodynamic torque per wing, N·m.
    pub t_zw: [f64; 4],
    /// Membrane constraint torque per wing, N·m.
    pub t_vtm: [f64; 4],
    /// Yaw disturbance torque per wing, N·m (zero when disabled).
    pub t_yaw: [f64; 4],
    /// Interference coefficient used for the scaling, per wing.
    pub c_tandem: [f64; 4],
}

/// Coefficients of the surrogate load models.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadModelConfig {
    /// Flapping-axis quadratic drag coefficient, N·m·s²/rad².
    pub aero_drag_coeff: f64,
    /// Torsion-axis coupling coefficient, N·m·s²/rad².
    pub aero_couple_coeff: f64,
    /// Mean of the tandem interference coefficient.
    pub tandem_mean: f64,
    /// Oscillation amplitude of the interference coefficient.
    pub tandem_amp: f64,
    /// Phase of the interference oscillation, rad.
    pub tandem_phase: f64,
    /// Frequency of the interference oscillation, Hz (the flapping frequency).
    pub tandem_freq_hz: f64,
    /// Membrane spring stiffness outside the slack band, N·m/rad.
    pub membrane_stiffness: f64,
    /// Membrane damping, N·m·s/rad.
    pub membrane_damping: f64,
    /// Torsion slack band half-width, rad.
    pub membrane_slack: f64,
    /// Yaw square-wave amplitude, N·m.
    pub yaw_amp: f64,
    /// Yaw square-wave period, s.
    pub yaw_period: f64,
    pub yaw_enabled: bool,
    /// Disables all load models (used by fixed-point and energy tests).
    pub disabled: bool,
}

impl Default for LoadModelConfig {
    fn default() -> Self {
        Self {
            aero_drag_coeff: 3e-6,
            aero_couple_coeff: 1e-6,
            tandem_mean: 0.2,
            tandem_amp: 0.1,
            tandem_phase: 0.0,
            tandem_freq_hz: 20.0,
            membrane_stiffness: 0.02,
            membrane_damping: 1e-5,
            membrane_slack: 0.35,
            yaw_amp: 5e-3,
            yaw_period: 0.5,
            yaw_enabled: false,
            disabled: false,
        }
    }
}

impl LoadModelConfig {
    /// All-zero loads; the plant reduces to motors + springs.
    pub fn disabled() -> Self {
        Self {
            disabled: true,
            yaw_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let mags = [
            self.aero_drag_coeff,
            self.aero_couple_coeff,
            self.membrane_stiffness,
            self.membrane_damping,
            self.yaw_amp,
            self.yaw_period,
        ];
        if mags.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err("load magnitudes must be finite and >= 0".into());
        }
        if !(0.0..=std::f64::consts::FRAC_PI_4).contains(&self.membrane_slack) {
            return Err("membrane_slack must lie in [0, pi/4]".into());
        }
        Ok(())
    }
}

/// Evaluates all surrogate loads for the given state at time `t`.
pub fn compose_loads(state: &PlantState, cfg: &LoadModelConfig, t: f64) -> LoadSet {
    let mut loads = LoadSet::default();
    if cfg.disabled {
        return loads;
    }

    let c_tandem = cfg.tandem_mean
        + cfg.tandem_amp
            * (2.0 * std::f64::consts::PI * t * cfg.tandem_freq_hz + cfg.tandem_phase).sin();
    let yaw = if cfg.yaw_enabled {
        let phase = (t / cfg.yaw_period).rem_euclid(1.0);
        if phase < 0.5 {
            cfg.yaw_amp
        } else {
            -cfg.yaw_amp
        }
    } else {
        0.0
    };

    for i in 0..4 {
        let rate = state.phi_dot[i];
        let t_y_wing = cfg.aero_couple_coeff * rate * rate;
        let t_z_wing = -cfg.aero_drag_coeff * rate * rate.abs();
        loads.c_tandem[i] = c_tandem;
        loads.t_yw[i] = t_y_wing * (c_tandem + 1.0);
        loads.t_zw[i] = t_z_wing * (c_tandem + 1.0);

        let theta = state.theta[i];
        let stretch = (theta.abs() - cfg.membrane_slack).max(0.0);
        loads.t_vtm[i] = -cfg.membrane_stiffness * theta.signum() * stretch
            - cfg.membrane_damping * state.theta_dot[i];
        loads.t_yaw[i] = yaw;
    }
    loads
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest_state() -> PlantState {
        PlantState::default()
    }

    #[test]
    fn rest_state_produces_no_torques() {
        let cfg = LoadModelConfig::default();
        let loads = compose_loads(&rest_state(), &cfg, 0.123);
        for i in 0..4 {
            assert_eq!(loads.t_yw[i], 0.0);
            assert_eq!(loads.t_zw[i], 0.0);
            assert_eq!(loads.t_vtm[i], 0.0);
            assert_eq!(loads.t_yaw[i], 0.0);
        }
    }

    #[test]
    fn rest_state_with_yaw_enabled_has_square_wave_only() {
        let cfg = LoadModelConfig {
            yaw_enabled: true,
            ..LoadModelConfig::default()
        };
        let early = compose_loads(&rest_state(), &cfg, 0.1);
        let late = compose_loads(&rest_state(), &cfg, 0.3);
        assert_eq!(early.t_yaw[0], cfg.yaw_amp);
        assert_eq!(late.t_yaw[0], -cfg.yaw_amp);
        assert_eq!(early.t_zw[0], 0.0);
    }

    #[test]
    fn drag_matches_direct_evaluation() {
        // φ̇ = 1 rad/s, drag coeff 0.01, zero interference → t_zw = -0.01
        let mut state = rest_state();
        state.phi_dot[0] = 1.0;
        let cfg = LoadModelConfig {
            aero_drag_coeff: 0.01,
            aero_couple_coeff: 0.0,
            tandem_mean: 0.0,
            tandem_amp: 0.0,
            ..LoadModelConfig::default()
        };
        let loads = compose_loads(&state, &cfg, 0.0);
        assert!((loads.t_zw[0] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn membrane_deadzone_inside_slack() {
        let mut state = rest_state();
        state.theta[0] = 0.1;
        let cfg = LoadModelConfig {
            membrane_slack: 0.2,
            ..LoadModelConfig::default()
        };
        let loads = compose_loads(&state, &cfg, 0.0);
        assert_eq!(loads.t_vtm[0], 0.0);
    }

    #[test]
    fn membrane_engages_outside_slack() {
        let mut state = rest_state();
        state.theta[0] = 0.4;
        let cfg = LoadModelConfig {
            membrane_stiffness: 1.0,
            membrane_damping: 0.0,
            membrane_slack: 0.2,
            ..LoadModelConfig::default()
        };
        let loads = compose_loads(&state, &cfg, 0.0);
        assert!((loads.t_vtm[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn slack_validation_bounds() {
        let cfg = LoadModelConfig {
            membrane_slack: 1.0,
            ..LoadModelConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(LoadModelConfig::default().validate().is_ok());
    }
}
