//! 8-DOF tandem-wing plant: four flapping angles, four torsion angles.
//!
//! The equations of motion come from the Lagrangian model of the
//! direct-drive bench: each wing carries a motor rotor on its flapping axis,
//! a torsion spring tuned to the commanded flapping frequency, and external
//! torques from the surrogate load models. Wings 2 and 3 rest at −π on the
//! flapping axis (constant offset terms in their equations); observations
//! are reported relative to the rest pose so commands and tracking errors
//! share one frame for all four wings.

pub mod loads;
mod radau;

use std::io::Write;

use thiserror::Error;

pub use loads::{compose_loads, LoadModelConfig, LoadSet};
pub use radau::{RadauError, RadauOptions, RadauStats};

pub const WINGS: usize = 4;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("singular inertia: c_det = {0:.3e} must be > 0")]
    SingularInertia(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integrator failure: {0}")]
    Step(#[from] RadauError),
}

/// Wing/rotor inertia tensor entries and the derived determinant scalar.
#[derive(Debug, Clone, Copy)]
pub struct InertiaParams {
    /// Wing moment of inertia about its Y axis, kg·m².
    pub j_w_yy: f64,
    /// Wing product of inertia (Y-Z coupling), kg·m².
    pub j_w_yz: f64,
    /// Wing moment of inertia about its Z axis, kg·m².
    pub j_w_zz: f64,
    /// Motor rotor moment of inertia, kg·m².
    pub j_m_zz: f64,
    /// j_m_zz·j_w_yy + j_w_yy·j_w_zz − j_w_yz², kg²·m⁴.
    pub c_det: f64,
}

impl InertiaParams {
    pub fn new(j_w_yy: f64, j_w_yz: f64, j_w_zz: f64, j_m_zz: f64) -> Result<Self, PlantError> {
        for (name, v) in [("j_w_yy", j_w_yy), ("j_w_zz", j_w_zz), ("j_m_zz", j_m_zz)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(PlantError::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !j_w_yz.is_finite() {
            return Err(PlantError::InvalidParameter("j_w_yz must be finite".into()));
        }
        let c_det = j_m_zz * j_w_yy + j_w_yy * j_w_zz - j_w_yz * j_w_yz;
        if c_det <= 0.0 {
            return Err(PlantError::SingularInertia(c_det));
        }
        Ok(Self {
            j_w_yy,
            j_w_yz,
            j_w_zz,
            j_m_zz,
            c_det,
        })
    }
}

impl Default for InertiaParams {
    /// Placeholder bench inertias; every value is configurable.
    fn default() -> Self {
        Self::new(1e-6, 2e-7, 8e-7, 1e-6).unwrap()
    }
}

/// Torsion spring stiffness for a design flapping frequency:
/// `K_A = 4π²·f_exp²·J_M,ZZ`.
pub fn spring_stiffness(f_exp_hz: f64, j_m_zz: f64) -> Result<f64, PlantError> {
    if !f_exp_hz.is_finite() || f_exp_hz < 0.0 {
        return Err(PlantError::InvalidParameter(format!(
            "f_exp must be finite and >= 0, got {f_exp_hz}"
        )));
    }
    if !j_m_zz.is_finite() || j_m_zz <= 0.0 {
        return Err(PlantError::InvalidParameter(format!(
            "j_m_zz must be finite and > 0, got {j_m_zz}"
        )));
    }
    let tau = 2.0 * std::f64::consts::PI;
    Ok(tau * tau * f_exp_hz * f_exp_hz * j_m_zz)
}

/// Per-wing spring stiffnesses, constant during a run.
#[derive(Debug, Clone, Copy)]
pub struct SpringBank {
    /// Stiffness per wing, N·m/rad.
    pub k_a: [f64; WINGS],
    /// Design flapping frequency the springs were selected for, Hz.
    pub f_exp_hz: f64,
}

impl SpringBank {
    /// Uniform spring bank tuned to `f_exp_hz`.
    pub fn for_frequency(f_exp_hz: f64, inertia: &InertiaParams) -> Result<Self, PlantError> {
        let k = spring_stiffness(f_exp_hz, inertia.j_m_zz)?;
        Ok(Self {
            k_a: [k; WINGS],
            f_exp_hz,
        })
    }
}

/// Full mechanical state. Flapping angles are absolute: wings 2 and 3 rest
/// at −π unless the offset terms are disabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub phi: [f64; WINGS],
    pub phi_dot: [f64; WINGS],
    pub theta: [f64; WINGS],
    pub theta_dot: [f64; WINGS],
    /// Simulation time, s.
    pub t: f64,
}

impl Default for PlantState {
    fn default() -> Self {
        Self {
            phi: [0.0; WINGS],
            phi_dot: [0.0; WINGS],
            theta: [0.0; WINGS],
            theta_dot: [0.0; WINGS],
            t: 0.0,
        }
    }
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.phi.iter().all(|v| v.is_finite())
            && self.phi_dot.iter().all(|v| v.is_finite())
            && self.theta.iter().all(|v| v.is_finite())
            && self.theta_dot.iter().all(|v| v.is_finite())
            && self.t.is_finite()
    }

    fn to_vec(self) -> [f64; 16] {
        let mut y = [0.0; 16];
        y[0..4].copy_from_slice(&self.phi);
        y[4..8].copy_from_slice(&self.theta);
        y[8..12].copy_from_slice(&self.phi_dot);
        y[12..16].copy_from_slice(&self.theta_dot);
        y
    }

    fn from_vec(y: &[f64; 16], t: f64) -> Self {
        let mut s = PlantState {
            t,
            ..Default::default()
        };
        s.phi.copy_from_slice(&y[0..4]);
        s.theta.copy_from_slice(&y[4..8]);
        s.phi_dot.copy_from_slice(&y[8..12]);
        s.theta_dot.copy_from_slice(&y[12..16]);
        s
    }
}

/// Scaled motor torque command. Actions outside [−1, 1] are clamped before
/// scaling; the clamp count is kept for exploration bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct MotorCommand {
    pub action: [f64; WINGS],
    pub const_motor: f64,
    pub t_m: [f64; WINGS],
    pub clamped: u32,
}

impl MotorCommand {
    pub fn new(action: [f64; WINGS], const_motor: f64) -> Self {
        let (t_m, clamped, action) = motor_torques(action, const_motor);
        Self {
            action,
            const_motor,
            t_m,
            clamped,
        }
    }
}

/// Scales a dimensionless action 4-vector to motor torques in N·m.
///
/// Returns the torques, the number of clamped components, and the clamped
/// action vector.
pub fn motor_torques(action: [f64; WINGS], const_motor: f64) -> ([f64; WINGS], u32, [f64; WINGS]) {
    let mut t_m = [0.0; WINGS];
    let mut clamped_action = [0.0; WINGS];
    let mut clamped = 0;
    for i in 0..WINGS {
        let a = action[i].clamp(-1.0, 1.0);
        if a != action[i] {
            clamped += 1;
        }
        clamped_action[i] = a;
        t_m[i] = const_motor * a;
    }
    (t_m, clamped, clamped_action)
}

/// Evaluates the eight angular accelerations (φ̈₁..₄, θ̈₁..₄).
///
/// Straight transcription of the Lagrangian equations of motion; the
/// `−π·J_W,YY·K_A/C` offset terms of wings 2 and 3 are included unless
/// `zero_rest_offset` is set.
pub fn accelerations(
    state: &PlantState,
    t_m: &[f64; WINGS],
    loads: &LoadSet,
    inertia: &InertiaParams,
    springs: &SpringBank,
    zero_rest_offset: bool,
) -> [f64; 8] {
    let c = inertia.c_det;
    let j_yy = inertia.j_w_yy;
    let j_yz = inertia.j_w_yz;
    let j_zz = inertia.j_w_zz;
    let j_m = inertia.j_m_zz;
    let pi = std::f64::consts::PI;

    let mut acc = [0.0; 8];
    for i in 0..WINGS {
        let k_a = springs.k_a[i];
        let has_offset = !zero_rest_offset && (i == 1 || i == 2);
        let phi = state.phi[i];
        // shared spring factors so the wing-2/3 offset terms cancel exactly
        // at the −π rest pose
        let spring_yy = j_yy * k_a / c;
        let spring_yz = j_yz * k_a / c;

        let mut phi_dd = -spring_yy * phi
            + (j_yy / c) * t_m[i]
            + (j_yy / c) * loads.t_zw[i]
            - (j_yz / c) * loads.t_yw[i]
            - (j_yz / c) * loads.t_vtm[i]
            - (j_yz / c) * loads.t_yaw[i];
        if has_offset {
            phi_dd -= spring_yy * pi;
        }

        let mut theta_dd = (j_m / c) * loads.t_vtm[i]
            + (j_m / c) * loads.t_yw[i]
            + spring_yz * phi
            - (j_yz / c) * t_m[i]
            - (j_yz / c) * loads.t_zw[i]
            + (j_zz / c) * loads.t_vtm[i]
            + (j_zz / c) * loads.t_yw[i]
            + (j_zz / c) * loads.t_yaw[i];
        if has_offset {
            theta_dd += spring_yz * pi;
        }

        acc[i] = phi_dd;
        acc[i + 4] = theta_dd;
    }
    acc
}

/// Total mechanical energy with loads off: per-wing quadratic form of the
/// mass matrix plus spring energy about the rest pose. Conserved by the true
/// dynamics when all loads and motor torques are zero.
pub fn mechanical_energy(
    state: &PlantState,
    inertia: &InertiaParams,
    springs: &SpringBank,
    rest: &[f64; WINGS],
) -> f64 {
    let mut e = 0.0;
    for i in 0..WINGS {
        let pd = state.phi_dot[i];
        let td = state.theta_dot[i];
        let kinetic = 0.5 * (inertia.j_m_zz + inertia.j_w_zz) * pd * pd
            + inertia.j_w_yz * pd * td
            + 0.5 * inertia.j_w_yy * td * td;
        let stretch = state.phi[i] - rest[i];
        e += kinetic + 0.5 * springs.k_a[i] * stretch * stretch;
    }
    e
}

/// Safety verdict for one control step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyVerdict {
    Ok,
    /// A wing's tracking error strictly exceeded 90°; the trial must end.
    Violation { wing: usize },
}

/// Flags a violation iff any |phi[i] − phi_exp[i]| strictly exceeds π/2.
/// An error of exactly 90° still counts as safe.
pub fn check_safety(phi: &[f64; WINGS], phi_exp: &[f64; WINGS]) -> SafetyVerdict {
    for i in 0..WINGS {
        if (phi[i] - phi_exp[i]).abs() > std::f64::consts::FRAC_PI_2 {
            return SafetyVerdict::Violation { wing: i };
        }
    }
    SafetyVerdict::Ok
}

/// The simulated platform: parameters are immutable after construction,
/// stepping is single-threaded and `PlantState` is a plain value.
#[derive(Debug, Clone)]
pub struct Plant {
    pub inertia: InertiaParams,
    pub springs: SpringBank,
    pub loads: LoadModelConfig,
    /// Disables the wing-2/3 −π offset terms (diagnostic runs only).
    pub zero_rest_offset: bool,
    pub radau: RadauOptions,
}

impl Plant {
    pub fn new(
        inertia: InertiaParams,
        springs: SpringBank,
        loads: LoadModelConfig,
    ) -> Result<Self, PlantError> {
        loads.validate().map_err(PlantError::InvalidParameter)?;
        Ok(Self {
            inertia,
            springs,
            loads,
            zero_rest_offset: false,
            radau: RadauOptions::default(),
        })
    }

    /// Rest pose of the flapping axes: wings 2 and 3 sit at −π when the
    /// offset terms are active.
    pub fn rest_offsets(&self) -> [f64; WINGS] {
        if self.zero_rest_offset {
            [0.0; WINGS]
        } else {
            [0.0, -std::f64::consts::PI, -std::f64::consts::PI, 0.0]
        }
    }

    /// State at the rest pose with zero rates.
    pub fn initial_state(&self) -> PlantState {
        PlantState {
            phi: self.rest_offsets(),
            ..Default::default()
        }
    }

    /// Rest-relative flapping angles — the frame shared with commands,
    /// tracking errors and the learned policy's observations.
    pub fn observations(&self, state: &PlantState) -> [f64; WINGS] {
        let rest = self.rest_offsets();
        let mut obs = [0.0; WINGS];
        for i in 0..WINGS {
            obs[i] = state.phi[i] - rest[i];
        }
        obs
    }

    /// Advances the state by one event step `dt` under constant motor
    /// torques. The integrator takes adaptive internal substeps; the result
    /// is bitwise deterministic for identical inputs and solver settings.
    pub fn step(
        &self,
        state: &PlantState,
        t_m: &[f64; WINGS],
        dt: f64,
    ) -> Result<PlantState, PlantError> {
        let mut y = state.to_vec();
        let inertia = self.inertia;
        let springs = self.springs;
        let cfg = &self.loads;
        let zero_off = self.zero_rest_offset;
        radau::integrate(
            |t, y, dy| {
                let s = PlantState::from_vec(y.try_into().expect("16-dim state"), t);
                let loads = compose_loads(&s, cfg, t);
                let acc = accelerations(&s, t_m, &loads, &inertia, &springs, zero_off);
                dy[0..4].copy_from_slice(&s.phi_dot);
                dy[4..8].copy_from_slice(&s.theta_dot);
                dy[8..16].copy_from_slice(&acc);
            },
            state.t,
            &mut y,
            dt,
            &self.radau,
        )?;
        let next = PlantState::from_vec(&y, state.t + dt);
        if !next.is_finite() {
            return Err(PlantError::Step(RadauError::NonFinite { t: state.t }));
        }
        Ok(next)
    }
}

/// CSV trajectory writer: `t, phi1..4, theta1..4, phi_dot1..4, theta_dot1..4`.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(
            out,
            "t,phi1,phi2,phi3,phi4,theta1,theta2,theta3,theta4,\
             phi_dot1,phi_dot2,phi_dot3,phi_dot4,theta_dot1,theta_dot2,theta_dot3,theta_dot4"
        )?;
        Ok(Self { out })
    }

    pub fn append(&mut self, s: &PlantState) -> std::io::Result<()> {
        write!(self.out, "{:.9}", s.t)?;
        for block in [&s.phi, &s.theta, &s.phi_dot, &s.theta_dot] {
            for v in block.iter() {
                write!(self.out, ",{v:.9e}")?;
            }
        }
        writeln!(self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn default_plant(f_exp: f64) -> Plant {
        let inertia = InertiaParams::default();
        let springs = SpringBank::for_frequency(f_exp, &inertia).unwrap();
        Plant::new(inertia, springs, LoadModelConfig::disabled()).unwrap()
    }

    #[test]
    fn spring_stiffness_examples() {
        assert_eq!(spring_stiffness(0.0, 1e-6).unwrap(), 0.0);
        assert!((spring_stiffness(20.0, 1e-6).unwrap() - 1.57914e-2).abs() < 1e-6);
        assert!((spring_stiffness(60.0, 1e-6).unwrap() - 1.42122e-1).abs() < 1e-5);
        assert!(spring_stiffness(f64::NAN, 1e-6).is_err());
        assert!(spring_stiffness(20.0, 0.0).is_err());
    }

    #[test]
    fn motor_torque_scaling_and_clamp() {
        let (t, n, _) = motor_torques([0.0; 4], 0.2);
        assert_eq!(t, [0.0; 4]);
        assert_eq!(n, 0);
        let (t, n, _) = motor_torques([0.5, -0.5, 1.0, 0.0], 0.2);
        assert!((t[0] - 0.1).abs() < 1e-15);
        assert!((t[1] + 0.1).abs() < 1e-15);
        assert!((t[2] - 0.2).abs() < 1e-15);
        assert_eq!(t[3], 0.0);
        assert_eq!(n, 0);
        let (t, n, a) = motor_torques([2.0, 0.0, 0.0, 0.0], 0.2);
        assert!((t[0] - 0.2).abs() < 1e-15);
        assert_eq!(n, 1);
        assert_eq!(a[0], 1.0);
    }

    #[test]
    fn singular_inertia_rejected() {
        // j_w_yz² >= j_m_zz·j_w_yy + j_w_yy·j_w_zz
        let err = InertiaParams::new(1e-6, 2e-6, 8e-7, 1e-6).unwrap_err();
        assert!(matches!(err, PlantError::SingularInertia(_)));
    }

    #[test]
    fn acceleration_trivial_substitutions() {
        let plant = default_plant(20.0);
        let state = PlantState::default();
        let loads = LoadSet::default();
        let acc = accelerations(
            &state,
            &[0.0; 4],
            &loads,
            &plant.inertia,
            &plant.springs,
            false,
        );
        // wing 1 at rest with nothing applied
        assert_eq!(acc[0], 0.0);
        assert_eq!(acc[4], 0.0);

        // wing 2 at φ = −π: spring and offset terms cancel
        let mut s2 = PlantState::default();
        s2.phi[1] = -PI;
        let acc2 = accelerations(
            &s2,
            &[0.0; 4],
            &loads,
            &plant.inertia,
            &plant.springs,
            false,
        );
        assert!(acc2[1].abs() < 1e-12);
        assert!(acc2[5].abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let plant = default_plant(20.0);
        let mut state = plant.initial_state();
        for _ in 0..10 {
            state = plant.step(&state, &[0.0; 4], 5e-4).unwrap();
        }
        let rest = plant.rest_offsets();
        for i in 0..4 {
            assert!((state.phi[i] - rest[i]).abs() < 1e-10, "phi[{i}]");
            assert!(state.phi_dot[i].abs() < 1e-10, "phi_dot[{i}]");
            assert!(state.theta[i].abs() < 1e-10);
        }
    }

    #[test]
    fn free_oscillation_frequency_matches_analytic() {
        let plant = default_plant(20.0);
        let mut state = plant.initial_state();
        state.phi[0] += 0.1;

        let expected_hz = (plant.inertia.j_w_yy * plant.springs.k_a[0] / plant.inertia.c_det)
            .sqrt()
            / (2.0 * PI);

        // collect zero crossings of the rest-relative angle over 1 s
        let mut crossings = Vec::new();
        let mut prev = state.phi[0];
        let dt = 5e-4;
        for k in 0..2000 {
            state = plant.step(&state, &[0.0; 4], dt).unwrap();
            let cur = state.phi[0];
            if prev > 0.0 && cur <= 0.0 {
                let frac = prev / (prev - cur);
                crossings.push((k as f64 + frac) * dt);
            }
            prev = cur;
        }
        assert!(crossings.len() >= 3, "too few crossings");
        let periods = crossings.len() - 1;
        let measured_hz = periods as f64 / (crossings[periods] - crossings[0]);
        let rel = (measured_hz - expected_hz).abs() / expected_hz;
        assert!(
            rel < 0.01,
            "measured {measured_hz} Hz vs expected {expected_hz} Hz"
        );
    }

    #[test]
    fn undamped_energy_drift_small() {
        let plant = default_plant(20.0);
        let mut state = plant.initial_state();
        state.phi[0] += 0.1;
        state.phi[1] += -0.05;
        let rest = plant.rest_offsets();
        let e0 = mechanical_energy(&state, &plant.inertia, &plant.springs, &rest);
        for _ in 0..2000 {
            state = plant.step(&state, &[0.0; 4], 5e-4).unwrap();
        }
        let e1 = mechanical_energy(&state, &plant.inertia, &plant.springs, &rest);
        let drift = (e1 - e0).abs() / e0;
        assert!(drift < 1e-3, "energy drift {drift}");
    }

    #[test]
    fn step_is_bitwise_deterministic() {
        let plant = default_plant(40.0);
        let mut state = plant.initial_state();
        state.phi[0] += 0.2;
        state.phi_dot[2] = 3.0;
        let a = plant.step(&state, &[0.05, 0.0, -0.02, 0.0], 5e-4).unwrap();
        let b = plant.step(&state, &[0.05, 0.0, -0.02, 0.0], 5e-4).unwrap();
        for i in 0..4 {
            assert_eq!(a.phi[i].to_bits(), b.phi[i].to_bits());
            assert_eq!(a.phi_dot[i].to_bits(), b.phi_dot[i].to_bits());
            assert_eq!(a.theta[i].to_bits(), b.theta[i].to_bits());
            assert_eq!(a.theta_dot[i].to_bits(), b.theta_dot[i].to_bits());
        }
    }

    #[test]
    fn stiff_membrane_defeats_explicit_euler() {
        // Overdamped stiff membrane: the implicit step stays bounded while
        // explicit Euler at the event step blows up.
        let inertia = InertiaParams::default();
        let springs = SpringBank::for_frequency(20.0, &inertia).unwrap();
        let loads = LoadModelConfig {
            aero_drag_coeff: 0.0,
            aero_couple_coeff: 0.0,
            tandem_amp: 0.0,
            tandem_mean: 0.0,
            membrane_stiffness: 2.0,
            membrane_damping: 5e-3,
            membrane_slack: 0.0,
            yaw_enabled: false,
            disabled: false,
            ..LoadModelConfig::default()
        };
        let plant = Plant::new(inertia, springs, loads.clone()).unwrap();
        let mut state = plant.initial_state();
        state.theta[0] = 0.3;

        let mut implicit = state;
        for _ in 0..200 {
            implicit = plant.step(&implicit, &[0.0; 4], 5e-4).unwrap();
        }
        assert!(implicit.theta[0].abs() < 1.0, "implicit path bounded");

        // explicit Euler on the same right-hand side
        let mut y = state;
        let mut diverged = false;
        for k in 0..2000 {
            let t = k as f64 * 5e-4;
            let ls = compose_loads(&y, &loads, t);
            let acc = accelerations(&y, &[0.0; 4], &ls, &inertia, &springs, false);
            for i in 0..4 {
                y.phi[i] += 5e-4 * y.phi_dot[i];
                y.theta[i] += 5e-4 * y.theta_dot[i];
                y.phi_dot[i] += 5e-4 * acc[i];
                y.theta_dot[i] += 5e-4 * acc[i + 4];
            }
            if !y.theta[0].is_finite() || y.theta[0].abs() > 1e6 {
                diverged = true;
                break;
            }
        }
        assert!(diverged, "explicit Euler should diverge on the stiff membrane");
    }

    #[test]
    fn safety_boundary_strict() {
        let exp = [0.0; 4];
        assert_eq!(check_safety(&[0.0; 4], &exp), SafetyVerdict::Ok);
        let mut phi = [0.0; 4];
        phi[2] = 89.0f64.to_radians();
        assert_eq!(check_safety(&phi, &exp), SafetyVerdict::Ok);
        phi[2] = 91.0f64.to_radians();
        assert_eq!(
            check_safety(&phi, &exp),
            SafetyVerdict::Violation { wing: 2 }
        );
        // exactly 90° is safe
        phi[2] = std::f64::consts::FRAC_PI_2;
        assert_eq!(check_safety(&phi, &exp), SafetyVerdict::Ok);
    }
}
