//! The edge-side control step, shared by the in-process loop and the
//! split-mode edge worker.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::classical::{ApidState, MracConfig, MracState, PidGains, PidState};
use crate::concerto::{select_mode, Mode};
use crate::cpg::{CommandGenerator, ConditionSpec};
use crate::edgelink::{hot_swap, EdgePolicy, Stage, StageClock, SwapOutcome, TimingRecord, WeightReceiver};
use crate::plant::{check_safety, motor_torques, SafetyVerdict, WINGS};
use crate::rl_core::{reward, ActionSource, RewardSpec, StateVector, Transition};

use super::state::{StateHistory, COMMAND_WINDOW};
use super::{Algorithm, ClassicalKind, ClassicalKind::*, ExperimentConfig};
use crate::{stream_seed, SEED_CPG, SEED_TICP};

/// Per-wing classical controllers.
pub enum ClassicalBank {
    Pid {
        gains: PidGains,
        states: [PidState; WINGS],
    },
    Apid(Box<[ApidState; WINGS]>),
    Mrac(Box<[MracState; WINGS]>),
}

impl ClassicalBank {
    fn new(kind: ClassicalKind, mrac_cfg: &MracConfig, dt: f64, ref_freq_hz: f64) -> Self {
        match kind {
            Pid => ClassicalBank::Pid {
                gains: PidGains::TABLE_PID,
                states: Default::default(),
            },
            Apid => ClassicalBank::Apid(Box::new([
                ApidState::default(),
                ApidState::default(),
                ApidState::default(),
                ApidState::default(),
            ])),
            Mrac => {
                let cfg = MracConfig {
                    control_period: dt,
                    ref_natural_freq: 2.0 * std::f64::consts::PI * ref_freq_hz,
                    ..mrac_cfg.clone()
                };
                ClassicalBank::Mrac(Box::new([
                    MracState::new(cfg.clone()),
                    MracState::new(cfg.clone()),
                    MracState::new(cfg.clone()),
                    MracState::new(cfg),
                ]))
            }
        }
    }

    /// Torques for all wings; `scale` is the capability perturbation.
    fn step(&mut self, desired: &[f64; 4], measured: &[f64; 4], dt: f64, scale: f64) -> [f64; 4] {
        let mut u = [0.0; 4];
        match self {
            ClassicalBank::Pid { gains, states } => {
                for i in 0..WINGS {
                    u[i] = states[i].step(gains, desired[i] - measured[i], dt) * scale;
                }
            }
            ClassicalBank::Apid(states) => {
                for i in 0..WINGS {
                    u[i] = states[i].step(desired[i] - measured[i], desired[i], dt) * scale;
                }
            }
            ClassicalBank::Mrac(states) => {
                for i in 0..WINGS {
                    u[i] = states[i].step(desired[i], measured[i], dt).0 * scale;
                }
            }
        }
        u
    }
}

struct PrevStep {
    state: StateVector,
    action: [f32; 4],
    source: ActionSource,
}

/// Output of one edge control step.
pub struct EdgeStepResult {
    /// Clamped dimensionless action.
    pub action: [f64; 4],
    /// Motor torques, N·m.
    pub torques: [f64; 4],
    /// Tracking errors (desired − measured) per wing, rad.
    pub errors: [f64; 4],
    /// Instantaneous cost at this step.
    pub reward: f64,
    pub mode: Mode,
    pub source: ActionSource,
    pub safety: SafetyVerdict,
    /// The transition completed by this step (the previous step's record).
    pub completed: Option<Transition>,
    pub timing: TimingRecord,
    pub clamped: u32,
}

/// Edge runtime: command generation, mode-interleaved control, state
/// embedding, weight reception and transition production.
pub struct EdgeRuntime {
    algo: Algorithm,
    control_dt: f64,
    const_motor: f64,
    cpg: CommandGenerator,
    bank: ClassicalBank,
    ticp_enabled: bool,
    ticp_epsilon: f64,
    ticp_rng: ChaCha8Rng,
    ticp_scale: f64,
    segment_period: u64,
    policy: Option<EdgePolicy>,
    pub receiver: WeightReceiver,
    history: StateHistory,
    reward_spec: RewardSpec,
    prev: Option<PrevStep>,
    pub clamp_events: u64,
}

impl EdgeRuntime {
    pub fn new(cfg: &ExperimentConfig, condition: &ConditionSpec, policy: Option<EdgePolicy>) -> Self {
        let dt = cfg.file.control_dt();
        let classical_dt = if cfg.algorithm.is_crl() { 2.0 * dt } else { dt };
        Self {
            algo: cfg.algorithm,
            control_dt: dt,
            const_motor: cfg.file.plant.const_motor,
            cpg: CommandGenerator::new(
                condition,
                ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, SEED_CPG)),
            ),
            bank: ClassicalBank::new(
                cfg.algorithm.classical_kind(),
                &cfg.file.mrac,
                classical_dt,
                condition.frequency,
            ),
            ticp_enabled: cfg.file.ticp.enabled && cfg.algorithm.is_crl(),
            ticp_epsilon: cfg.file.ticp.epsilon,
            ticp_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, SEED_TICP)),
            ticp_scale: 1.0,
            segment_period: cfg.file.composer.segment_events() as u64,
            policy,
            receiver: WeightReceiver::default(),
            history: StateHistory::default(),
            reward_spec: RewardSpec::default(),
            prev: None,
            clamp_events: 0,
        }
    }

    /// Offers received weight bytes. Packets are validated and staged; the
    /// actual load happens at the next Mode-1 step so inference steps never
    /// pay swap latency.
    pub fn offer_weights(&mut self, bytes: &[u8]) -> SwapOutcome {
        match self.policy.as_mut() {
            Some(policy) => hot_swap(policy, &mut self.receiver, bytes, Mode::Mode2),
            None => SwapOutcome::RejectedShape,
        }
    }

    pub fn policy_generation(&self) -> u64 {
        self.policy.as_ref().map_or(0, EdgePolicy::generation)
    }

    /// One control step at index `k`, time `t`, with rest-relative wing
    /// observations `obs`.
    pub fn step(&mut self, k: u64, t: f64, obs: [f64; 4]) -> EdgeStepResult {
        let mut timing = TimingRecord::default();
        let mut clock = StageClock::start();

        // sensor unpacking happens in the transport layer for split mode;
        // here the observation is already a value
        clock.mark(&mut timing, Stage::SensorUnpack);

        // shared section: command window, errors, reward, state embedding
        let window = self.cpg.window_at(t, self.control_dt, COMMAND_WINDOW);
        let desired = window[0];
        let mut errors = [0.0; 4];
        for i in 0..WINGS {
            errors[i] = desired[i] - obs[i];
        }
        let step_reward = reward(&errors, &self.reward_spec);
        let safety = check_safety(&obs, &desired);
        let prev_action = self.prev.as_ref().map(|p| p.action).unwrap_or([0.0; 4]);
        self.history.push(obs, prev_action);
        let state = self.history.build(&window);
        clock.mark(&mut timing, Stage::SharedSection);

        let mode = if self.algo.is_crl() {
            select_mode(k)
        } else {
            Mode::Mode1
        };

        // Mode-1 weight maintenance: load anything staged
        if mode == Mode::Mode1 {
            if let Some(policy) = self.policy.as_mut() {
                self.receiver.apply_staged(policy);
            }
        }
        clock.mark(&mut timing, Stage::WeightMaintenance);

        // TICP: redraw the capability perturbation once per segment
        if self.ticp_enabled && k % self.segment_period == 0 {
            let sign = if self.ticp_rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            self.ticp_scale = 1.0 + sign * self.ticp_epsilon;
        }

        let (raw_action, source) = match mode {
            Mode::Mode1 => {
                let u = self.bank.step(
                    &desired,
                    &obs,
                    if self.algo.is_crl() {
                        2.0 * self.control_dt
                    } else {
                        self.control_dt
                    },
                    self.ticp_scale,
                );
                let mut a = [0.0; 4];
                for i in 0..WINGS {
                    a[i] = u[i] / self.const_motor;
                }
                clock.mark(&mut timing, Stage::ClassicalControl);
                (a, ActionSource::Classical)
            }
            Mode::Mode2 => {
                let policy = self.policy.as_mut().expect("CRL variants carry a policy");
                let out = policy.infer(state.as_slice());
                clock.mark(&mut timing, Stage::NetworkInference);
                (
                    [out[0] as f64, out[1] as f64, out[2] as f64, out[3] as f64],
                    ActionSource::Rl,
                )
            }
        };

        let (torques, clamped, action) = motor_torques(raw_action, self.const_motor);
        self.clamp_events += clamped as u64;

        // complete the previous transition now that (s', a') is known
        let action_f32 = [
            action[0] as f32,
            action[1] as f32,
            action[2] as f32,
            action[3] as f32,
        ];
        let completed = if self.algo.is_crl() {
            self.prev.take().map(|p| Transition {
                state: p.state,
                action: p.action,
                reward: step_reward as f32,
                next_state: state,
                next_action: action_f32,
                source: p.source,
            })
        } else {
            None
        };
        clock.mark(&mut timing, Stage::BufferTransmission);

        self.prev = Some(PrevStep {
            state,
            action: action_f32,
            source,
        });
        clock.mark(&mut timing, Stage::ActionTransmission);

        EdgeStepResult {
            action,
            torques,
            errors,
            reward: step_reward,
            mode,
            source,
            safety,
            completed,
            timing,
            clamped,
        }
    }
}
