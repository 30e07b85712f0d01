//! The cloud-side training runtime: replay ingestion, actor-critic updates,
//! segment statistics, composer decisions and weight shipping.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::Serialize;

use crate::concerto::{
    compose, convergence_diagnostics, ComposerBranch, ComposerConfig, ConvergenceReport,
    DdpRecord, GdsAccumulator, GdsRecord,
};
use crate::edgelink::WeightPacket;
use crate::neural::Network;
use crate::rl_core::{estimate_qbar, ActionSource, Trainer, TrainerHyper, Transition};
use crate::{stream_seed, SEED_COMPOSER};

/// One composer decision as logged (JSON lines).
#[derive(Debug, Clone, Serialize)]
pub struct ComposerLogLine {
    pub g: u64,
    pub j: usize,
    pub branch: &'static str,
    pub qbar: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub noise_seed: u64,
}

/// Cloud runtime state.
pub struct CloudRuntime {
    pub trainer: Trainer,
    composer_cfg: ComposerConfig,
    accumulator: GdsAccumulator,
    q_series: Vec<f64>,
    reward_window: Vec<f64>,
    ddp: DdpRecord,
    prev_record: Option<GdsRecord>,
    j: usize,
    theta_segment_start: Vec<f32>,
    seed_rng: ChaCha8Rng,
    sequence: u32,
    explore_epoch: bool,
    phase_qbars: Vec<f64>,
    ddp_qbars: Vec<f64>,
    pub log: Vec<ComposerLogLine>,
    pub branch_counts: std::collections::BTreeMap<String, u64>,
    ship_every_segments: u64,
    segments_closed: u64,
}

impl CloudRuntime {
    pub fn new(
        actor: Network,
        critic: Network,
        hyper: TrainerHyper,
        composer_cfg: ComposerConfig,
        master_seed: u64,
        trainer_seed: u64,
        ship_every_segments: u64,
    ) -> Self {
        let params = actor.param_count();
        let theta0 = actor.flatten();
        let trainer = Trainer::new(actor, critic, hyper, trainer_seed);
        let segment_events = composer_cfg.segment_events();
        Self {
            trainer,
            composer_cfg,
            accumulator: GdsAccumulator::new(params, segment_events),
            q_series: Vec::with_capacity(segment_events),
            reward_window: Vec::with_capacity(segment_events),
            ddp: DdpRecord::initial(theta0.clone(), f64::INFINITY),
            prev_record: None,
            j: 0,
            theta_segment_start: theta0,
            seed_rng: ChaCha8Rng::seed_from_u64(stream_seed(master_seed, SEED_COMPOSER)),
            sequence: 0,
            explore_epoch: false,
            phase_qbars: Vec::new(),
            ddp_qbars: Vec::new(),
            log: Vec::new(),
            branch_counts: Default::default(),
            ship_every_segments: ship_every_segments.max(1),
            segments_closed: 0,
        }
    }

    /// Ingests one executed transition; returns encoded weights when a
    /// segment boundary composed new ones to ship.
    pub fn ingest(&mut self, mut t: Transition) -> Option<Vec<u8>> {
        // exploration bookkeeping: learned-policy actions taken while the
        // policy carries a composer perturbation count as composer-sourced
        if t.source == ActionSource::Rl && self.explore_epoch {
            t.source = ActionSource::Composer;
        }
        let step_reward = t.reward as f64;
        let report = self.trainer.observe(t);
        let delta = report.actor_delta?;
        let gamma_bar = self.trainer.hyper.gamma;
        self.q_series.push(step_reward / (1.0 - gamma_bar));
        self.reward_window.push(step_reward);
        let segment_delta = self.accumulator.push(&delta)?;
        Some(self.close_segment(segment_delta))
    }

    fn close_segment(&mut self, segment_delta: Vec<f32>) -> Vec<u8> {
        let gamma_bar = self.trainer.hyper.gamma;
        let (a, b, c) = crate::concerto::fit_gds(&self.q_series).expect("segment has >= 2 points");
        let qbar = estimate_qbar(&self.reward_window, gamma_bar);
        let cur = GdsRecord {
            j: self.j,
            a,
            b,
            c,
            delta_theta: segment_delta.clone(),
            qbar,
        };
        self.phase_qbars.push(qbar);

        let noise_seed = self.seed_rng.gen::<u64>();
        let mut decision_rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let outcome = compose(
            &self.theta_segment_start,
            &segment_delta,
            self.prev_record.as_ref(),
            &cur,
            &self.ddp,
            self.j,
            &self.composer_cfg,
            &mut decision_rng,
        );

        self.log.push(ComposerLogLine {
            g: self.ddp.g,
            j: self.j,
            branch: outcome.branch.as_str(),
            qbar,
            a,
            b,
            c,
            noise_seed,
        });
        *self
            .branch_counts
            .entry(outcome.branch.as_str().to_string())
            .or_insert(0) += 1;

        let phase_closed = matches!(
            outcome.branch,
            ComposerBranch::AcceptNewBest | ComposerBranch::ResetToAnchor
        );
        if phase_closed {
            let mean = self.phase_qbars.iter().sum::<f64>() / self.phase_qbars.len() as f64;
            self.ddp_qbars.push(mean);
            self.phase_qbars.clear();
            self.accumulator.reset_phase();
        }
        self.explore_epoch = matches!(
            outcome.branch,
            ComposerBranch::ResetToAnchor
                | ComposerBranch::PartialWithNoise
                | ComposerBranch::NoiseOnly
                | ComposerBranch::ExploreAnchor
        );

        self.trainer.set_actor_params(&outcome.theta_next);
        self.theta_segment_start = outcome.theta_next;
        self.ddp = outcome.ddp;
        self.j = outcome.j_next;
        self.prev_record = Some(cur);
        self.q_series.clear();
        self.reward_window.clear();
        self.segments_closed += 1;

        if self.segments_closed % self.ship_every_segments == 0 {
            self.sequence += 1;
            WeightPacket::from_network(&self.trainer.actor, self.sequence).encode()
        } else {
            Vec::new()
        }
    }

    /// Per-phase value estimates accumulated so far.
    pub fn ddp_qbars(&self) -> &[f64] {
        &self.ddp_qbars
    }

    pub fn diagnostics(&self) -> Option<ConvergenceReport> {
        convergence_diagnostics(&self.ddp_qbars)
    }

    pub fn composer_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|l| serde_json::to_string(l).expect("log line serialises"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_xavier, NetworkSpec};
    use crate::rl_core::StateVector;

    fn runtime(segment_steps: usize) -> CloudRuntime {
        let actor = init_xavier(
            &NetworkSpec::new(
                vec![80, 8, 4],
                crate::neural::Activation::Tanh,
                crate::neural::Activation::Tanh,
            )
            .unwrap(),
            1,
        );
        let critic = init_xavier(&NetworkSpec::critic_with_width(8), 2);
        let composer = ComposerConfig {
            segment_steps,
            ..Default::default()
        };
        CloudRuntime::new(actor, critic, TrainerHyper::default(), composer, 3, 4, 1)
    }

    fn transition(reward: f32, source: ActionSource) -> Transition {
        Transition {
            state: StateVector::default(),
            action: [0.1; 4],
            reward,
            next_state: StateVector::default(),
            next_action: [0.1; 4],
            source,
        }
    }

    #[test]
    fn segment_closes_after_inclusive_event_count() {
        let mut cloud = runtime(5); // 6 update events per segment
        let warmup = cloud.trainer.hyper.warmup;
        let mut shipped = 0;
        let mut steps = 0u64;
        for _ in 0..60 {
            steps += 1;
            if cloud
                .ingest(transition(0.3, ActionSource::Rl))
                .is_some_and(|b| !b.is_empty())
            {
                shipped += 1;
            }
        }
        // update events start after warmup; 6 events per segment
        let events = steps - warmup + 1;
        assert_eq!(shipped as u64, events / 6);
        assert_eq!(cloud.log.len() as u64, events / 6);
    }

    #[test]
    fn composer_log_lines_serialise() {
        let mut cloud = runtime(2);
        for _ in 0..30 {
            cloud.ingest(transition(0.2, ActionSource::Rl));
        }
        assert!(!cloud.log.is_empty());
        let jsonl = cloud.composer_jsonl();
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        for key in ["g", "j", "branch", "qbar", "a", "b", "c", "noise_seed"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn improving_rewards_open_new_phases() {
        let mut cloud = runtime(3);
        let mut reward = 0.9f32;
        for k in 0..400 {
            cloud.ingest(transition(reward, ActionSource::Rl));
            if k % 4 == 3 {
                reward *= 0.97; // improving cost
            }
        }
        assert!(
            cloud.ddp_qbars().len() >= 2,
            "phases should close under improvement"
        );
        let accepts = cloud.branch_counts.get("accept_new_best").copied().unwrap_or(0);
        assert!(accepts >= 1);
        // diagnostics become available with ≥2 phases
        assert!(cloud.diagnostics().is_some());
    }
}
