//! Cloud-side actor-critic training on the replay stream.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_backward, batch_forward, ReplayBuffer, Transition, TrainerHyper};
use crate::neural::{LionParams, LionState, Network, NetworkGrads};

/// Sarsa critic update on a batch: per-sample TD error, mean semi-gradient,
/// one Lion step at `alpha_critic`. Returns the batch mean squared TD error.
pub fn critic_update(
    critic: &mut Network,
    opt: &mut LionState,
    batch: &[&Transition],
    hyper: &TrainerHyper,
) -> f64 {
    assert!(!batch.is_empty(), "critic_update needs at least one sample");
    let b = batch.len();
    let width = critic.spec.input_len();
    let mut x = Array2::<f32>::zeros((b, width));
    let mut xn = Array2::<f32>::zeros((b, width));
    for (i, t) in batch.iter().enumerate() {
        x.row_mut(i)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&[t.state.as_slice(), &t.action].concat());
        xn.row_mut(i)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&[t.next_state.as_slice(), &t.next_action].concat());
    }
    let trace = batch_forward(critic, x.view());
    let q_next = batch_forward(critic, xn.view());

    let gamma = hyper.gamma as f32;
    let mut out_grad = Array2::<f32>::zeros((b, 1));
    let mut mse = 0.0f64;
    for i in 0..b {
        let q = trace.output()[(i, 0)];
        let qn = q_next.output()[(i, 0)];
        let delta = batch[i].reward + gamma * qn - q;
        mse += (delta as f64) * (delta as f64);
        // d/dq of ½·mean δ² with the bootstrap target frozen
        out_grad[(i, 0)] = -delta / b as f32;
    }
    let (grads, _) = batch_backward(critic, &trace, out_grad);
    if hyper.alpha_critic != 0.0 {
        opt.update(critic, &grads, hyper.alpha_critic);
    }
    mse / b as f64
}

/// Mean gradient of the critic value w.r.t. the actor parameters over a
/// batch of states, obtained by chaining the critic's action-input gradient
/// through the actor.
pub fn actor_gradient(actor: &Network, critic: &Network, states: &[&[f32]]) -> NetworkGrads {
    let b = states.len();
    let s_len = actor.spec.input_len();
    let a_len = actor.spec.output_len();
    let mut s = Array2::<f32>::zeros((b, s_len));
    for (i, st) in states.iter().enumerate() {
        s.row_mut(i).as_slice_mut().unwrap().copy_from_slice(st);
    }
    let actor_trace = batch_forward(actor, s.view());
    let actions = actor_trace.output().clone();

    let mut sa = Array2::<f32>::zeros((b, s_len + a_len));
    for i in 0..b {
        sa.row_mut(i).as_slice_mut().unwrap()[..s_len].copy_from_slice(s.row(i).as_slice().unwrap());
        sa.row_mut(i).as_slice_mut().unwrap()[s_len..]
            .copy_from_slice(actions.row(i).as_slice().unwrap());
    }
    let critic_trace = batch_forward(critic, sa.view());
    let out_grad = Array2::<f32>::from_elem((b, 1), 1.0 / b as f32);
    let (_, input_grads) = batch_backward(critic, &critic_trace, out_grad);
    // slice ∂Q/∂a and push it back through the actor
    let dq_da = input_grads.slice(ndarray::s![.., s_len..]).to_owned();
    let (grads, _) = batch_backward(actor, &actor_trace, dq_da);
    grads
}

/// Descent step of the policy along ∇_θ Q (the reward is a cost). Applies
/// one Lion step at `alpha_actor` and returns the applied parameter delta
/// for segment accumulation.
pub fn actor_update(
    actor: &mut Network,
    critic: &Network,
    opt: &mut LionState,
    batch: &[&Transition],
    hyper: &TrainerHyper,
) -> Vec<f32> {
    assert!(!batch.is_empty(), "actor_update needs at least one sample");
    let states: Vec<&[f32]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let grads = actor_gradient(actor, critic, &states);
    if hyper.alpha_actor == 0.0 {
        return vec![0.0; actor.param_count()];
    }
    let before = actor.flatten();
    opt.update(actor, &grads, hyper.alpha_actor);
    let after = actor.flatten();
    before
        .iter()
        .zip(&after)
        .map(|(b, a)| a - b)
        .collect()
}

/// What one trainer step did.
#[derive(Debug, Clone, Default)]
pub struct TrainerStepReport {
    pub critic_updated: bool,
    pub critic_mse: Option<f64>,
    /// Applied policy delta, present once the policy updated.
    pub actor_delta: Option<Vec<f32>>,
}

/// Owns the actor, critic, optimizer states and the replay buffer.
pub struct Trainer {
    pub actor: Network,
    pub critic: Network,
    pub buffer: ReplayBuffer,
    pub hyper: TrainerHyper,
    actor_opt: LionState,
    critic_opt: LionState,
    rng: ChaCha8Rng,
    observed: u64,
}

impl Trainer {
    pub fn new(actor: Network, critic: Network, hyper: TrainerHyper, seed: u64) -> Self {
        let actor_opt = LionState::new(&actor, LionParams::default());
        let critic_opt = LionState::new(&critic, LionParams::default());
        Self {
            actor,
            critic,
            buffer: ReplayBuffer::default(),
            hyper,
            actor_opt,
            critic_opt,
            rng: ChaCha8Rng::seed_from_u64(seed),
            observed: 0,
        }
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    /// Ingests one executed transition and, after warmup, runs the critic
    /// (on its cadence) and the policy update.
    pub fn observe(&mut self, t: Transition) -> TrainerStepReport {
        self.buffer.insert(t);
        self.observed += 1;
        let mut report = TrainerStepReport::default();
        if self.observed < self.hyper.warmup {
            return report;
        }
        if self.observed % self.hyper.critic_interval.max(1) == 0 {
            let batch = self.buffer.sample(&mut self.rng, self.hyper.critic_batch);
            if !batch.is_empty() {
                // split borrows: sample indices are immutable views into the
                // buffer, so clone the references' targets cheaply via raw
                // pointers is avoided by collecting owned clones here.
                let owned: Vec<Transition> = batch.into_iter().cloned().collect();
                let refs: Vec<&Transition> = owned.iter().collect();
                report.critic_mse = Some(critic_update(
                    &mut self.critic,
                    &mut self.critic_opt,
                    &refs,
                    &self.hyper,
                ));
                report.critic_updated = true;
            }
        }
        let batch = self.buffer.sample(&mut self.rng, self.hyper.policy_batch);
        if !batch.is_empty() {
            let owned: Vec<Transition> = batch.into_iter().cloned().collect();
            let refs: Vec<&Transition> = owned.iter().collect();
            let delta = actor_update(
                &mut self.actor,
                &self.critic,
                &mut self.actor_opt,
                &refs,
                &self.hyper,
            );
            report.actor_delta = Some(delta);
        }
        report
    }

    /// Overwrites the actor parameters (composer decisions).
    pub fn set_actor_params(&mut self, flat: &[f32]) {
        self.actor.load_flat(flat);
    }
}
