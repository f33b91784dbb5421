//! The learning agent: what it observes, how it picks actions, the TD target
//! and the two training phases (shared-network pretraining and per-agent
//! fine-tuning).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hamiltonian::{Coefficients, RewardScope};
use crate::neuralnet::{train_step, AdamState, NetParams, OutputActivation};
use crate::strategies::{smart_step, BrainPool, LearnMode, StepOutcome};
use crate::world::World;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub local_density_ratio: f64,
    pub reduced_radius: f64,
    pub degree_fraction: f64,
}

impl Observation {
    pub fn features(&self) -> [f64; 3] {
        [self.local_density_ratio, self.reduced_radius, self.degree_fraction]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Increase,
    Decrease,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Increase => 0,
            Action::Decrease => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Action::Increase => 1.0,
            Action::Decrease => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Observation,
    pub a: Action,
    pub reward: f64,
    pub s_next: Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub finetune_every: usize,
    pub epsilon_floor: f64,
    pub output_activation: OutputActivation,
    pub reward_scope: RewardScope,
    /// Pretraining horizon; the scenario's own `T_max` when unset.
    #[serde(rename = "T_max", skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    /// Recompute the full Hamiltonian around every move and check the reward.
    pub verify_rewards: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            lr_pretrain: 1e-3,
            lr_finetune: 1e-4,
            finetune_every: 10,
            epsilon_floor: 0.01,
            output_activation: OutputActivation::default(),
            reward_scope: RewardScope::default(),
            t_max: None,
            verify_rewards: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r > 0.0 && r <= 1.0;
        if !(0.0..=1.0).contains(&self.gamma)
            || !rate_ok(self.lr_pretrain)
            || !(self.lr_finetune == 0.0 || rate_ok(self.lr_finetune))
            || self.finetune_every == 0
            || !(0.0..=1.0).contains(&self.epsilon_floor)
            || self.t_max == Some(0)
        {
            return Err(Error::InvalidConfig(format!("invalid learner config {self:?}")));
        }
        Ok(())
    }
}

/// Exploration rate: linear decay from 1 to 0 over the first half of the run.
pub fn epsilon(t: usize, t_max: usize) -> f64 {
    (1.0 - t as f64 / (t_max as f64 / 2.0)).max(0.0)
}

/// Local density relative to the global mean, reduced radius and degree fraction.
pub fn observe(world: &World, i: usize) -> Result<Observation> {
    let body = world.body(i);
    if !body.active {
        return Err(Error::InactiveAgent(i));
    }
    let config = world.config();
    let n = world.n_active() as f64;
    let r = body.radius;
    let local_density_ratio = if r <= config.distance_floor() {
        0.0
    } else {
        let distances = world.geometry().distances.row(i);
        let within = world
            .active_ids()
            .iter()
            .filter(|&&j| j != i && distances[j] <= r)
            .count() as f64;
        let global_density = n / config.volume();
        within / (config.ball_volume(r) * global_density)
    };
    Ok(Observation {
        local_density_ratio,
        reduced_radius: r / config.side_length,
        degree_fraction: world.degree(i) as f64 / n,
    })
}

/// Epsilon-greedy choice; ties go to `Increase`.
pub fn select_action<R: Rng + ?Sized>(q: &[f64; 2], eps: f64, rng: &mut R) -> Action {
    if eps > 0.0 && rng.random::<f64>() < eps {
        if rng.random::<bool>() {
            Action::Increase
        } else {
            Action::Decrease
        }
    } else if q[1] > q[0] {
        Action::Decrease
    } else {
        Action::Increase
    }
}

pub fn td_target(reward: f64, gamma: f64, q_next: &[f64; 2]) -> f64 {
    reward + gamma * q_next[0].max(q_next[1])
}

/// A value network together with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Brain {
    pub params: NetParams,
    pub adam: AdamState,
}

impl Brain {
    pub fn new(params: NetParams) -> Self {
        let adam = AdamState::new(&params);
        Self { params, adam }
    }

    pub fn q_values(&self, s: &Observation) -> Result<[f64; 2]> {
        self.params.forward(&s.features())
    }

    /// One TD regression step on `transition`; returns the loss.
    pub fn learn(&mut self, transition: &Transition, gamma: f64, lr: f64) -> Result<f64> {
        let q_next = self.q_values(&transition.s_next)?;
        let target = td_target(transition.reward, gamma, &q_next);
        train_step(
            &mut self.params,
            &mut self.adam,
            &transition.s.features(),
            transition.a.index(),
            target,
            lr,
        )
    }
}

/// Fine-tune on the latest transition every `finetune_every` steps.
/// Returns whether an update ran.
pub fn finetune_tick(brain: &mut Brain, transition: &Transition, t: usize, config: &LearnerConfig) -> Result<bool> {
    if !t.is_multiple_of(config.finetune_every) || config.lr_finetune == 0.0 {
        return Ok(false);
    }
    brain.learn(transition, config.gamma, config.lr_finetune)?;
    Ok(true)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PretrainStats {
    pub steps: usize,
    pub transitions: usize,
    pub mean_loss: f64,
    pub skipped_updates: usize,
}

/// Shared-network online DQN training: every agent acts each step with the
/// scheduled epsilon and every transition updates the one network.
pub fn pretrain<R: Rng + ?Sized>(
    world: &mut World,
    initial: NetParams,
    coeffs: &Coefficients,
    learner: &LearnerConfig,
    steps: usize,
    rng: &mut R,
) -> Result<(NetParams, PretrainStats)> {
    learner.validate()?;
    let mut pool = BrainPool::Shared(Brain::new(initial));
    let mut stats = PretrainStats {
        steps,
        ..Default::default()
    };
    let mut loss_sum = 0.0;
    for t in 0..steps {
        let eps = epsilon(t, steps);
        let StepOutcome {
            transitions,
            losses,
            skipped_updates,
        } = smart_step(world, &mut pool, coeffs, learner, eps, LearnMode::Pretrain, t, rng)?;
        stats.transitions += transitions.len();
        stats.skipped_updates += skipped_updates;
        loss_sum += losses.iter().sum::<f64>();
        if world.config().mobility.step_length > 0.0 {
            world.step_mobility(rng);
        }
    }
    if stats.transitions > 0 {
        stats.mean_loss = loss_sum / stats.transitions as f64;
    }
    let BrainPool::Shared(brain) = pool else {
        unreachable!("pretraining always uses a shared brain")
    };
    Ok((brain.params, stats))
}
