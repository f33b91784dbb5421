//! Per-step radius policies: random growth to a degree target (base),
//! network-driven decisions (smart), and network decisions plus the
//! connection-request protocol (cooperative).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dqn::{finetune_tick, observe, select_action, Brain, LearnerConfig, Transition};
use crate::hamiltonian::{delta_h_request, Coefficients};
use crate::world::World;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Base,
    Smart,
    #[default]
    Cooperative,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Base => "base",
            StrategyKind::Smart => "smart",
            StrategyKind::Cooperative => "cooperative",
        }
    }

    pub fn uses_network(self) -> bool {
        !matches!(self, StrategyKind::Base)
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(StrategyKind::Base),
            "smart" => Ok(StrategyKind::Smart),
            "cooperative" => Ok(StrategyKind::Cooperative),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub base_degree_target: usize,
    pub base_increase_prob: f64,
    /// Share of the neighbours inside its own range an agent expects to be linked to.
    pub request_degree_coefficient: f64,
    pub request_min_degree: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::default(),
            base_degree_target: 5,
            base_increase_prob: 0.5,
            request_degree_coefficient: 0.5,
            request_min_degree: 2,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_increase_prob)
            || self.base_degree_target == 0
            || self.request_min_degree == 0
            || !(self.request_degree_coefficient >= 0.0)
        {
            return Err(Error::InvalidConfig(format!("invalid strategy config {self:?}")));
        }
        Ok(())
    }
}

/// Grow each under-connected agent by a random increment with probability
/// `base_increase_prob`; radii never shrink.
pub fn base_step<R: Rng + ?Sized>(world: &mut World, config: &StrategyConfig, rng: &mut R) -> Result<()> {
    let mut order = world.active_ids().to_vec();
    order.shuffle(rng);
    let scale = world.radius_step_scale();
    for i in order {
        if world.degree(i) >= config.base_degree_target {
            continue;
        }
        if rng.random::<f64>() < config.base_increase_prob {
            let r = world.clamp_radius(world.body(i).radius + scale * rng.random::<f64>());
            world.set_radius(i, r)?;
        }
    }
    Ok(())
}

/// Networks driving the smart decisions: one shared network (pretraining)
/// or one per agent slot (decision phase).
#[derive(Debug, Clone)]
pub enum BrainPool {
    Shared(Brain),
    PerAgent(Vec<Option<Brain>>),
}

impl BrainPool {
    pub fn per_agent(template: &Brain, slots: usize) -> Self {
        BrainPool::PerAgent(vec![Some(template.clone()); slots])
    }

    fn brain(&mut self, i: usize) -> Result<&mut Brain> {
        match self {
            BrainPool::Shared(b) => Ok(b),
            BrainPool::PerAgent(v) => v
                .get_mut(i)
                .and_then(Option::as_mut)
                .ok_or_else(|| Error::InvalidInput(format!("agent {i} has no network"))),
        }
    }

    /// Give agent slot `i` its own copy of `template`.
    pub fn install(&mut self, i: usize, template: Brain) {
        if let BrainPool::PerAgent(v) = self {
            if v.len() <= i {
                v.resize(i + 1, None);
            }
            v[i] = Some(template);
        }
    }

    pub fn remove(&mut self, i: usize) {
        if let BrainPool::PerAgent(v) = self {
            if let Some(slot) = v.get_mut(i) {
                *slot = None;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnMode {
    /// Train on every transition with the pretraining rate.
    Pretrain,
    /// Periodic low-rate fine-tuning.
    Finetune,
    Frozen,
}

#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub transitions: Vec<(usize, Transition)>,
    pub losses: Vec<f64>,
    pub skipped_updates: usize,
}

/// Every active agent, in shuffled order, observes, acts epsilon-greedily on
/// its network, applies a random-magnitude radius change, is rewarded with
/// the exact negative Hamiltonian change, and learns from the transition.
#[allow(clippy::too_many_arguments)]
pub fn smart_step<R: Rng + ?Sized>(
    world: &mut World,
    brains: &mut BrainPool,
    coeffs: &Coefficients,
    learner: &LearnerConfig,
    eps: f64,
    mode: LearnMode,
    t: usize,
    rng: &mut R,
) -> Result<StepOutcome> {
    let mut order = world.active_ids().to_vec();
    order.shuffle(rng);
    let scale = world.radius_step_scale();
    let mut out = StepOutcome::default();

    for i in order {
        let s = observe(world, i)?;
        let brain = brains.brain(i)?;
        let q = brain.q_values(&s)?;
        let a = select_action(&q, eps, rng);
        let r_old = world.body(i).radius;
        let r_new = world.clamp_radius(r_old + a.sign() * scale * rng.random::<f64>());

        let before = learner.verify_rewards.then(|| world.total_hamiltonian(coeffs));
        let delta = world.radius_delta(i, r_new, coeffs, learner.reward_scope)?;
        world.apply_radius(i, r_new, &delta);
        if let Some(before) = before {
            verify_reward(world, coeffs, learner, before, delta.delta_h);
        }

        let transition = Transition {
            s,
            a,
            reward: -delta.delta_h,
            s_next: observe(world, i)?,
        };
        let brain = brains.brain(i)?;
        let update = match mode {
            LearnMode::Pretrain => brain.learn(&transition, learner.gamma, learner.lr_pretrain).map(Some),
            LearnMode::Finetune => finetune_tick(brain, &transition, t, learner).map(|_| None),
            LearnMode::Frozen => Ok(None),
        };
        match update {
            Ok(Some(loss)) => out.losses.push(loss),
            Ok(None) => {}
            Err(Error::NonFinite(_)) => out.skipped_updates += 1,
            Err(e) => return Err(e),
        }
        out.transitions.push((i, transition));
    }
    debug_assert!(world.adjacency().is_consistent());
    Ok(out)
}

fn verify_reward(world: &World, coeffs: &Coefficients, learner: &LearnerConfig, before: f64, delta_h: f64) {
    use crate::hamiltonian::RewardScope;
    if learner.reward_scope != RewardScope::GlobalExact {
        return;
    }
    let after = world.total_hamiltonian(coeffs);
    let diff = (after - before - delta_h).abs();
    assert!(
        diff <= 1e-9 * (1.0 + after.abs().max(before.abs())),
        "incremental reward {delta_h} disagrees with recompute {}",
        after - before
    );
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub requester: usize,
    pub position: Vec<f64>,
    pub radius: f64,
}

/// Agents linked to fewer neighbours than the density around them suggests
/// broadcast their position.
pub fn gather_requests(world: &World, config: &StrategyConfig) -> Vec<Request> {
    let floor = world.config().distance_floor();
    world
        .active_ids()
        .iter()
        .filter_map(|&j| {
            let body = world.body(j);
            let r = body.radius;
            let within = if r <= floor {
                0
            } else {
                let row = world.geometry().distances.row(j);
                world.active_ids().iter().filter(|&&o| o != j && row[o] <= r).count()
            };
            let expected = (config.request_degree_coefficient * within as f64).round() as usize;
            let threshold = expected.max(config.request_min_degree);
            (world.degree(j) < threshold).then(|| Request {
                requester: j,
                position: body.position.clone(),
                radius: r,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub receiver: usize,
    pub requester: usize,
    pub delta_h: f64,
    pub new_radius: f64,
}

/// Receivers inside a requester's range whose own radius is too short grow
/// to reach the requester when that lowers their Hamiltonian. Each receiver
/// accepts at most the single best request; receivers are visited in random
/// order against the current state.
pub fn process_requests<R: Rng + ?Sized>(
    world: &mut World,
    requests: &[Request],
    coeffs: &Coefficients,
    rng: &mut R,
) -> Result<Vec<Acceptance>> {
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let mut receivers = world.active_ids().to_vec();
    receivers.shuffle(rng);
    let r_max = world.config().r_max();
    let mut accepted = Vec::new();

    for i in receivers {
        let mut best: Option<Acceptance> = None;
        for req in requests {
            let j = req.requester;
            if j == i || !world.body(j).active || world.adjacency().linked(i, j) {
                continue;
            }
            let geo = world.geometry();
            let d = geo.distance(i, j);
            let f = geo.factor(i, j);
            let r_i = world.body(i).radius;
            let r_j = world.body(j).radius;
            if f <= 0.0 || d > f * r_j || f * r_i >= d {
                continue;
            }
            let Some(needed) = reach_radius(d, f, r_max) else {
                continue;
            };
            let dh = delta_h_request(world.degree(i), r_i, needed, coeffs)?;
            if dh < 0.0 && best.is_none_or(|b| dh < b.delta_h) {
                best = Some(Acceptance {
                    receiver: i,
                    requester: j,
                    delta_h: dh,
                    new_radius: needed,
                });
            }
        }
        if let Some(acc) = best {
            debug_assert!(acc.delta_h < 0.0);
            world.set_radius(i, acc.new_radius)?;
            debug_assert!(world.adjacency().linked(acc.receiver, acc.requester));
            accepted.push(acc);
        }
    }
    Ok(accepted)
}

/// Smallest representable radius whose attenuated reach covers `d`.
fn reach_radius(d: f64, factor: f64, r_max: f64) -> Option<f64> {
    let mut r = d / factor;
    while factor * r < d {
        r = r.next_up();
    }
    (r <= r_max).then_some(r)
}
