//! Scenario orchestration: placement, the per-step loop, churn events,
//! seeded ensembles, density sweeps and summaries.

mod config;
mod output;

pub use config::{ChurnConfig, ChurnMode, ObstacleConfig, RhoCoefficients, ScenarioConfig, ScenarioKind};
pub use output::{write_ensemble, write_run, write_summary_json, write_sweep, SummaryDocument};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dqn::{pretrain, Brain, PretrainStats};
use crate::neuralnet::NetParams;
use crate::strategies::{base_step, gather_requests, process_requests, smart_step, BrainPool, LearnMode, StrategyKind};
use crate::topology::MetricsRecord;
use crate::world::World;
use crate::{Error, Result};

/// Per-run seed stream for network initialisation, kept apart from the world stream.
const NET_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub id: usize,
    pub position: Vec<f64>,
    pub radius: f64,
    pub degree: usize,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub id_a: usize,
    pub id_b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub agents: Vec<AgentRow>,
    pub edges: Vec<EdgeRow>,
}

impl Snapshot {
    fn capture(step: usize, world: &World) -> Self {
        let adj = world.adjacency();
        let agents = world
            .bodies()
            .iter()
            .map(|b| AgentRow {
                id: b.id,
                position: b.position.clone(),
                radius: b.radius,
                degree: adj.degree(b.id),
                active: b.active,
            })
            .collect();
        let edges = adj
            .edges()
            .map(|(a, b)| EdgeRow {
                id_a: a,
                id_b: b,
                distance: world.geometry().distance(a, b),
            })
            .collect();
        Self { step, agents, edges }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChurnKind {
    Remove,
    Add,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnRecord {
    pub step: usize,
    pub kind: ChurnKind,
    pub agents: Vec<usize>,
    pub active_after: usize,
}

/// Window means of the metric bundle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub connectivity_pct: f64,
    #[serde(rename = "total_H")]
    pub total_h: f64,
    pub energy: f64,
    pub mean_reduced_radius: f64,
    pub mean_radius: f64,
    pub mean_degree: f64,
}

impl MetricMeans {
    fn from_records(records: &[MetricsRecord], side_length: f64) -> Self {
        let n = records.len().max(1) as f64;
        let mut m = Self::default();
        for r in records {
            m.connectivity_pct += r.connectivity_pct;
            m.total_h += r.total_h;
            m.energy += r.energy;
            m.mean_reduced_radius += r.mean_reduced_radius;
            m.mean_degree += r.mean_degree;
        }
        m.connectivity_pct /= n;
        m.total_h /= n;
        m.energy /= n;
        m.mean_reduced_radius /= n;
        m.mean_degree /= n;
        m.mean_radius = m.mean_reduced_radius * side_length;
        m
    }

    fn fields(&self) -> [f64; 6] {
        [
            self.connectivity_pct,
            self.total_h,
            self.energy,
            self.mean_reduced_radius,
            self.mean_radius,
            self.mean_degree,
        ]
    }

    fn from_fields(f: [f64; 6]) -> Self {
        Self {
            connectivity_pct: f[0],
            total_h: f[1],
            energy: f[2],
            mean_reduced_radius: f[3],
            mean_radius: f[4],
            mean_degree: f[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub seed: u64,
    pub strategy: StrategyKind,
    pub side_length: f64,
    pub series: Vec<MetricsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub churn_events: Vec<ChurnRecord>,
    pub window_means: MetricMeans,
    /// Standard deviation of the per-step connectivity over the window.
    pub window_connectivity_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: StrategyKind,
    pub ensemble_size: usize,
    pub window: usize,
    pub side_length: f64,
    pub mean: MetricMeans,
    pub std: MetricMeans,
    /// Ensemble mean of each run's per-step connectivity standard deviation.
    pub connectivity_step_std: f64,
}

impl RunSummary {
    pub fn from_runs(runs: &[RunOutput], window: usize) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidConfig("ensemble needs at least one run".into()))?;
        let n = runs.len() as f64;
        let mut mean = [0.0; 6];
        for r in runs {
            for (m, v) in mean.iter_mut().zip(r.window_means.fields()) {
                *m += v / n;
            }
        }
        let mut var = [0.0; 6];
        if runs.len() > 1 {
            for r in runs {
                for ((s, v), m) in var.iter_mut().zip(r.window_means.fields()).zip(mean) {
                    *s += (v - m).powi(2) / (n - 1.0);
                }
            }
        }
        Ok(Self {
            strategy: first.strategy,
            ensemble_size: runs.len(),
            window,
            side_length: first.side_length,
            mean: MetricMeans::from_fields(mean),
            std: MetricMeans::from_fields(var.map(f64::sqrt)),
            connectivity_step_std: runs.iter().map(|r| r.window_connectivity_std).sum::<f64>() / n,
        })
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Load the weights a network strategy needs, or `None` for the base strategy.
pub fn load_weights(config: &ScenarioConfig) -> Result<Option<NetParams>> {
    if !config.strategy.kind.uses_network() {
        return Ok(None);
    }
    let path = config
        .weights_path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("smart strategies need a weights file".into()))?;
    NetParams::load(path).map(Some)
}

/// Train the shared network on a fresh world built from `config`.
pub fn pretrain_scenario(config: &ScenarioConfig) -> Result<(NetParams, PretrainStats)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net_rng = ChaCha8Rng::seed_from_u64(config.seed ^ NET_SEED_SALT);
    let initial = NetParams::init(&mut net_rng, config.learner.output_activation);
    let mut world = World::random(config.world_config(), config.n_agents, config.initial_radius, &mut rng)?;
    pretrain(
        &mut world,
        initial,
        &config.coefficients,
        &config.learner,
        config.learner.t_max.unwrap_or(config.t_max),
        &mut rng,
    )
}

/// Run one decision-phase simulation with `config.seed`.
pub fn run_scenario(config: &ScenarioConfig, weights: Option<&NetParams>) -> Result<RunOutput> {
    config.validate()?;
    let kind = config.strategy.kind;
    let template = match (kind.uses_network(), weights) {
        (true, Some(w)) => Some(Brain::new(w.clone())),
        (true, None) => {
            return Err(Error::MissingWeights(
                config.weights_path.clone().unwrap_or_else(|| "<unset>".into()),
            ))
        }
        (false, _) => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut world = World::random(config.world_config(), config.n_agents, config.initial_radius, &mut rng)?;
    let mut brains = template
        .as_ref()
        .map(|t| BrainPool::per_agent(t, world.bodies().len()));

    let mut series = Vec::with_capacity(config.t_max);
    let mut snapshots = Vec::new();
    let mut churn_events = Vec::new();

    for t in 1..=config.t_max {
        if let Some(churn) = &config.churn {
            if churn.period > 0 && t % churn.period == 0 {
                let record = churn_event(&mut world, churn, t, &mut brains, template.as_ref(), config.initial_radius, &mut rng);
                churn_events.push(record);
            }
        }
        world.step_mobility(&mut rng);

        match kind {
            StrategyKind::Base => base_step(&mut world, &config.strategy, &mut rng)?,
            StrategyKind::Smart | StrategyKind::Cooperative => {
                let pool = brains.as_mut().expect("network strategies carry brains");
                smart_step(
                    &mut world,
                    pool,
                    &config.coefficients,
                    &config.learner,
                    config.learner.epsilon_floor,
                    LearnMode::Finetune,
                    t,
                    &mut rng,
                )?;
                if kind == StrategyKind::Cooperative {
                    let requests = gather_requests(&world, &config.strategy);
                    process_requests(&mut world, &requests, &config.coefficients, &mut rng)?;
                }
            }
        }
        debug_assert!(world.adjacency().is_consistent());

        series.push(world.metrics(t, &config.coefficients)?);
        if config.snapshot_every > 0 && t % config.snapshot_every == 0 {
            snapshots.push(Snapshot::capture(t, &world));
        }
    }

    let window = &series[series.len().saturating_sub(config.window)..];
    Ok(RunOutput {
        seed: config.seed,
        strategy: kind,
        side_length: world.side_length(),
        window_means: MetricMeans::from_records(window, world.side_length()),
        window_connectivity_std: std_dev(window.iter().map(|r| r.connectivity_pct)),
        series,
        snapshots,
        churn_events,
    })
}

/// Remove or add agents. Removal never empties the world; added agents get
/// the initial radius, a fresh drift direction and a fresh copy of the stored
/// weights.
pub fn churn_event<R: Rng + ?Sized>(
    world: &mut World,
    churn: &ChurnConfig,
    step: usize,
    brains: &mut Option<BrainPool>,
    template: Option<&Brain>,
    initial_radius: f64,
    rng: &mut R,
) -> ChurnRecord {
    let kind = match churn.mode {
        ChurnMode::Remove => ChurnKind::Remove,
        ChurnMode::Add => ChurnKind::Add,
        ChurnMode::Mixed => {
            if rng.random::<bool>() {
                ChurnKind::Remove
            } else {
                ChurnKind::Add
            }
        }
    };
    let mut agents = Vec::new();
    match kind {
        ChurnKind::Remove => {
            let active = world.active_ids().to_vec();
            let count = churn.count.min(active.len().saturating_sub(1));
            for k in sample(rng, active.len(), count).into_iter() {
                agents.push(active[k]);
            }
            agents.sort_unstable();
            for &i in &agents {
                world.deactivate(i);
                if let Some(pool) = brains.as_mut() {
                    pool.remove(i);
                }
            }
        }
        ChurnKind::Add => {
            for _ in 0..churn.count {
                let id = world.spawn(initial_radius, rng);
                if let (Some(pool), Some(t)) = (brains.as_mut(), template) {
                    pool.install(id, t.clone());
                }
                agents.push(id);
            }
        }
    }
    ChurnRecord {
        step,
        kind,
        agents,
        active_after: world.n_active(),
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub runs: Vec<RunOutput>,
    pub summary: RunSummary,
}

/// Independent runs with seeds `seed, seed + 1, ...`, summarized over the final window.
pub fn ensemble(config: &ScenarioConfig, weights: Option<&NetParams>, n_runs: usize) -> Result<Ensemble> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("ensemble needs at least one run".into()));
    }
    config.validate()?;
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(k);
            run_scenario(&c, weights)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = RunSummary::from_runs(&runs, config.window)?;
    Ok(Ensemble { runs, summary })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub rho: f64,
    pub ensemble: Ensemble,
}

/// One ensemble per density with `L = (N / rho)^(1/D)`.
/// Ensembles at each density. Network strategies without `weights` pretrain
/// separately at every density with that density's coefficients.
pub fn density_sweep(
    config: &ScenarioConfig,
    rhos: &[f64],
    weights: Option<&NetParams>,
    n_runs: usize,
) -> Result<Vec<SweepPoint>> {
    rhos.iter()
        .map(|&rho| {
            if !(0.01..=1.0).contains(&rho) {
                return Err(Error::InvalidConfig(format!("density {rho} outside [0.01, 1]")));
            }
            let c = config.at_density(rho);
            // The observation is scale-free at fixed N, so one network behaves
            // identically at every density; without shared weights each density
            // pretrains its own.
            let local = match weights {
                None if c.strategy.kind.uses_network() => Some(pretrain_scenario(&c)?.0),
                _ => None,
            };
            Ok(SweepPoint {
                rho,
                ensemble: ensemble(&c, weights.or(local.as_ref()), n_runs)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Coefficients;

    fn base_config() -> ScenarioConfig {
        ScenarioConfig {
            t_max: 30,
            n_agents: 30,
            ..ScenarioConfig::preset(ScenarioKind::Static, StrategyKind::Base)
        }
    }

    #[test]
    fn one_step_one_record() {
        let c = ScenarioConfig {
            t_max: 1,
            ..base_config()
        };
        let out = run_scenario(&c, None).unwrap();
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series[0].step, 1);
    }

    #[test]
    fn network_strategy_requires_weights() {
        let c = ScenarioConfig {
            strategy: crate::strategies::StrategyConfig {
                kind: StrategyKind::Smart,
                ..Default::default()
            },
            ..base_config()
        };
        assert!(matches!(run_scenario(&c, None), Err(Error::MissingWeights(_))));
    }

    fn churn_world(n: usize) -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = ScenarioConfig::preset(ScenarioKind::Churn, StrategyKind::Cooperative);
        World::random(c.world_config(), n, 3.0, &mut rng).unwrap()
    }

    #[test]
    fn churn_zero_count_is_noop() {
        let mut w = churn_world(20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let churn = ChurnConfig {
            period: 10,
            count: 0,
            mode: ChurnMode::Remove,
        };
        let rec = churn_event(&mut w, &churn, 10, &mut None, None, 1.0, &mut rng);
        assert!(rec.agents.is_empty());
        assert_eq!(w.n_active(), 20);
    }

    #[test]
    fn churn_remove_and_add() {
        let mut w = churn_world(100);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let template = Brain::new(NetParams::init(&mut rng, Default::default()));
        let mut pool = Some(BrainPool::per_agent(&template, 100));
        let remove = ChurnConfig {
            period: 200,
            count: 10,
            mode: ChurnMode::Remove,
        };
        let rec = churn_event(&mut w, &remove, 200, &mut pool, Some(&template), 1.0, &mut rng);
        assert_eq!(rec.active_after, 90);
        for &i in &rec.agents {
            assert_eq!(w.degree(i), 0);
            assert!(!w.body(i).active);
        }
        assert!(w.adjacency().edges().all(|(a, b)| !rec.agents.contains(&a) && !rec.agents.contains(&b)));

        let add = ChurnConfig {
            mode: ChurnMode::Add,
            ..remove
        };
        let rec = churn_event(&mut w, &add, 400, &mut pool, Some(&template), 1.0, &mut rng);
        assert_eq!(rec.active_after, 100);
        let Some(BrainPool::PerAgent(brains)) = &pool else { panic!() };
        for &i in &rec.agents {
            assert_eq!(w.body(i).radius, 1.0);
            assert_eq!(brains[i].as_ref().unwrap(), &template);
        }
    }

    #[test]
    fn churn_remove_keeps_one_agent() {
        let mut w = churn_world(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let churn = ChurnConfig {
            period: 1,
            count: 10,
            mode: ChurnMode::Remove,
        };
        churn_event(&mut w, &churn, 1, &mut None, None, 1.0, &mut rng);
        assert_eq!(w.n_active(), 1);
    }

    #[test]
    fn ensemble_of_one_is_that_run() {
        let c = base_config();
        let e = ensemble(&c, None, 1).unwrap();
        let single = run_scenario(&c, None).unwrap();
        assert_eq!(e.summary.mean, single.window_means);
        assert_eq!(e.summary.ensemble_size, 1);
    }

    #[test]
    fn ensemble_seeds_are_prefix_stable() {
        let c = base_config();
        let small = ensemble(&c, None, 2).unwrap();
        let large = ensemble(&c, None, 4).unwrap();
        assert_eq!(small.runs[..], large.runs[..2]);
    }

    #[test]
    fn sweep_rejects_out_of_range_density() {
        assert!(density_sweep(&base_config(), &[2.0], None, 1).is_err());
    }

    #[test]
    fn single_density_sweep_matches_ensemble() {
        let c = base_config();
        let sweep = density_sweep(&c, &[0.3], None, 2).unwrap();
        let direct = ensemble(&c.at_density(0.3), None, 2).unwrap();
        assert_eq!(sweep[0].ensemble.summary, direct.summary);
        assert!((sweep[0].ensemble.summary.side_length - (30.0f64 / 0.3).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sweep_pretrains_per_density_without_weights() {
        let c = ScenarioConfig {
            strategy: crate::strategies::StrategyConfig {
                kind: StrategyKind::Smart,
                ..Default::default()
            },
            coefficients: Coefficients::CHURN,
            ..base_config()
        };
        let sweep = density_sweep(&c, &[0.3], None, 1).unwrap();
        let at = c.at_density(0.3);
        let (w, _) = pretrain_scenario(&at).unwrap();
        let direct = ensemble(&at, Some(&w), 1).unwrap();
        assert_eq!(sweep[0].ensemble.summary, direct.summary);
    }

    #[test]
    fn window_means_cover_final_steps() {
        let c = ScenarioConfig {
            window: 5,
            coefficients: Coefficients::STATIC,
            ..base_config()
        };
        let out = run_scenario(&c, None).unwrap();
        let tail = &out.series[25..];
        let mean_conn = tail.iter().map(|r| r.connectivity_pct).sum::<f64>() / 5.0;
        assert!((out.window_means.connectivity_pct - mean_conn).abs() < 1e-9);
    }
}
