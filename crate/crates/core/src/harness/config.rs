use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dqn::LearnerConfig;
use crate::geometry::{AttenuationMode, MobilityConfig, ObstacleGrid, WorldConfig};
use crate::hamiltonian::Coefficients;
use crate::strategies::{StrategyConfig, StrategyKind};
use crate::topology::LinkRule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Static,
    Moving,
    DensitySweep,
    Churn,
    Obstacles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChurnMode {
    Remove,
    Add,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChurnConfig {
    pub period: usize,
    pub count: usize,
    pub mode: ChurnMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleConfig {
    /// Defaults to the Manhattan tiling for the world size.
    #[serde(default)]
    pub grid: Option<ObstacleGrid>,
    pub t: f64,
    #[serde(default)]
    pub mode: AttenuationMode,
    #[serde(default = "yes")]
    pub constrain_to_streets: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoCoefficients {
    pub rho: f64,
    pub coefficients: Coefficients,
}

/// Everything needed to reproduce one run. Serialized as the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(rename = "N")]
    pub n_agents: usize,
    /// Agents per unit area (volume in 3D); ignored when `side_length` is set.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub side_length: Option<f64>,
    #[serde(default = "two")]
    pub dimension: usize,
    pub coefficients: Coefficients,
    /// Per-density coefficient overrides used by sweeps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coefficients_by_rho: Vec<RhoCoefficients>,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(rename = "T_max")]
    pub t_max: usize,
    #[serde(default)]
    pub churn: Option<ChurnConfig>,
    #[serde(default)]
    pub obstacles: Option<ObstacleConfig>,
    /// Defaults to `0.01 L` steps with 70% drift for non-static scenarios.
    #[serde(default)]
    pub mobility: Option<MobilityConfig>,
    #[serde(default)]
    pub link_rule: LinkRule,
    #[serde(default = "one")]
    pub initial_radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub weights_path: Option<PathBuf>,
    #[serde(default = "hundred")]
    pub snapshot_every: usize,
    #[serde(default = "hundred")]
    pub window: usize,
}

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

fn hundred() -> usize {
    100
}

impl ScenarioConfig {
    /// The operating points of the reference experiments.
    pub fn preset(scenario: ScenarioKind, strategy: StrategyKind) -> Self {
        let (rho, side_length, coefficients) = match scenario {
            ScenarioKind::Static => (Some(0.51), None, Coefficients::STATIC),
            ScenarioKind::Moving => (Some(0.51), None, Coefficients::MOVING),
            ScenarioKind::Churn => (None, Some(45.0), Coefficients::CHURN),
            ScenarioKind::Obstacles => (Some(0.05), None, Coefficients::CHURN),
            ScenarioKind::DensitySweep => (Some(0.05), None, Coefficients::SWEEP),
        };
        let churn = (scenario == ScenarioKind::Churn).then_some(ChurnConfig {
            period: 200,
            count: 10,
            mode: ChurnMode::Remove,
        });
        let obstacles = (scenario == ScenarioKind::Obstacles).then_some(ObstacleConfig {
            grid: None,
            t: 0.5,
            mode: AttenuationMode::default(),
            constrain_to_streets: true,
        });
        Self {
            scenario,
            n_agents: 100,
            rho,
            side_length,
            dimension: 2,
            coefficients,
            coefficients_by_rho: Vec::new(),
            strategy: StrategyConfig {
                kind: strategy,
                ..Default::default()
            },
            learner: LearnerConfig::default(),
            t_max: 1000,
            churn,
            obstacles,
            mobility: None,
            link_rule: LinkRule::default(),
            initial_radius: 1.0,
            seed: 0,
            weights_path: None,
            snapshot_every: 100,
            window: 100,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn side_length(&self) -> f64 {
        match (self.side_length, self.rho) {
            (Some(l), _) => l,
            (None, Some(rho)) => (self.n_agents as f64 / rho).powf(1.0 / self.dimension as f64),
            (None, None) => f64::NAN,
        }
    }

    pub fn density(&self) -> f64 {
        self.n_agents as f64 / self.side_length().powi(self.dimension as i32)
    }

    pub fn is_moving(&self) -> bool {
        self.scenario != ScenarioKind::Static
    }

    pub fn world_config(&self) -> WorldConfig {
        let side = self.side_length();
        let mut mobility = match (self.is_moving(), self.mobility) {
            (false, _) => MobilityConfig::stationary(),
            (true, Some(m)) => m,
            (true, None) => MobilityConfig::for_side_length(side),
        };
        let mut world = WorldConfig::open(self.dimension, side);
        world.link_rule = self.link_rule;
        if let Some(obs) = &self.obstacles {
            world.obstacle_grid = Some(obs.grid.unwrap_or_else(|| ObstacleGrid::manhattan(side)));
            world.transmission_factor = obs.t;
            world.attenuation_mode = obs.mode;
            mobility.constrain_to_streets = obs.constrain_to_streets;
        }
        world.mobility = mobility;
        world
    }

    /// Same scenario at density `rho`, with any per-density coefficients applied.
    pub fn at_density(&self, rho: f64) -> Self {
        let mut c = self.clone();
        c.rho = Some(rho);
        c.side_length = None;
        if let Some(rc) = self.coefficients_by_rho.iter().find(|rc| (rc.rho - rho).abs() < 1e-12) {
            c.coefficients = rc.coefficients;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_agents == 0 {
            return invalid("N must be at least 1".into());
        }
        if self.t_max == 0 {
            return invalid("T_max must be at least 1".into());
        }
        match (self.side_length, self.rho) {
            (Some(l), _) if !(l > 0.0) => return invalid(format!("side length must be positive, got {l}")),
            (None, Some(r)) if !(r > 0.0) => return invalid(format!("rho must be positive, got {r}")),
            (None, None) => return invalid("either rho or side_length is required".into()),
            _ => {}
        }
        if !self.coefficients.is_finite() {
            return invalid("coefficients must be finite".into());
        }
        if let Some(churn) = &self.churn {
            if churn.count > self.n_agents {
                return invalid(format!("churn count {} exceeds N = {}", churn.count, self.n_agents));
            }
        }
        if !(self.initial_radius >= 0.0) {
            return invalid(format!("initial radius must be non-negative, got {}", self.initial_radius));
        }
        self.strategy.validate()?;
        self.learner.validate()?;
        self.world_config().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for s in [
            ScenarioKind::Static,
            ScenarioKind::Moving,
            ScenarioKind::DensitySweep,
            ScenarioKind::Churn,
            ScenarioKind::Obstacles,
        ] {
            ScenarioConfig::preset(s, StrategyKind::Cooperative).validate().unwrap();
        }
    }

    #[test]
    fn side_length_from_density() {
        let c = ScenarioConfig::preset(ScenarioKind::Static, StrategyKind::Base);
        assert!((c.side_length() - (100.0f64 / 0.51).sqrt()).abs() < 1e-12);
        let churn = ScenarioConfig::preset(ScenarioKind::Churn, StrategyKind::Base);
        assert_eq!(churn.side_length(), 45.0);
    }

    #[test]
    fn json_round_trip_and_field_names() {
        let c = ScenarioConfig::preset(ScenarioKind::Churn, StrategyKind::Cooperative);
        let json = serde_json::to_string_pretty(&c).unwrap();
        assert!(json.contains("\"T_max\": 1000"));
        assert!(json.contains("\"N\": 100"));
        let back = ScenarioConfig::from_json(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let c = ScenarioConfig::from_json(
            r#"{"scenario": "static", "N": 50, "rho": 0.5, "coefficients": [-0.5, 0.2, 0.1, -0.5], "T_max": 10}"#,
        )
        .unwrap();
        assert_eq!(c.strategy.base_degree_target, 5);
        assert_eq!(c.learner.gamma, 0.98);
        assert_eq!(c.initial_radius, 1.0);
        assert_eq!(c.window, 100);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = ScenarioConfig::preset(ScenarioKind::Static, StrategyKind::Base);
        c.n_agents = 0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::preset(ScenarioKind::Static, StrategyKind::Base);
        c.rho = Some(-1.0);
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::preset(ScenarioKind::Churn, StrategyKind::Base);
        c.churn.as_mut().unwrap().count = 500;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::preset(ScenarioKind::Static, StrategyKind::Base);
        c.t_max = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn per_density_coefficients() {
        let mut c = ScenarioConfig::preset(ScenarioKind::DensitySweep, StrategyKind::Cooperative);
        c.coefficients_by_rho = vec![RhoCoefficients {
            rho: 0.012,
            coefficients: Coefficients::new(-1.0, 0.5, 2.0, -800.0),
        }];
        assert_eq!(c.at_density(0.012).coefficients.alpha4, -800.0);
        assert_eq!(c.at_density(0.016).coefficients, Coefficients::SWEEP);
    }

    #[test]
    fn obstacle_world_defaults_to_manhattan() {
        let c = ScenarioConfig::preset(ScenarioKind::Obstacles, StrategyKind::Cooperative);
        let w = c.world_config();
        let grid = w.obstacle_grid.unwrap();
        assert!((grid.block_side - 0.15 * c.side_length()).abs() < 1e-12);
        assert!(w.mobility.constrain_to_streets);
        assert_eq!(w.transmission_factor, 0.5);
    }
}
