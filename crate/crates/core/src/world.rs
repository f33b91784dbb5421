//! Mutable simulation state: bodies plus the link geometry and adjacency
//! kept in sync with them.

use rand::Rng;

use crate::geometry::{random_position, random_unit_vector, step_mobility, AgentBody, WorldConfig};
use crate::hamiltonian::{delta_h_radius, total_hamiltonian, Coefficients, RadiusDelta, RewardScope};
use crate::topology::{build_adjacency, compute_metrics, Adjacency, LinkGeometry, MetricsRecord};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    bodies: Vec<AgentBody>,
    geometry: LinkGeometry,
    adjacency: Adjacency,
}

impl World {
    pub fn new(config: WorldConfig, bodies: Vec<AgentBody>) -> Result<Self> {
        config.validate()?;
        let side = config.side_length;
        for b in &bodies {
            if b.position.len() != config.dimension || b.position.iter().any(|c| !(0.0..=side).contains(c)) {
                return Err(Error::InvalidInput(format!("agent {} lies outside the world", b.id)));
            }
            if !(0.0..=config.r_max()).contains(&b.radius) {
                return Err(Error::RadiusOutOfRange {
                    radius: b.radius,
                    min: 0.0,
                    max: config.r_max(),
                });
            }
        }
        let geometry = LinkGeometry::new(&bodies, &config);
        let adjacency = build_adjacency(&bodies, &geometry);
        Ok(Self {
            config,
            bodies,
            geometry,
            adjacency,
        })
    }

    /// `n` agents placed uniformly at random with a common initial radius.
    /// With a street-constrained obstacle grid, placement avoids blocks.
    pub fn random<R: Rng + ?Sized>(config: WorldConfig, n: usize, initial_radius: f64, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let on_streets = config.mobility.constrain_to_streets;
        let bodies = (0..n)
            .map(|id| {
                let position = random_position(&config, on_streets, rng);
                let drift = random_unit_vector(config.dimension, rng);
                AgentBody::new(id, position, initial_radius, drift)
            })
            .collect();
        Self::new(config, bodies)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn bodies(&self) -> &[AgentBody] {
        &self.bodies
    }

    pub fn body(&self, i: usize) -> &AgentBody {
        &self.bodies[i]
    }

    pub fn geometry(&self) -> &LinkGeometry {
        &self.geometry
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn active_ids(&self) -> &[usize] {
        self.adjacency.index_map()
    }

    pub fn n_active(&self) -> usize {
        self.adjacency.n()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.degree(i)
    }

    pub fn side_length(&self) -> f64 {
        self.config.side_length
    }

    /// Typical radius increment, `sqrt(L^2 / N) / 4` for the active count `N`.
    pub fn radius_step_scale(&self) -> f64 {
        let n = self.n_active().max(1) as f64;
        0.25 * (self.config.side_length.powi(2) / n).sqrt()
    }

    pub fn clamp_radius(&self, r: f64) -> f64 {
        r.clamp(self.config.r_min(), self.config.r_max())
    }

    /// Recompute distances, range factors and links from scratch.
    pub fn refresh(&mut self) {
        self.geometry = LinkGeometry::new(&self.bodies, &self.config);
        self.adjacency = build_adjacency(&self.bodies, &self.geometry);
        debug_assert!(self.adjacency.is_consistent());
    }

    pub fn step_mobility<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.config.mobility.step_length > 0.0 {
            step_mobility(&mut self.bodies, &self.config, rng);
            self.refresh();
        }
    }

    pub fn radius_delta(&self, i: usize, r_new: f64, coeffs: &Coefficients, scope: RewardScope) -> Result<RadiusDelta> {
        if !self.bodies[i].active {
            return Err(Error::InactiveAgent(i));
        }
        delta_h_radius(
            i,
            r_new,
            self.config.r_max(),
            &self.bodies,
            &self.adjacency,
            &self.geometry,
            coeffs,
            scope,
        )
    }

    /// Commit a radius change whose link flips were computed by [`World::radius_delta`].
    pub fn apply_radius(&mut self, i: usize, r_new: f64, delta: &RadiusDelta) {
        self.bodies[i].radius = r_new;
        for flip in &delta.flips {
            self.adjacency.set_link(i, flip.other, flip.on);
        }
    }

    /// Set a radius and update every affected link.
    pub fn set_radius(&mut self, i: usize, r_new: f64) -> Result<()> {
        if !self.bodies[i].active {
            return Err(Error::InactiveAgent(i));
        }
        if !(0.0..=self.config.r_max()).contains(&r_new) {
            return Err(Error::RadiusOutOfRange {
                radius: r_new,
                min: 0.0,
                max: self.config.r_max(),
            });
        }
        self.bodies[i].radius = r_new;
        for idx in 0..self.adjacency.n() {
            let j = self.adjacency.index_map()[idx];
            if j != i {
                let on = self.geometry.linked(i, j, r_new, self.bodies[j].radius);
                self.adjacency.set_link(i, j, on);
            }
        }
        Ok(())
    }

    pub fn deactivate(&mut self, i: usize) {
        self.bodies[i].active = false;
        self.refresh();
    }

    /// Add a new active agent; returns its id.
    pub fn spawn<R: Rng + ?Sized>(&mut self, radius: f64, rng: &mut R) -> usize {
        let id = self.bodies.len();
        let position = random_position(&self.config, self.config.mobility.constrain_to_streets, rng);
        let drift = random_unit_vector(self.config.dimension, rng);
        self.bodies.push(AgentBody::new(id, position, radius, drift));
        self.refresh();
        id
    }

    pub fn total_hamiltonian(&self, coeffs: &Coefficients) -> f64 {
        total_hamiltonian(&self.bodies, &self.adjacency, &self.geometry.distances, coeffs)
    }

    pub fn metrics(&self, step: usize, coeffs: &Coefficients) -> Result<MetricsRecord> {
        compute_metrics(
            step,
            &self.bodies,
            &self.adjacency,
            &self.geometry,
            coeffs,
            self.config.side_length,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn incremental_radius_matches_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut world = World::random(WorldConfig::open(2, 10.0), 30, 1.0, &mut rng).unwrap();
        let coeffs = Coefficients::STATIC;
        for _ in 0..200 {
            let ids = world.active_ids().to_vec();
            let i = ids[rng.random_range(0..ids.len())];
            let r = rng.random_range(0.0..4.0);
            let d = world.radius_delta(i, r, &coeffs, RewardScope::GlobalExact).unwrap();
            world.apply_radius(i, r, &d);
            let rebuilt = build_adjacency(world.bodies(), world.geometry());
            assert_eq!(&rebuilt, world.adjacency());
        }
    }

    #[test]
    fn spawn_and_deactivate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut world = World::random(WorldConfig::open(2, 5.0), 10, 2.0, &mut rng).unwrap();
        world.deactivate(3);
        assert_eq!(world.n_active(), 9);
        assert_eq!(world.degree(3), 0);
        let id = world.spawn(1.0, &mut rng);
        assert_eq!(id, 10);
        assert_eq!(world.n_active(), 10);
        assert!(world.adjacency().is_consistent());
    }

    #[test]
    fn rejects_out_of_world_bodies() {
        let b = vec![AgentBody::new(0, vec![11.0, 1.0], 1.0, vec![1.0, 0.0])];
        assert!(World::new(WorldConfig::open(2, 10.0), b).is_err());
    }

    #[test]
    fn radius_step_scale_follows_mean_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let world = World::random(WorldConfig::open(2, 20.0), 100, 1.0, &mut rng).unwrap();
        assert!((world.radius_step_scale() - 0.5).abs() < 1e-12);
    }
}
