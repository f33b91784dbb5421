//! Euclidean world: positions, distances, drifting mobility with mirror
//! boundaries, the Manhattan obstacle grid and line-of-sight attenuation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::topology::LinkRule;
use crate::{Error, Result};

/// Relative distance floor; pairwise distances never drop below `DIST_FLOOR_FRACTION * L`.
pub const DIST_FLOOR_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AttenuationMode {
    /// A blocked segment is attenuated by `t` no matter how many walls it crosses.
    #[default]
    OncePerBlockedSegment,
    /// Every crossed block multiplies the range by `t`.
    PerObstacleMultiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleGrid {
    pub block_side: f64,
    pub street_width: f64,
    #[serde(default)]
    pub origin_offset: f64,
}

impl ObstacleGrid {
    /// Regular tiling with blocks of `0.15 L` separated by streets of `0.05 L`.
    pub fn manhattan(side_length: f64) -> Self {
        Self {
            block_side: 0.15 * side_length,
            street_width: 0.05 * side_length,
            origin_offset: 0.0,
        }
    }

    pub fn period(&self) -> f64 {
        self.block_side + self.street_width
    }

    fn validate(&self) -> Result<()> {
        if !(self.block_side > 0.0 && self.street_width > 0.0 && self.origin_offset.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "obstacle grid needs positive block_side and street_width, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Whether coordinate `c` falls strictly inside a block band along one axis.
    fn in_block_band(&self, c: f64) -> bool {
        let local = (c - self.origin_offset).rem_euclid(self.period());
        local > self.street_width && local < self.period()
    }

    /// Whether the point lies strictly inside a block. Blocks are extruded
    /// along any third axis, so only the first two coordinates matter.
    pub fn is_inside_block(&self, p: &[f64]) -> bool {
        self.in_block_band(p[0]) && self.in_block_band(p[1])
    }

    /// Axes (0 = x, 1 = y) whose street band contains the point. A point on a
    /// horizontal street (y in a street band) can travel along x, and vice versa.
    fn street_axes(&self, p: &[f64]) -> (bool, bool) {
        (!self.in_block_band(p[1]), !self.in_block_band(p[0]))
    }

    /// Block index range along one axis overlapping `[lo, hi]`.
    fn block_indices(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
        let p = self.period();
        let first = ((lo - self.origin_offset - p) / p).floor() as i64;
        let last = ((hi - self.origin_offset) / p).ceil() as i64;
        first..=last
    }

    /// Interior interval of block `k` along one axis.
    fn block_span(&self, k: i64) -> (f64, f64) {
        let p = self.period();
        let lo = self.origin_offset + k as f64 * p + self.street_width;
        (lo, lo + self.block_side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    pub step_length: f64,
    pub drift_fraction: f64,
    #[serde(default)]
    pub constrain_to_streets: bool,
}

impl MobilityConfig {
    pub fn for_side_length(side_length: f64) -> Self {
        Self {
            step_length: 0.01 * side_length,
            drift_fraction: 0.7,
            constrain_to_streets: false,
        }
    }

    pub fn stationary() -> Self {
        Self {
            step_length: 0.0,
            drift_fraction: 0.7,
            constrain_to_streets: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dimension: usize,
    pub side_length: f64,
    #[serde(default)]
    pub obstacle_grid: Option<ObstacleGrid>,
    #[serde(default = "default_transmission")]
    pub transmission_factor: f64,
    #[serde(default)]
    pub attenuation_mode: AttenuationMode,
    pub mobility: MobilityConfig,
    #[serde(default)]
    pub link_rule: LinkRule,
}

fn default_transmission() -> f64 {
    1.0
}

impl WorldConfig {
    /// Obstacle-free world with default mobility for its size.
    pub fn open(dimension: usize, side_length: f64) -> Self {
        Self {
            dimension,
            side_length,
            obstacle_grid: None,
            transmission_factor: 1.0,
            attenuation_mode: AttenuationMode::default(),
            mobility: MobilityConfig::for_side_length(side_length),
            link_rule: LinkRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.dimension, 2 | 3) {
            return Err(Error::InvalidConfig(format!(
                "dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "side length must be positive, got {}",
                self.side_length
            )));
        }
        if !(0.0..=1.0).contains(&self.transmission_factor) {
            return Err(Error::InvalidConfig(format!(
                "transmission factor must lie in [0, 1], got {}",
                self.transmission_factor
            )));
        }
        let m = &self.mobility;
        if !(m.step_length >= 0.0 && (0.0..=1.0).contains(&m.drift_fraction)) {
            return Err(Error::InvalidConfig(format!("invalid mobility {m:?}")));
        }
        if let Some(grid) = &self.obstacle_grid {
            grid.validate()?;
        }
        Ok(())
    }

    pub fn r_min(&self) -> f64 {
        0.0
    }

    /// Largest useful radius, the world diagonal.
    pub fn r_max(&self) -> f64 {
        self.side_length * (self.dimension as f64).sqrt()
    }

    pub fn distance_floor(&self) -> f64 {
        DIST_FLOOR_FRACTION * self.side_length
    }

    /// Volume of the world, `L^D`.
    pub fn volume(&self) -> f64 {
        self.side_length.powi(self.dimension as i32)
    }

    /// Volume of a `D`-ball of radius `r`.
    pub fn ball_volume(&self, r: f64) -> f64 {
        match self.dimension {
            3 => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
            _ => std::f64::consts::PI * r * r,
        }
    }

    pub fn has_obstacles(&self) -> bool {
        self.obstacle_grid.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBody {
    pub id: usize,
    pub position: Vec<f64>,
    pub radius: f64,
    pub drift_direction: Vec<f64>,
    pub active: bool,
}

impl AgentBody {
    pub fn new(id: usize, position: Vec<f64>, radius: f64, drift_direction: Vec<f64>) -> Self {
        Self {
            id,
            position,
            radius,
            drift_direction,
            active: true,
        }
    }
}

/// Dense symmetric matrix of floored pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// All pairwise distances, off-diagonal entries floored at `1e-6 L`.
pub fn pairwise_distances(bodies: &[AgentBody], side_length: f64) -> DistanceMatrix {
    let n = bodies.len();
    let floor = DIST_FLOOR_FRACTION * side_length;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&bodies[i].position, &bodies[j].position).max(floor);
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

/// Mirror `position` back into `[0, L]^D`, negating the matching components
/// of `direction`. Overshoots of `L` or more are rejected.
pub fn reflect(position: &mut [f64], direction: &mut [f64], side_length: f64) -> Result<()> {
    for c in position.iter() {
        if !(*c > -side_length && *c < 2.0 * side_length) {
            return Err(Error::InvalidInput(format!(
                "coordinate {c} overshoots the world [0, {side_length}] by L or more"
            )));
        }
    }
    for (c, d) in position.iter_mut().zip(direction.iter_mut()) {
        if *c < 0.0 {
            *c = -*c;
            *d = -*d;
        } else if *c > side_length {
            *c = 2.0 * side_length - *c;
            *d = -*d;
        }
    }
    Ok(())
}

pub fn random_unit_vector<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> Vec<f64> {
    if dimension == 2 {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        return vec![theta.cos(), theta.sin()];
    }
    loop {
        let v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point in the world; on streets only when `on_streets` and a grid exists.
pub fn random_position<R: Rng + ?Sized>(config: &WorldConfig, on_streets: bool, rng: &mut R) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..config.dimension)
            .map(|_| rng.random_range(0.0..=config.side_length))
            .collect();
        match (&config.obstacle_grid, on_streets) {
            (Some(grid), true) if grid.is_inside_block(&p) => continue,
            _ => return p,
        }
    }
}

/// Move every active body one step: a drift share along its fixed direction
/// plus a noise share along a fresh random direction, mirrored into the world.
pub fn step_mobility<R: Rng + ?Sized>(bodies: &mut [AgentBody], config: &WorldConfig, rng: &mut R) {
    let m = &config.mobility;
    if m.step_length <= 0.0 {
        return;
    }
    let drift = m.drift_fraction * m.step_length;
    let noise = (1.0 - m.drift_fraction) * m.step_length;
    let grid = config.obstacle_grid.filter(|_| m.constrain_to_streets);
    let side = config.side_length;

    for body in bodies.iter_mut().filter(|b| b.active) {
        let kick = random_unit_vector(config.dimension, rng);
        let displacement: Vec<f64> = body
            .drift_direction
            .iter()
            .zip(&kick)
            .map(|(d, k)| drift * d + noise * k)
            .collect();

        let (pos, dir) = displaced(&body.position, &body.drift_direction, &displacement, side);
        match grid {
            Some(grid) if grid.is_inside_block(&pos) => {
                // Fall back to moving along the street the agent stands on.
                let (along_x, along_y) = grid.street_axes(&body.position);
                let axis = match (along_x, along_y) {
                    (true, true) => Some(if displacement[0].abs() >= displacement[1].abs() { 0 } else { 1 }),
                    (true, false) => Some(0),
                    (false, true) => Some(1),
                    (false, false) => None,
                };
                if let Some(axis) = axis {
                    let mut projected = displacement.clone();
                    projected[1 - axis] = 0.0;
                    let (pos, dir) = displaced(&body.position, &body.drift_direction, &projected, side);
                    if !grid.is_inside_block(&pos) {
                        body.position = pos;
                        body.drift_direction = dir;
                    }
                }
            }
            _ => {
                body.position = pos;
                body.drift_direction = dir;
            }
        }
    }
}

fn displaced(position: &[f64], direction: &[f64], displacement: &[f64], side: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pos: Vec<f64> = position.iter().zip(displacement).map(|(p, d)| p + d).collect();
    let mut dir = direction.to_vec();
    // Step lengths are far below L, so a single mirror always suffices.
    if reflect(&mut pos, &mut dir, side).is_err() {
        return (position.to_vec(), direction.to_vec());
    }
    (pos, dir)
}

/// Number of distinct blocks whose interior the segment `(a, b)` passes through.
pub fn blocked_count(a: &[f64], b: &[f64], grid: &ObstacleGrid) -> usize {
    let (x0, y0) = (a[0], a[1]);
    let (dx, dy) = (b[0] - x0, b[1] - y0);
    let mut count = 0;
    for kx in grid.block_indices(x0.min(b[0]), x0.max(b[0])) {
        let (xlo, xhi) = grid.block_span(kx);
        let Some((tx0, tx1)) = slab(x0, dx, xlo, xhi) else {
            continue;
        };
        for ky in grid.block_indices(y0.min(b[1]), y0.max(b[1])) {
            let (ylo, yhi) = grid.block_span(ky);
            let Some((ty0, ty1)) = slab(y0, dy, ylo, yhi) else {
                continue;
            };
            if tx0.max(ty0) < tx1.min(ty1) {
                count += 1;
            }
        }
    }
    count
}

/// Parameter interval of `origin + t * delta`, `t` in `[0, 1]`, inside the open slab `(lo, hi)`.
fn slab(origin: f64, delta: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if delta == 0.0 {
        return (origin > lo && origin < hi).then_some((0.0, 1.0));
    }
    let (mut t0, mut t1) = ((lo - origin) / delta, (hi - origin) / delta);
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    let (t0, t1) = (t0.max(0.0), t1.min(1.0));
    (t0 < t1).then_some((t0, t1))
}

/// Multiplier applied to the mutual radius of a pair seen through the obstacle grid.
pub fn range_factor(a: &[f64], b: &[f64], config: &WorldConfig) -> f64 {
    let Some(grid) = &config.obstacle_grid else {
        return 1.0;
    };
    let t = config.transmission_factor;
    if t == 1.0 {
        return 1.0;
    }
    match blocked_count(a, b, grid) {
        0 => 1.0,
        n => match config.attenuation_mode {
            AttenuationMode::OncePerBlockedSegment => t,
            AttenuationMode::PerObstacleMultiplicative => t.powi(n as i32),
        },
    }
}

/// Range factors for every pair, or `None` when the world has no attenuation.
pub fn range_factor_matrix(bodies: &[AgentBody], config: &WorldConfig) -> Option<Vec<f64>> {
    if config.obstacle_grid.is_none() || config.transmission_factor == 1.0 {
        return None;
    }
    let n = bodies.len();
    let mut out = vec![1.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let f = range_factor(&bodies[i].position, &bodies[j].position, config);
            out[i * n + j] = f;
            out[j * n + i] = f;
        }
    }
    Some(out)
}
