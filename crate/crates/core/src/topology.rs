//! Spatial graph construction and the per-step metric bundle.

use serde::{Deserialize, Serialize};

use crate::geometry::{pairwise_distances, range_factor_matrix, AgentBody, DistanceMatrix, WorldConfig};
use crate::hamiltonian::{total_hamiltonian, Coefficients};
use crate::{Error, Result};

/// How the two radii of a pair combine into the link range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinkRule {
    /// Linked iff each agent lies within the other's range.
    #[default]
    MutualRange,
    /// Linked iff either agent reaches the other.
    EitherRange,
}

impl LinkRule {
    #[inline]
    pub fn combine(self, r_i: f64, r_j: f64) -> f64 {
        match self {
            LinkRule::MutualRange => r_i.min(r_j),
            LinkRule::EitherRange => r_i.max(r_j),
        }
    }
}

/// Everything about a pair that does not depend on radii: the floored
/// distance, the obstacle range factor and the link rule.
#[derive(Debug, Clone)]
pub struct LinkGeometry {
    pub distances: DistanceMatrix,
    factors: Option<Vec<f64>>,
    pub rule: LinkRule,
}

impl LinkGeometry {
    pub fn new(bodies: &[AgentBody], world: &WorldConfig) -> Self {
        Self {
            distances: pairwise_distances(bodies, world.side_length),
            factors: range_factor_matrix(bodies, world),
            rule: world.link_rule,
        }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances.get(i, j)
    }

    #[inline]
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        match &self.factors {
            Some(f) => f[i * self.distances.len() + j],
            None => 1.0,
        }
    }

    #[inline]
    pub fn linked(&self, i: usize, j: usize, r_i: f64, r_j: f64) -> bool {
        i != j && self.distance(i, j) <= self.factor(i, j) * self.rule.combine(r_i, r_j)
    }
}

/// Symmetric adjacency over agent slots. Inactive slots carry no links and
/// are excluded from `index_map`, the list of rows that count.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    slots: usize,
    bits: Vec<bool>,
    degree: Vec<usize>,
    index_map: Vec<usize>,
}

impl Adjacency {
    pub fn empty(bodies: &[AgentBody]) -> Self {
        let slots = bodies.len();
        Self {
            slots,
            bits: vec![false; slots * slots],
            degree: vec![0; slots],
            index_map: bodies.iter().enumerate().filter(|(_, b)| b.active).map(|(i, _)| i).collect(),
        }
    }

    /// Number of active agents.
    pub fn n(&self) -> usize {
        self.index_map.len()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Active slot ids in row order.
    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    #[inline]
    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.slots + j]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn set_link(&mut self, i: usize, j: usize, on: bool) {
        debug_assert_ne!(i, j);
        if self.linked(i, j) == on {
            return;
        }
        self.bits[i * self.slots + j] = on;
        self.bits[j * self.slots + i] = on;
        if on {
            self.degree[i] += 1;
            self.degree[j] += 1;
        } else {
            self.degree[i] -= 1;
            self.degree[j] -= 1;
        }
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.bits[i * self.slots..(i + 1) * self.slots]
            .iter()
            .enumerate()
            .filter_map(|(j, &on)| on.then_some(j))
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.slots).flat_map(move |i| self.neighbors(i).filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// Symmetry, empty diagonal, cached degrees and inactive rows all agree.
    pub fn is_consistent(&self) -> bool {
        let mut active = vec![false; self.slots];
        for &i in &self.index_map {
            active[i] = true;
        }
        (0..self.slots).all(|i| {
            let row_sum = self.neighbors(i).count();
            !self.linked(i, i)
                && row_sum == self.degree[i]
                && (active[i] || row_sum == 0)
                && (0..self.slots).all(|j| self.linked(i, j) == self.linked(j, i))
        })
    }
}

/// Link every active pair whose distance is within the attenuated combined radius.
pub fn build_adjacency(bodies: &[AgentBody], geometry: &LinkGeometry) -> Adjacency {
    let mut adj = Adjacency::empty(bodies);
    let active = adj.index_map.clone();
    for (a, &i) in active.iter().enumerate() {
        for &j in &active[a + 1..] {
            if geometry.linked(i, j, bodies[i].radius, bodies[j].radius) {
                adj.set_link(i, j, true);
            }
        }
    }
    adj
}

/// Degrees of the active agents, in `index_map` order.
pub fn degrees(adj: &Adjacency) -> Vec<usize> {
    adj.index_map.iter().map(|&i| adj.degree[i]).collect()
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Size of the largest connected component over the number of active agents.
pub fn giant_component_fraction(adj: &Adjacency) -> Result<f64> {
    let n = adj.n();
    if n == 0 {
        return Err(Error::EmptyNetwork);
    }
    let mut sets = DisjointSet::new(adj.slots);
    for (i, j) in adj.edges() {
        sets.union(i, j);
    }
    let mut sizes = vec![0usize; adj.slots];
    for &i in &adj.index_map {
        let root = sets.find(i);
        sizes[root] += 1;
    }
    let largest = sizes.into_iter().max().unwrap_or(0);
    Ok(largest as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub connectivity_pct: f64,
    #[serde(rename = "total_H")]
    pub total_h: f64,
    pub energy: f64,
    pub mean_reduced_radius: f64,
    pub mean_degree: f64,
}

pub fn compute_metrics(
    step: usize,
    bodies: &[AgentBody],
    adj: &Adjacency,
    geometry: &LinkGeometry,
    coeffs: &Coefficients,
    side_length: f64,
) -> Result<MetricsRecord> {
    let giant = giant_component_fraction(adj)?;
    let n = adj.n() as f64;
    let (mut sum_r, mut sum_r2, mut sum_k) = (0.0, 0.0, 0.0);
    for &i in adj.index_map() {
        let r = bodies[i].radius;
        sum_r += r;
        sum_r2 += r * r;
        sum_k += adj.degree(i) as f64;
    }
    Ok(MetricsRecord {
        step,
        connectivity_pct: 100.0 * giant,
        total_h: total_hamiltonian(bodies, adj, &geometry.distances, coeffs),
        energy: coeffs.alpha3 * sum_r2,
        mean_reduced_radius: sum_r / n / side_length,
        mean_degree: sum_k / n,
    })
}
