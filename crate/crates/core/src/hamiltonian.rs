//! The network Hamiltonian
//!
//! ```text
//! H = sum_i [ a1 k_i^2 + a2 k_i^3 + a3 r_i^2 + a4 sum_{j != i} A_ij / d_ij ]
//! ```
//!
//! together with the exact change caused by one agent's radius move (the
//! learning reward) and the receiver-side change used to accept a
//! connection request.

use serde::{Deserialize, Serialize};

use crate::geometry::{AgentBody, DistanceMatrix};
use crate::topology::{Adjacency, LinkGeometry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Coefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl Coefficients {
    pub const fn new(alpha1: f64, alpha2: f64, alpha3: f64, alpha4: f64) -> Self {
        Self {
            alpha1,
            alpha2,
            alpha3,
            alpha4,
        }
    }

    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const STATIC: Self = Self::new(-0.5, 0.2, 0.1, -0.5);
    pub const MOVING: Self = Self::new(-0.5, 0.1, 0.2, -0.5);
    pub const CHURN: Self = Self::new(-0.5, 0.3, 1.0, -1000.0);
    /// Churn values with a stiffer radius cost, so sparse worlds fragment.
    pub const SWEEP: Self = Self::new(-0.5, 0.3, 1.25, -1000.0);

    /// Degree part of a node's Hamiltonian, `a1 k^2 + a2 k^3`.
    #[inline]
    pub fn degree_term(&self, k: usize) -> f64 {
        let k = k as f64;
        self.alpha1 * k * k + self.alpha2 * k * k * k
    }

    pub fn is_finite(&self) -> bool {
        [self.alpha1, self.alpha2, self.alpha3, self.alpha4].iter().all(|a| a.is_finite())
    }
}

impl From<[f64; 4]> for Coefficients {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Coefficients> for [f64; 4] {
    fn from(c: Coefficients) -> Self {
        [c.alpha1, c.alpha2, c.alpha3, c.alpha4]
    }
}

/// Which Hamiltonian change becomes the reward of a radius move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardScope {
    /// Change of the total H, including the partner side of every flipped link.
    #[default]
    GlobalExact,
    /// Change of the moving agent's own `H_i` only.
    OwnNode,
}

pub fn node_hamiltonian(
    i: usize,
    bodies: &[AgentBody],
    adj: &Adjacency,
    distances: &DistanceMatrix,
    coeffs: &Coefficients,
) -> f64 {
    let r = bodies[i].radius;
    let links: f64 = adj.neighbors(i).map(|j| 1.0 / distances.get(i, j)).sum();
    coeffs.degree_term(adj.degree(i)) + coeffs.alpha3 * r * r + coeffs.alpha4 * links
}

pub fn total_hamiltonian(bodies: &[AgentBody], adj: &Adjacency, distances: &DistanceMatrix, coeffs: &Coefficients) -> f64 {
    adj.index_map()
        .iter()
        .map(|&i| node_hamiltonian(i, bodies, adj, distances, coeffs))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkFlip {
    pub other: usize,
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusDelta {
    pub delta_h: f64,
    pub flips: Vec<LinkFlip>,
}

/// Hamiltonian change if agent `i` switches to radius `r_new`, computed from
/// the links that flip. Does not modify the adjacency.
#[allow(clippy::too_many_arguments)]
pub fn delta_h_radius(
    i: usize,
    r_new: f64,
    r_max: f64,
    bodies: &[AgentBody],
    adj: &Adjacency,
    geometry: &LinkGeometry,
    coeffs: &Coefficients,
    scope: RewardScope,
) -> Result<RadiusDelta> {
    if !(0.0..=r_max).contains(&r_new) {
        return Err(Error::RadiusOutOfRange {
            radius: r_new,
            min: 0.0,
            max: r_max,
        });
    }
    let r_old = bodies[i].radius;
    let mut flips = Vec::new();
    let mut partner_terms = 0.0;
    let mut link_sum = 0.0;
    let mut k_new = adj.degree(i) as isize;

    for &j in adj.index_map() {
        if j == i {
            continue;
        }
        let now = adj.linked(i, j);
        let after = geometry.linked(i, j, r_new, bodies[j].radius);
        if now == after {
            continue;
        }
        let k_j = adj.degree(j);
        let inv_d = 1.0 / geometry.distance(i, j);
        if after {
            k_new += 1;
            partner_terms += coeffs.degree_term(k_j + 1) - coeffs.degree_term(k_j);
            link_sum += inv_d;
        } else {
            k_new -= 1;
            partner_terms += coeffs.degree_term(k_j - 1) - coeffs.degree_term(k_j);
            link_sum -= inv_d;
        }
        flips.push(LinkFlip { other: j, on: after });
    }

    let own = coeffs.alpha3 * (r_new * r_new - r_old * r_old)
        + coeffs.degree_term(k_new as usize)
        - coeffs.degree_term(adj.degree(i));
    let delta_h = match scope {
        RewardScope::GlobalExact => own + partner_terms + 2.0 * coeffs.alpha4 * link_sum,
        RewardScope::OwnNode => own + coeffs.alpha4 * link_sum,
    };
    Ok(RadiusDelta { delta_h, flips })
}

/// Receiver-side Hamiltonian change for accepting one connection request:
/// one extra link, radius grown to `r_ij`, one new `1/r_ij` link term.
pub fn delta_h_request(k_i: usize, r_i: f64, r_ij: f64, coeffs: &Coefficients) -> Result<f64> {
    if !(r_ij > 0.0) {
        return Err(Error::NonPositiveDistance(r_ij));
    }
    let k = k_i as f64;
    Ok(coeffs.alpha1 * ((k + 1.0).powi(2) - k * k)
        + coeffs.alpha2 * ((k + 1.0).powi(3) - k * k * k)
        + coeffs.alpha3 * (r_ij * r_ij - r_i * r_i)
        + coeffs.alpha4 / r_ij)
}
