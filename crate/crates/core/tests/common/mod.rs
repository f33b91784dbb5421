//! Independent reference implementations used by the integration tests.
//! Everything here recomputes from raw positions and radii, without the
//! library's distance matrix, adjacency or union-find.

#![allow(dead_code)]

pub mod checks;

use std::collections::VecDeque;

use hamnet::geometry::{ObstacleGrid, WorldConfig};
use hamnet::hamiltonian::Coefficients;
use hamnet::neuralnet::{NetParams, OutputActivation, SELU_ALPHA, SELU_LAMBDA};
use hamnet::world::World;

pub fn dist(a: &[f64], b: &[f64], side: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt().max(1e-6 * side)
}

/// Blocks hit by densely sampling the segment; may miss very thin corner clips.
pub fn sampled_blocks(a: &[f64], b: &[f64], grid: &ObstacleGrid, samples: usize) -> usize {
    let p = grid.block_side + grid.street_width;
    let mut hit = std::collections::BTreeSet::new();
    for s in 0..=samples {
        let t = s as f64 / samples as f64;
        let x = a[0] + t * (b[0] - a[0]) - grid.origin_offset;
        let y = a[1] + t * (b[1] - a[1]) - grid.origin_offset;
        let (ix, lx) = ((x / p).floor(), x - (x / p).floor() * p);
        let (iy, ly) = ((y / p).floor(), y - (y / p).floor() * p);
        if lx > grid.street_width && ly > grid.street_width {
            hit.insert((ix as i64, iy as i64));
        }
    }
    hit.len()
}

/// Link matrix from first principles; obstacle factors come from `factor`.
pub fn links_with(world: &World, factor: impl Fn(usize, usize) -> f64) -> Vec<Vec<bool>> {
    let bodies = world.bodies();
    let side = world.side_length();
    let n = bodies.len();
    let mut a = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || !bodies[i].active || !bodies[j].active {
                continue;
            }
            let d = dist(&bodies[i].position, &bodies[j].position, side);
            let reach = match world.config().link_rule {
                hamnet::topology::LinkRule::MutualRange => bodies[i].radius.min(bodies[j].radius),
                hamnet::topology::LinkRule::EitherRange => bodies[i].radius.max(bodies[j].radius),
            };
            a[i][j] = d <= factor(i, j) * reach;
        }
    }
    a
}

pub fn open_links(world: &World) -> Vec<Vec<bool>> {
    links_with(world, |_, _| 1.0)
}

pub fn hamiltonian(world: &World, links: &[Vec<bool>], c: &Coefficients) -> f64 {
    let bodies = world.bodies();
    let side = world.side_length();
    let mut h = 0.0;
    for i in 0..bodies.len() {
        if !bodies[i].active {
            continue;
        }
        let mut k = 0.0;
        let mut inv = 0.0;
        for j in 0..bodies.len() {
            if links[i][j] {
                k += 1.0;
                inv += 1.0 / dist(&bodies[i].position, &bodies[j].position, side);
            }
        }
        let r = bodies[i].radius;
        h += c.alpha1 * k * k + c.alpha2 * k * k * k + c.alpha3 * r * r + c.alpha4 * inv;
    }
    h
}

/// Largest component size by breadth-first search over active nodes.
pub fn largest_component(links: &[Vec<bool>], active: &[bool]) -> usize {
    let n = links.len();
    let mut seen = vec![false; n];
    let mut best = 0;
    for s in 0..n {
        if seen[s] || !active[s] {
            continue;
        }
        let mut size = 0;
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for v in 0..n {
                if links[u][v] && active[v] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        best = best.max(size);
    }
    best
}

fn elu(x: f64, a: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        a * (x.exp() - 1.0)
    }
}

/// Forward pass written as explicit matrix-vector products.
pub fn forward(params: &NetParams, x: &[f64; 3]) -> [f64; 2] {
    let mut h: Vec<f64> = x.to_vec();
    for (l, layer) in params.layers.iter().enumerate() {
        let w: Vec<Vec<f64>> = (0..layer.fan_out)
            .map(|o| (0..layer.fan_in).map(|i| layer.weights[i * layer.fan_out + o]).collect())
            .collect();
        let z: Vec<f64> = w
            .iter()
            .zip(&layer.biases)
            .map(|(row, b)| row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect();
        h = if l < 2 {
            z.iter().map(|&v| elu(v, 1.0)).collect()
        } else {
            match params.output_activation {
                OutputActivation::ScaledElu => z.iter().map(|&v| SELU_LAMBDA * elu(v, SELU_ALPHA)).collect(),
                OutputActivation::Elu => z.iter().map(|&v| elu(v, 1.0)).collect(),
                OutputActivation::Linear => z,
            }
        };
    }
    [h[0], h[1]]
}

pub fn world_config(side: f64) -> WorldConfig {
    WorldConfig::open(2, side)
}
