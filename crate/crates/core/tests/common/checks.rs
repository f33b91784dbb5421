//! The fast property checks, returning what they measured so that both the
//! property tests and the acceptance report can use them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hamnet::dqn::epsilon;
use hamnet::geometry::{AgentBody, ObstacleGrid, WorldConfig};
use hamnet::hamiltonian::{delta_h_request, Coefficients, RewardScope};
use hamnet::harness::{run_scenario, write_run, ScenarioConfig, ScenarioKind};
use hamnet::neuralnet::{NetParams, OutputActivation};
use hamnet::strategies::StrategyKind;
use hamnet::topology::{giant_component_fraction, Adjacency};
use hamnet::world::World;

pub fn random_coeffs(rng: &mut impl Rng) -> Coefficients {
    Coefficients::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-5.0..5.0),
    )
}

pub fn random_world(rng: &mut ChaCha8Rng, n: usize, side: f64) -> World {
    let mut w = World::random(WorldConfig::open(2, side), n, 1.0, rng).unwrap();
    for i in 0..n {
        let r = rng.random_range(0.0..side * 0.4);
        w.set_radius(i, r).unwrap();
    }
    w
}

/// Worst relative gap between incremental and recomputed Hamiltonian changes.
pub fn delta_h_worst_error(moves: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..moves {
        let n = rng.random_range(2..25);
        let side = rng.random_range(3.0..20.0);
        let mut w = random_world(&mut rng, n, side);
        if rng.random_bool(0.2) {
            let victim = rng.random_range(0..n);
            w.deactivate(victim);
        }
        let c = random_coeffs(&mut rng);
        let i = w.active_ids()[rng.random_range(0..w.n_active())];
        let r_new = rng.random_range(0.0..w.config().r_max());
        let before = super::hamiltonian(&w, &super::open_links(&w), &c);
        let delta = w.radius_delta(i, r_new, &c, RewardScope::GlobalExact).unwrap();
        w.apply_radius(i, r_new, &delta);
        let after = super::hamiltonian(&w, &super::open_links(&w), &c);
        let err = (delta.delta_h - (after - before)).abs() / (1.0 + after.abs().max(before.abs()));
        worst = worst.max(err);
    }
    worst
}

/// The two hand-derived request values: two links at distance 3, and a first link at distance 1.
pub fn request_hand_values() -> [f64; 2] {
    let c = Coefficients::STATIC;
    [
        delta_h_request(2, 1.0, 3.0, &c).unwrap(),
        delta_h_request(0, 1.0, 1.0, &c).unwrap(),
    ]
}

fn param_mut(q: &mut NetParams, l: usize, idx: usize) -> &mut f64 {
    let layer = &mut q.layers[l];
    let nw = layer.weights.len();
    if idx < nw {
        &mut layer.weights[idx]
    } else {
        &mut layer.biases[idx - nw]
    }
}

/// Worst relative gap between backprop and central differences.
pub fn gradient_worst_error(cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let act = [OutputActivation::ScaledElu, OutputActivation::Elu, OutputActivation::Linear][case % 3];
        let mut p = NetParams::init(&mut rng, act);
        for layer in p.layers.iter_mut() {
            for b in layer.biases.iter_mut() {
                *b = rng.random_range(-0.3..0.3);
            }
        }
        let x = [rng.random_range(0.0..3.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let action = rng.random_range(0..2);
        let target = rng.random_range(-2.0..2.0);
        let (_, grad) = p.loss_and_gradient(&x, action, target);
        for l in 0..3 {
            let count = p.layers[l].weights.len() + p.layers[l].biases.len();
            for idx in 0..count {
                let mut plus = p.clone();
                *param_mut(&mut plus, l, idx) += h;
                let mut minus = p.clone();
                *param_mut(&mut minus, l, idx) -= h;
                let fd = (plus.loss_and_gradient(&x, action, target).0 - minus.loss_and_gradient(&x, action, target).0)
                    / (2.0 * h);
                let mut g = grad.clone();
                let analytic = *param_mut(&mut g, l, idx);
                let scale = analytic.abs().max(fd.abs()).max(1e-3);
                worst = worst.max((analytic - fd).abs() / scale);
            }
        }
    }
    worst
}

/// Steps in `0..=t_max` where the schedule differs from the closed form.
pub fn epsilon_mismatches(t_max: usize) -> usize {
    (0..=t_max)
        .filter(|&t| epsilon(t, t_max) != (1.0 - t as f64 / (t_max as f64 / 2.0)).max(0.0))
        .count()
}

/// Random graphs of up to 12 nodes where the giant component disagrees with BFS.
pub fn giant_component_mismatches(graphs: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut bad = 0;
    for _ in 0..graphs {
        let n = rng.random_range(1..=12);
        let mut bodies: Vec<AgentBody> = (0..n).map(|id| AgentBody::new(id, vec![0.0, 0.0], 0.0, vec![1.0, 0.0])).collect();
        let mut active = vec![true; n];
        for (k, b) in bodies.iter_mut().enumerate() {
            if k > 0 && rng.random_bool(0.15) {
                b.active = false;
                active[k] = false;
            }
        }
        let mut adj = Adjacency::empty(&bodies);
        let mut links = vec![vec![false; n]; n];
        let p = rng.random_range(0.0..0.6);
        for i in 0..n {
            for j in (i + 1)..n {
                if active[i] && active[j] && rng.random_bool(p) {
                    adj.set_link(i, j, true);
                    links[i][j] = true;
                    links[j][i] = true;
                }
            }
        }
        let n_active = active.iter().filter(|&&a| a).count();
        let expected = super::largest_component(&links, &active) as f64 / n_active as f64;
        bad += usize::from(giant_component_fraction(&adj).unwrap() != expected);
    }
    bad
}

/// Moves agents and radii for `steps` steps in an open and an obstacle world;
/// returns the first broken invariant, if any.
pub fn world_invariant_violation(steps: usize) -> Option<String> {
    for (seed, obstacles) in [(20u64, false), (21, true)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = 20.0;
        let mut config = WorldConfig::open(2, side);
        config.mobility.step_length = 0.3;
        if obstacles {
            config.obstacle_grid = Some(ObstacleGrid::manhattan(side));
            config.transmission_factor = 0.5;
            config.mobility.constrain_to_streets = true;
        }
        let grid = config.obstacle_grid;
        let mut w = World::random(config, 25, 2.0, &mut rng).unwrap();
        for step in 0..steps {
            w.step_mobility(&mut rng);
            let i = w.active_ids()[rng.random_range(0..w.n_active())];
            let r = w.clamp_radius(w.body(i).radius + rng.random_range(-1.0..1.0));
            let delta = w.radius_delta(i, r, &Coefficients::STATIC, RewardScope::GlobalExact).unwrap();
            w.apply_radius(i, r, &delta);
            for b in w.bodies() {
                if !b.position.iter().all(|c| (0.0..=side).contains(c)) {
                    return Some(format!("step {step}: out of bounds at {:?}", b.position));
                }
                if grid.is_some_and(|g| g.is_inside_block(&b.position)) {
                    return Some(format!("step {step}: inside a block at {:?}", b.position));
                }
            }
            let adj = w.adjacency();
            if (0..25).any(|a| adj.linked(a, a)) || !adj.is_consistent() {
                return Some(format!("step {step}: self link or inconsistent degrees"));
            }
            if (0..25).any(|a| (0..25).any(|b| adj.linked(a, b) != adj.linked(b, a))) {
                return Some(format!("step {step}: asymmetric adjacency"));
            }
            if step % 500 == 0 {
                let expected = super::links_with(&w, |a, b| w.geometry().factor(a, b));
                if (0..25).any(|a| (0..25).any(|b| adj.linked(a, b) != expected[a][b])) {
                    return Some(format!("step {step}: links differ from the oracle"));
                }
            }
        }
    }
    None
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs a churned, moving cooperative scenario twice and compares every output byte.
pub fn outputs_byte_identical() -> bool {
    let mut config = ScenarioConfig::preset(ScenarioKind::Churn, StrategyKind::Cooperative);
    config.n_agents = 40;
    config.t_max = 300;
    config.seed = 5;
    config.churn.as_mut().unwrap().period = 60;
    let weights = NetParams::init(&mut ChaCha8Rng::seed_from_u64(3), OutputActivation::ScaledElu);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let run = run_scenario(&config, Some(&weights)).unwrap();
        write_run(d.path(), &run).unwrap();
    }
    let (a, b) = (files_under(dirs[0].path()), files_under(dirs[1].path()));
    !a.is_empty() && a == b
}
