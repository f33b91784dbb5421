//! Dense 3 -> 32 -> 32 -> 2 action-value network with ELU hidden units,
//! squared-error loss on the selected action, hand-written backpropagation
//! and Adam.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const INPUTS: usize = 3;
pub const HIDDEN: usize = 32;
pub const OUTPUTS: usize = 2;
pub const LAYER_SHAPES: [(usize, usize); 3] = [(INPUTS, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, OUTPUTS)];

pub const SELU_LAMBDA: f64 = 1.0507;
pub const SELU_ALPHA: f64 = 1.6733;

const WEIGHTS_MAGIC: &str = "hamnet-weights";
const WEIGHTS_VERSION: &str = "v1";

#[inline]
pub fn elu(x: f64, a: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        a * x.exp_m1()
    }
}

#[inline]
pub fn scaled_elu(x: f64, lambda: f64, a: f64) -> f64 {
    lambda * elu(x, a)
}

#[inline]
fn elu_grad(x: f64, a: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        a * x.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputActivation {
    #[default]
    ScaledElu,
    Elu,
    Linear,
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::ScaledElu => scaled_elu(z, SELU_LAMBDA, SELU_ALPHA),
            Self::Elu => elu(z, 1.0),
            Self::Linear => z,
        }
    }

    fn grad(self, z: f64) -> f64 {
        match self {
            Self::ScaledElu => SELU_LAMBDA * elu_grad(z, SELU_ALPHA),
            Self::Elu => elu_grad(z, 1.0),
            Self::Linear => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::ScaledElu => "scaled-elu",
            Self::Elu => "elu",
            Self::Linear => "linear",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::ScaledElu, Self::Elu, Self::Linear].into_iter().find(|a| a.name() == s)
    }
}

/// One dense layer; `weights[i * fan_out + o]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
        }
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (i, x) in input.iter().enumerate() {
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub layers: [Layer; 3],
    pub output_activation: OutputActivation,
}

/// Pre-activations and activations of one forward pass.
struct Trace {
    input: [f64; INPUTS],
    z1: [f64; HIDDEN],
    h1: [f64; HIDDEN],
    z2: [f64; HIDDEN],
    h2: [f64; HIDDEN],
    z3: [f64; OUTPUTS],
    out: [f64; OUTPUTS],
}

impl NetParams {
    pub fn zeros(output_activation: OutputActivation) -> Self {
        Self {
            layers: LAYER_SHAPES.map(|(i, o)| Layer::zeros(i, o)),
            output_activation,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, output_activation: OutputActivation) -> Self {
        let mut params = Self::zeros(output_activation);
        for layer in &mut params.layers {
            let bound = glorot_bound(layer.fan_in, layer.fan_out);
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        params
    }

    fn tensors(&self) -> [&Vec<f64>; 6] {
        let [l1, l2, l3] = &self.layers;
        [&l1.weights, &l1.biases, &l2.weights, &l2.biases, &l3.weights, &l3.biases]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        let [l1, l2, l3] = &mut self.layers;
        [
            &mut l1.weights,
            &mut l1.biases,
            &mut l2.weights,
            &mut l2.biases,
            &mut l3.weights,
            &mut l3.biases,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Action values `[increase, decrease]`.
    pub fn forward(&self, features: &[f64; INPUTS]) -> Result<[f64; OUTPUTS]> {
        if !features.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(self.trace(features).out)
    }

    fn trace(&self, features: &[f64; INPUTS]) -> Trace {
        let mut t = Trace {
            input: *features,
            z1: [0.0; HIDDEN],
            h1: [0.0; HIDDEN],
            z2: [0.0; HIDDEN],
            h2: [0.0; HIDDEN],
            z3: [0.0; OUTPUTS],
            out: [0.0; OUTPUTS],
        };
        let [l1, l2, l3] = &self.layers;
        l1.affine(&t.input, &mut t.z1);
        for (h, z) in t.h1.iter_mut().zip(&t.z1) {
            *h = elu(*z, 1.0);
        }
        l2.affine(&t.h1, &mut t.z2);
        for (h, z) in t.h2.iter_mut().zip(&t.z2) {
            *h = elu(*z, 1.0);
        }
        l3.affine(&t.h2, &mut t.z3);
        for (o, z) in t.out.iter_mut().zip(&t.z3) {
            *o = self.output_activation.apply(*z);
        }
        t
    }

    /// Squared error of the selected action value against `target` and its
    /// gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, features: &[f64; INPUTS], action: usize, target: f64) -> (f64, NetParams) {
        let t = self.trace(features);
        let err = t.out[action] - target;
        let mut grad = NetParams::zeros(self.output_activation);
        let [_, l2, l3] = &self.layers;
        let [g1, g2, g3] = &mut grad.layers;

        let delta3 = 2.0 * err * self.output_activation.grad(t.z3[action]);
        g3.biases[action] = delta3;
        let mut delta2 = [0.0; HIDDEN];
        for i in 0..HIDDEN {
            g3.weights[i * OUTPUTS + action] = delta3 * t.h2[i];
            delta2[i] = delta3 * l3.weights[i * OUTPUTS + action] * elu_grad(t.z2[i], 1.0);
        }

        g2.biases.copy_from_slice(&delta2);
        let mut delta1 = [0.0; HIDDEN];
        for i in 0..HIDDEN {
            let row = &l2.weights[i * HIDDEN..(i + 1) * HIDDEN];
            let mut back = 0.0;
            for o in 0..HIDDEN {
                g2.weights[i * HIDDEN + o] = t.h1[i] * delta2[o];
                back += row[o] * delta2[o];
            }
            delta1[i] = back * elu_grad(t.z1[i], 1.0);
        }

        g1.biases.copy_from_slice(&delta1);
        for i in 0..INPUTS {
            for o in 0..HIDDEN {
                g1.weights[i * HIDDEN + o] = t.input[i] * delta1[o];
            }
        }
        (err * err, grad)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingWeights(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        Self::from_text(&text, path)
    }

    /// Plain-text weights document: magic/version line, layer shapes, output
    /// activation, then each layer's weight rows and bias row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{WEIGHTS_MAGIC} {WEIGHTS_VERSION}\n");
        let shapes: Vec<String> = self.layers.iter().map(|l| format!("{}x{}", l.fan_in, l.fan_out)).collect();
        s.push_str(&shapes.join(" "));
        s.push('\n');
        let _ = writeln!(s, "output {}", self.output_activation.name());
        for layer in &self.layers {
            for row in layer.weights.chunks(layer.fan_out) {
                push_row(&mut s, row);
            }
            push_row(&mut s, &layer.biases);
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::WeightsFormat {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();

        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [WEIGHTS_MAGIC, WEIGHTS_VERSION] => {}
            [WEIGHTS_MAGIC, other] => {
                return Err(Error::VersionMismatch {
                    path: path.to_path_buf(),
                    found: other.to_string(),
                })
            }
            _ => return Err(bad(format!("bad header {header:?}"))),
        }

        let shapes = lines.next().ok_or_else(|| bad("missing layer shapes".into()))?;
        let expected: Vec<String> = LAYER_SHAPES.iter().map(|(i, o)| format!("{i}x{o}")).collect();
        let found: Vec<&str> = shapes.split_whitespace().collect();
        if found != expected {
            return Err(Error::ShapeMismatch {
                path: path.to_path_buf(),
                expected: expected.join(" "),
                found: shapes.to_string(),
            });
        }

        let output = lines.next().ok_or_else(|| bad("missing output activation".into()))?;
        let activation = output
            .strip_prefix("output ")
            .and_then(|name| OutputActivation::parse(name.trim()))
            .ok_or_else(|| bad(format!("bad output activation line {output:?}")))?;

        let mut params = NetParams::zeros(activation);
        for (k, layer) in params.layers.iter_mut().enumerate() {
            let fan_out = layer.fan_out;
            for (r, row) in layer.weights.chunks_mut(fan_out).enumerate() {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("truncated in layer {k} weight row {r}")))?;
                parse_row(line, row).map_err(|e| bad(format!("layer {k} weight row {r}: {e}")))?;
            }
            let line = lines.next().ok_or_else(|| bad(format!("truncated in layer {k} biases")))?;
            parse_row(line, &mut layer.biases).map_err(|e| bad(format!("layer {k} biases: {e}")))?;
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing data after last layer".into()));
        }
        Ok(params)
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn push_row(s: &mut String, row: &[f64]) {
    let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
    s.push_str(&cells.join(" "));
    s.push('\n');
}

fn parse_row(line: &str, out: &mut [f64]) -> std::result::Result<(), String> {
    let mut cells = line.split_whitespace();
    for slot in out.iter_mut() {
        let cell = cells.next().ok_or("too few values")?;
        let v: f64 = cell.parse().map_err(|_| format!("bad number {cell:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value {cell:?}"));
        }
        *slot = v;
    }
    if cells.next().is_some() {
        return Err("too many values".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &NetParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update of `params` along `grad`.
    pub fn apply(&mut self, params: &mut NetParams, grad: &NetParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// One online regression step of the selected action value toward `target`.
/// Returns the loss before the update. A non-finite gradient leaves both
/// `params` and `adam` untouched.
pub fn train_step(
    params: &mut NetParams,
    adam: &mut AdamState,
    features: &[f64; INPUTS],
    action: usize,
    target: f64,
    lr: f64,
) -> Result<f64> {
    if action >= OUTPUTS {
        return Err(Error::InvalidInput(format!("action index {action} out of range")));
    }
    if !target.is_finite() {
        return Err(Error::NonFinite("training target"));
    }
    if !features.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("network input"));
    }
    let (loss, grad) = params.loss_and_gradient(features, action, target);
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    adam.apply(params, &grad, lr);
    Ok(loss)
}
