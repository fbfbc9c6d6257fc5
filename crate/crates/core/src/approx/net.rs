//! Flat parameter vectors and small Q-networks over state features.

use std::fmt::Write as _;
use std::ops::Range;
use std::str::FromStr;

use crate::bellman::QTable;
use crate::error::{Error, Result};
use crate::mdp::State;
use crate::rng::RngState;

use super::tape::{Tape, Var};

/// A named slice of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub range: Range<usize>,
}

/// Parameters as one real vector plus a layout of named blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    theta: Vec<f64>,
    layout: Vec<Block>,
}

impl ParamVector {
    /// Blocks must tile `0..theta.len()` in order and every entry must be
    /// finite.
    pub fn new(theta: Vec<f64>, layout: Vec<Block>) -> Result<Self> {
        let mut end = 0;
        for b in &layout {
            if b.range.start != end || b.range.end < b.range.start {
                return Err(Error::Config(format!("block {} does not continue the layout at {end}", b.name)));
            }
            end = b.range.end;
        }
        if end != theta.len() {
            return Err(Error::Config(format!(
                "layout covers {end} entries but the vector has {}",
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("parameter {i} is not finite")));
        }
        Ok(Self { theta, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn layout(&self) -> &[Block] {
        &self.layout
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.iter().find(|b| b.name == name).map(|b| &self.theta[b.range.clone()])
    }

    /// Same layout, new values.
    pub fn with_values(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(theta, self.layout.clone())
    }

    /// `θ_j + c·d_j`, computed as written for every coordinate.
    pub fn add_scaled(&self, c: f64, d: &[f64]) -> ParamVector {
        assert_eq!(d.len(), self.theta.len(), "direction length");
        ParamVector {
            theta: self.theta.iter().zip(d).map(|(t, g)| t + c * g).collect(),
            layout: self.layout.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.theta
            .iter()
            .zip(&other.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `block,index,value` rows, index counted within the block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,index,value\n");
        for b in &self.layout {
            for (i, v) in self.theta[b.range.clone()].iter().enumerate() {
                writeln!(out, "{},{},{}", b.name, i, v).unwrap();
            }
        }
        out
    }
}

/// A fixed feature vector per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    rows: Vec<Vec<f64>>,
}

impl Features {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config("features need one row of equal positive length per state".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Config("features must be finite".into()));
        }
        Ok(Self { rows })
    }

    /// The tabular embedding.
    pub fn one_hot(n_states: usize) -> Self {
        Self {
            rows: (0..n_states)
                .map(|s| (0..n_states).map(|i| if i == s { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn of(&self, s: State) -> &[f64] {
        &self.rows[s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::UnsupportedOp(format!("activation {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    /// `Q(s)[a] = Σ_i φ_i(s)·θ[i·A + a]`, no bias.
    Linear,
    /// Hidden layers of the given widths; the output layer is affine.
    Mlp { hidden: Vec<usize>, activation: Activation },
}

/// How a run initialises its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform on `[-scale, scale]`.
    Uniform(f64),
}

/// Stream of the run's seed reserved for parameter initialisation.
pub const INIT_STREAM: u64 = 1;

/// `(Θ, S) → ℝ^A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    features: Features,
    n_actions: usize,
    arch: Architecture,
    layout: Vec<Block>,
    /// `(input, output)` width of each affine layer.
    shapes: Vec<(usize, usize)>,
}

impl QNetwork {
    pub fn new(features: Features, n_actions: usize, arch: Architecture) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::Config("a network needs at least one output".into()));
        }
        let mut layout = Vec::new();
        let mut shapes = Vec::new();
        let mut push = |name: String, len: usize| {
            let start = layout.last().map_or(0, |b: &Block| b.range.end);
            layout.push(Block {
                name,
                range: start..start + len,
            });
        };
        match &arch {
            Architecture::Linear => {
                push("w".into(), features.dim() * n_actions);
                shapes.push((features.dim(), n_actions));
            }
            Architecture::Mlp { hidden, .. } => {
                if hidden.contains(&0) {
                    return Err(Error::Config("hidden layers must be non-empty".into()));
                }
                let widths: Vec<usize> = std::iter::once(features.dim())
                    .chain(hidden.iter().copied())
                    .chain(std::iter::once(n_actions))
                    .collect();
                for (l, w) in widths.windows(2).enumerate() {
                    push(format!("w{l}"), w[0] * w[1]);
                    push(format!("b{l}"), w[1]);
                    shapes.push((w[0], w[1]));
                }
            }
        }
        Ok(Self {
            features,
            n_actions,
            arch,
            layout,
            shapes,
        })
    }

    /// Linear network on one-hot state features.
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        Self::new(Features::one_hot(n_states), n_actions, Architecture::Linear).expect("valid tabular network")
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.features.n_states()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn n_params(&self) -> usize {
        self.layout.last().map_or(0, |b| b.range.end)
    }

    pub fn params(&self, theta: Vec<f64>) -> Result<ParamVector> {
        ParamVector::new(theta, self.layout.clone())
    }

    pub fn init(&self, init: Init, seed: u64) -> ParamVector {
        let theta = match init {
            Init::Zeros => vec![0.0; self.n_params()],
            Init::Uniform(scale) => {
                let mut rng = RngState::with_stream(seed, INIT_STREAM);
                (0..self.n_params()).map(|_| rng.uniform_in(-scale, scale)).collect()
            }
        };
        self.params(theta).expect("finite initial parameters")
    }

    fn activation(&self) -> Activation {
        match &self.arch {
            Architecture::Linear => Activation::Identity,
            Architecture::Mlp { activation, .. } => *activation,
        }
    }

    /// Forward pass in plain arithmetic. Performs the same operations in
    /// the same order as [`QNetwork::eval_tape`].
    pub fn eval(&self, theta: &ParamVector, s: State) -> Vec<f64> {
        let th = theta.values();
        let phi = self.features.of(s);
        if self.arch == Architecture::Linear {
            let a_n = self.n_actions;
            return (0..a_n)
                .map(|a| dot_const(phi, (0..phi.len()).map(|i| th[i * a_n + a])))
                .collect();
        }
        let act = self.activation();
        let mut h: Vec<f64> = Vec::new();
        let mut offset = 0;
        for (l, &(n_in, n_out)) in self.shapes.iter().enumerate() {
            let (w, b) = (&th[offset..offset + n_in * n_out], &th[offset + n_in * n_out..offset + (n_in + 1) * n_out]);
            offset += (n_in + 1) * n_out;
            let last = l + 1 == self.shapes.len();
            h = (0..n_out)
                .map(|j| {
                    let col = (0..n_in).map(|i| w[i * n_out + j]);
                    let z = if l == 0 {
                        dot_const(phi, col)
                    } else {
                        sum(h.iter().zip(col).map(|(x, y)| x * y))
                    };
                    let z = z + b[j];
                    if last {
                        z
                    } else {
                        apply(act, z)
                    }
                })
                .collect();
        }
        h
    }

    /// Forward pass recorded on `tape`; `leaves` are the parameter leaves.
    pub fn eval_tape(&self, tape: &Tape, leaves: &[Var], s: State) -> Vec<Var> {
        let phi = self.features.of(s);
        if self.arch == Architecture::Linear {
            let a_n = self.n_actions;
            return (0..a_n)
                .map(|a| {
                    let col: Vec<Var> = (0..phi.len()).map(|i| leaves[i * a_n + a]).collect();
                    tape.dot_const(phi, &col)
                })
                .collect();
        }
        let act = self.activation();
        let mut h: Vec<Var> = Vec::new();
        let mut offset = 0;
        for (l, &(n_in, n_out)) in self.shapes.iter().enumerate() {
            let w = &leaves[offset..offset + n_in * n_out];
            let b = &leaves[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            let last = l + 1 == self.shapes.len();
            h = (0..n_out)
                .map(|j| {
                    let col: Vec<Var> = (0..n_in).map(|i| w[i * n_out + j]).collect();
                    let z = if l == 0 {
                        tape.dot_const(phi, &col)
                    } else {
                        let prods: Vec<Var> = h.iter().zip(&col).map(|(&x, &y)| tape.mul(x, y)).collect();
                        tape.sum(&prods)
                    };
                    let z = tape.add(z, b[j]);
                    match (last, act) {
                        (false, Activation::Tanh) => tape.tanh(z),
                        _ => z,
                    }
                })
                .collect();
        }
        h
    }

    /// The network evaluated at every state.
    pub fn table(&self, theta: &ParamVector) -> QTable {
        let rows: Vec<Vec<f64>> = (0..self.n_states()).map(|s| self.eval(theta, s)).collect();
        QTable::from_fn(self.n_states(), self.n_actions, |s, a| rows[s][a])
    }
}

fn apply(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Tanh => z.tanh(),
        Activation::Identity => z,
    }
}

fn sum(mut xs: impl Iterator<Item = f64>) -> f64 {
    match xs.next() {
        None => 0.0,
        Some(first) => xs.fold(first, |acc, x| acc + x),
    }
}

/// Plain counterpart of [`Tape::dot_const`].
fn dot_const(weights: &[f64], xs: impl Iterator<Item = f64>) -> f64 {
    sum(weights
        .iter()
        .zip(xs)
        .filter(|(w, _)| **w != 0.0)
        .map(|(&w, x)| if w == 1.0 { x } else { w * x }))
}
