//! A scalar reverse-mode tape.
//!
//! Each run builds its own [`Tape`]; there is no global state. Nodes record
//! their parents together with the local partial derivatives, so the
//! backward sweep is a single reverse pass over the node list.

use std::cell::RefCell;

/// A value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Var {
    idx: usize,
    val: f64,
}

impl Var {
    pub fn value(self) -> f64 {
        self.val
    }

    pub fn index(self) -> usize {
        self.idx
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [(usize, f64); 2],
    arity: u8,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, val: f64, parents: [(usize, f64); 2], arity: u8) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, arity });
        Var {
            idx: nodes.len() - 1,
            val,
        }
    }

    /// An input leaf.
    pub fn var(&self, val: f64) -> Var {
        self.push(val, [(0, 0.0); 2], 0)
    }

    pub fn vars(&self, vals: &[f64]) -> Vec<Var> {
        vals.iter().map(|&v| self.var(v)).collect()
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.push(a.val + b.val, [(a.idx, 1.0), (b.idx, 1.0)], 2)
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.push(a.val - b.val, [(a.idx, 1.0), (b.idx, -1.0)], 2)
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.push(a.val * b.val, [(a.idx, b.val), (b.idx, a.val)], 2)
    }

    /// `c·a` for a constant `c`.
    pub fn scale(&self, a: Var, c: f64) -> Var {
        self.push(c * a.val, [(a.idx, c), (0, 0.0)], 1)
    }

    /// `a + c` for a constant `c`.
    pub fn shift(&self, a: Var, c: f64) -> Var {
        self.push(a.val + c, [(a.idx, 1.0), (0, 0.0)], 1)
    }

    pub fn tanh(&self, a: Var) -> Var {
        let t = a.val.tanh();
        self.push(t, [(a.idx, 1.0 - t * t), (0, 0.0)], 1)
    }

    pub fn exp(&self, a: Var) -> Var {
        let e = a.val.exp();
        self.push(e, [(a.idx, e), (0, 0.0)], 1)
    }

    pub fn ln(&self, a: Var) -> Var {
        self.push(a.val.ln(), [(a.idx, 1.0 / a.val), (0, 0.0)], 1)
    }

    pub fn square(&self, a: Var) -> Var {
        self.push(a.val * a.val, [(a.idx, 2.0 * a.val), (0, 0.0)], 1)
    }

    /// Left fold of [`Tape::add`]; the empty sum is a fresh zero leaf.
    pub fn sum(&self, xs: &[Var]) -> Var {
        match xs.split_first() {
            None => self.var(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &x| self.add(acc, x)),
        }
    }

    /// `Σ w_i·x_i` for constant weights; zero weights are skipped.
    pub fn dot_const(&self, weights: &[f64], xs: &[Var]) -> Var {
        let terms: Vec<Var> = weights
            .iter()
            .zip(xs)
            .filter(|(w, _)| **w != 0.0)
            .map(|(&w, &x)| if w == 1.0 { x } else { self.scale(x, w) })
            .collect();
        self.sum(&terms)
    }

    /// `x_i − log Σ_j exp(x_j)`, with the maximum subtracted before
    /// exponentiating.
    pub fn log_softmax(&self, xs: &[Var]) -> Vec<Var> {
        let m = xs.iter().map(|x| x.val).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<Var> = xs.iter().map(|&x| self.exp(self.shift(x, -m))).collect();
        let lse = self.shift(self.ln(self.sum(&exps)), m);
        xs.iter().map(|&x| self.sub(x, lse)).collect()
    }

    /// Adjoints of every node with respect to `out`.
    pub fn backward(&self, out: Var) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[out.idx] = 1.0;
        for i in (0..=out.idx).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = nodes[i];
            for &(p, d) in &node.parents[..node.arity as usize] {
                adj[p] += g * d;
            }
        }
        adj
    }
}

/// Value and gradient of `f` at `theta`.
///
/// `f` receives a fresh tape and one leaf per coordinate of `theta`.
pub fn grad<E>(theta: &[f64], f: impl FnOnce(&Tape, &[Var]) -> Result<Var, E>) -> Result<(f64, Vec<f64>), E> {
    let tape = Tape::new();
    let leaves = tape.vars(theta);
    let out = f(&tape, &leaves)?;
    let adj = tape.backward(out);
    Ok((out.val, leaves.iter().map(|v| adj[v.idx]).collect()))
}

/// Central finite differences of `f` at `theta` with step `h`.
pub fn finite_difference(theta: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            x[i] = theta[i] + h;
            let up = f(&x);
            x[i] = theta[i] - h;
            let down = f(&x);
            x[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
