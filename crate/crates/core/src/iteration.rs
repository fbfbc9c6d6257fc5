//! The iteration functor, its streams, and environment combs.
//!
//! An [`IterationData`] on `(X/X')` is a state space `M`, an initial state in
//! `D(M × X)` and an iterator `M × X' -> M × X`. Mapping it along an optic
//! `(X/X') -> (Y/Y')` threads the optic's residual through the state space.
//! Closing it with a continuation `k : X -> X'` gives a stream
//! `x₀, x₁, …` where `xₜ₊₁` comes from feeding `k(xₜ)` to the iterator.
//!
//! Streams are produced as finite prefixes of explicit length. Random draws are
//! threaded through an explicit [`RngState`] in step order.

use std::sync::Arc;

use crate::dist::FiniteDist;
use crate::optic::{Lens, StochOptic};
use crate::rng::RngState;

type Iterator_<M, X, Xb> = Arc<dyn Fn(&M, Xb, &mut RngState) -> (M, X) + Send + Sync>;

/// An element of `I(X/X')`.
pub struct IterationData<M, X, Xb> {
    initial: FiniteDist<(M, X)>,
    iterator: Iterator_<M, X, Xb>,
}

impl<M: Clone, X: Clone, Xb> Clone for IterationData<M, X, Xb> {
    fn clone(&self) -> Self {
        Self {
            initial: self.initial.clone(),
            iterator: Arc::clone(&self.iterator),
        }
    }
}

impl<M, X, Xb> IterationData<M, X, Xb>
where
    M: Clone + PartialEq + 'static,
    X: Clone + PartialEq + 'static,
    Xb: 'static,
{
    pub fn new<F>(initial: FiniteDist<(M, X)>, iterator: F) -> Self
    where
        F: Fn(&M, Xb, &mut RngState) -> (M, X) + Send + Sync + 'static,
    {
        Self {
            initial,
            iterator: Arc::new(iterator),
        }
    }

    /// Iteration with a deterministic initial state.
    pub fn from_state<F>(m0: M, x0: X, iterator: F) -> Self
    where
        F: Fn(&M, Xb, &mut RngState) -> (M, X) + Send + Sync + 'static,
    {
        Self::new(FiniteDist::dirac((m0, x0)), iterator)
    }

    pub fn initial(&self) -> &FiniteDist<(M, X)> {
        &self.initial
    }

    /// Draw the initial state. A point mass is taken without consuming a draw.
    pub fn start(&self, rng: &mut RngState) -> (M, X) {
        draw(&self.initial, rng)
    }

    pub fn step(&self, m: &M, xb: Xb, rng: &mut RngState) -> (M, X) {
        (self.iterator)(m, xb, rng)
    }

    /// `⟨k | self⟩` truncated to `n` elements.
    pub fn run_stream(&self, k: impl Fn(&X) -> Xb, n: usize, rng: &mut RngState) -> Vec<X> {
        self.run_stream_with(|x, _| k(x), n, rng)
    }

    /// Like [`run_stream`](Self::run_stream), but the continuation may draw
    /// from the shared random state and keep its own state between calls.
    pub fn run_stream_with(
        &self,
        mut k: impl FnMut(&X, &mut RngState) -> Xb,
        n: usize,
        rng: &mut RngState,
    ) -> Vec<X> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        self.run_until(
            |x, rng| {
                out.push(x.clone());
                (out.len() < n).then(|| k(x, rng))
            },
            rng,
        );
        out
    }

    /// Drive the stream with a continuation that may halt.
    ///
    /// `k` sees every emitted element in order; returning `None` ends the run
    /// before the iterator is stepped again. Returns the final state.
    pub fn run_until(
        &self,
        mut k: impl FnMut(&X, &mut RngState) -> Option<Xb>,
        rng: &mut RngState,
    ) -> (M, X) {
        let (mut m, mut x) = self.start(rng);
        while let Some(xb) = k(&x, rng) {
            (m, x) = self.step(&m, xb, rng);
        }
        (m, x)
    }

    /// `I(f)` for a lens `f`: the residual (the lens input) joins the state.
    pub fn map_lens<Y, Yb>(&self, f: &Lens<X, Xb, Y, Yb>) -> IterationData<(M, X), Y, Yb>
    where
        Y: Clone + PartialEq + 'static,
        Yb: 'static,
    {
        let init = self.initial.map(|(m, x)| ((m.clone(), x.clone()), f.get(x)));
        let it = Arc::clone(&self.iterator);
        let f = f.clone();
        IterationData::new(init, move |(m, residual): &(M, X), yb: Yb, rng: &mut RngState| {
            let xb = f.put(residual, yb);
            let (m2, x2) = it(m, xb, rng);
            let y = f.get(&x2);
            ((m2, x2), y)
        })
    }

    /// `I(f)` for a stochastic optic `f`.
    ///
    /// After each iterator step the forward pass is sampled (one draw unless it
    /// is a point mass), so deterministic optics consume no randomness.
    pub fn map_optic<Y, Yb, N>(&self, f: &StochOptic<X, Xb, Y, Yb, N>) -> IterationData<(M, N), Y, Yb>
    where
        Y: Clone + PartialEq + 'static,
        Yb: 'static,
        N: Clone + PartialEq + 'static,
    {
        let init = self
            .initial
            .bind(|(m, x)| f.forward(x).map(|(n, y)| ((m.clone(), n.clone()), y.clone())));
        let it = Arc::clone(&self.iterator);
        let f = f.clone();
        IterationData::new(init, move |(m, n): &(M, N), yb: Yb, rng: &mut RngState| {
            let xb = f.backward(&FiniteDist::dirac(n.clone()), yb);
            let (m2, x2) = it(m, xb, rng);
            let (n2, y) = draw(&f.forward(&x2), rng);
            ((m2, n2), y)
        })
    }

    /// The laxator: run two iterations side by side. Each step advances the
    /// left component first.
    pub fn laxator<M2, Y, Yb>(
        &self,
        other: &IterationData<M2, Y, Yb>,
    ) -> IterationData<(M, M2), (X, Y), (Xb, Yb)>
    where
        M2: Clone + PartialEq + 'static,
        Y: Clone + PartialEq + 'static,
        Yb: 'static,
    {
        let init = self
            .initial
            .product(&other.initial)
            .map(|((m1, x), (m2, y))| ((m1.clone(), m2.clone()), (x.clone(), y.clone())));
        let (i1, i2) = (Arc::clone(&self.iterator), Arc::clone(&other.iterator));
        IterationData::new(init, move |(m1, m2): &(M, M2), (xb, yb): (Xb, Yb), rng: &mut RngState| {
            let (n1, x) = i1(m1, xb, rng);
            let (n2, y) = i2(m2, yb, rng);
            ((n1, n2), (x, y))
        })
    }
}

fn draw<T: Clone + PartialEq>(d: &FiniteDist<T>, rng: &mut RngState) -> T {
    if d.is_dirac() {
        d.atoms()[0].0.clone()
    } else {
        d.sample(rng)
    }
}

/// An agent plugged into an environment comb: a possibly stochastic forward
/// pass and a deterministic backward pass that sees its own output.
pub trait Agent<X, Xb, Y, Yb> {
    fn act(&self, x: &X, rng: &mut RngState) -> Y;
    fn feedback(&self, x: &X, y: &Y, yb: Yb) -> Xb;
}

impl<X: 'static, Xb: 'static, Y: 'static, Yb: 'static> Agent<X, Xb, Y, Yb> for Lens<X, Xb, Y, Yb> {
    fn act(&self, x: &X, _rng: &mut RngState) -> Y {
        self.get(x)
    }

    fn feedback(&self, x: &X, _y: &Y, yb: Yb) -> Xb {
        self.put(x, yb)
    }
}

/// Agent built from closures.
pub struct FnAgent<A, F> {
    pub act: A,
    pub feedback: F,
}

impl<X, Xb, Y, Yb, A, F> Agent<X, Xb, Y, Yb> for FnAgent<A, F>
where
    A: Fn(&X, &mut RngState) -> Y,
    F: Fn(&X, &Y, Yb) -> Xb,
{
    fn act(&self, x: &X, rng: &mut RngState) -> Y {
        (self.act)(x, rng)
    }

    fn feedback(&self, x: &X, y: &Y, yb: Yb) -> Xb {
        (self.feedback)(x, y, yb)
    }
}

type Cont<M, Mp, Y, Yb> = Arc<dyn Fn(&M, &Y, &mut RngState) -> (Mp, Yb) + Send + Sync>;
type Step<M, Mp, X, Xb> = Arc<dyn Fn(&Mp, Xb, &mut RngState) -> (M, X) + Send + Sync>;

/// A 3-hole comb environment for agents `(X/X') -> (Y/Y')`.
///
/// `M` is the state carried from `step` to `continuation`, `Mp` the state
/// carried from `continuation` to `step`.
pub struct EnvComb<M, Mp, X, Xb, Y, Yb> {
    init: FiniteDist<(M, X)>,
    continuation: Cont<M, Mp, Y, Yb>,
    step: Step<M, Mp, X, Xb>,
}

impl<M: Clone, Mp, X: Clone, Xb, Y, Yb> Clone for EnvComb<M, Mp, X, Xb, Y, Yb> {
    fn clone(&self) -> Self {
        Self {
            init: self.init.clone(),
            continuation: Arc::clone(&self.continuation),
            step: Arc::clone(&self.step),
        }
    }
}

/// One step of a closed agent–environment loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopStep<X, Y, Yb, Xb> {
    pub observation: X,
    pub action: Y,
    pub feedback: Yb,
    pub response: Xb,
}

impl<M, Mp, X, Xb, Y, Yb> EnvComb<M, Mp, X, Xb, Y, Yb>
where
    M: Clone + PartialEq + 'static,
    X: Clone + PartialEq + 'static,
{
    pub fn new<C, S>(init: FiniteDist<(M, X)>, continuation: C, step: S) -> Self
    where
        C: Fn(&M, &Y, &mut RngState) -> (Mp, Yb) + Send + Sync + 'static,
        S: Fn(&Mp, Xb, &mut RngState) -> (M, X) + Send + Sync + 'static,
    {
        Self {
            init,
            continuation: Arc::new(continuation),
            step: Arc::new(step),
        }
    }

    /// Draw the initial comb state. Always consumes one draw.
    pub fn start(&self, rng: &mut RngState) -> (M, X) {
        self.init.sample(rng)
    }

    pub fn respond(&self, m: &M, y: &Y, rng: &mut RngState) -> (Mp, Yb) {
        (self.continuation)(m, y, rng)
    }

    pub fn advance(&self, mp: &Mp, xb: Xb, rng: &mut RngState) -> (M, X) {
        (self.step)(mp, xb, rng)
    }

    /// Run `agent` in this comb for `n` steps.
    ///
    /// Draw order per step: agent action, environment continuation,
    /// environment step; the initial state is drawn once up front.
    pub fn run_loop<A>(&self, agent: &A, n: usize, rng: &mut RngState) -> Vec<LoopStep<X, Y, Yb, Xb>>
    where
        A: Agent<X, Xb, Y, Yb>,
        Y: Clone,
        Yb: Clone,
        Xb: Clone,
    {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let (mut m, mut x) = self.start(rng);
        for _ in 0..n {
            let y = agent.act(&x, rng);
            let (mp, yb) = self.respond(&m, &y, rng);
            let xb = agent.feedback(&x, &y, yb.clone());
            let (m2, x2) = self.advance(&mp, xb.clone(), rng);
            out.push(LoopStep {
                observation: x,
                action: y,
                feedback: yb,
                response: xb,
            });
            (m, x) = (m2, x2);
        }
        out
    }
}
