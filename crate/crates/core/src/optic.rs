//! Lenses, stochastic mixed optics, and the continuation functor `K`.
//!
//! An optic `(X/X') -> (Y/Y')` runs forwards from `X` to `Y`, keeps a residual,
//! and runs backwards from `Y'` to `X'`. `K` turns an optic into a map on
//! continuations: given `k : Y -> Y'` it yields `X -> X'` by running forwards,
//! applying `k`, and running backwards. This is how Bellman operators arise
//! from Bellman optics.
//!
//! Residuals are explicit type parameters; optics are only ever compared
//! extensionally through `K`.

use std::sync::Arc;

use crate::dist::FiniteDist;

/// A (deterministic) continuation `Y -> Y'`.
pub type Continuation<Y, Yb> = Arc<dyn Fn(&Y) -> Yb + Send + Sync>;

/// Wrap a closure as a shareable [`Continuation`].
pub fn continuation<Y, Yb, F>(f: F) -> Continuation<Y, Yb>
where
    F: Fn(&Y) -> Yb + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Spaces closed under finite convex combinations.
///
/// Backward objects of stochastic optics live here: the backward pass of a
/// composite averages over the residual of the first stage.
pub trait Convex: Clone {
    /// `Σ wᵢ·xᵢ` for a non-empty list whose weights sum to one.
    fn mix(terms: Vec<(f64, Self)>) -> Self;
}

impl Convex for f64 {
    fn mix(terms: Vec<(f64, Self)>) -> Self {
        terms.into_iter().map(|(w, x)| w * x).sum()
    }
}

impl Convex for () {
    fn mix(_: Vec<(f64, Self)>) -> Self {}
}

impl Convex for Vec<f64> {
    fn mix(terms: Vec<(f64, Self)>) -> Self {
        let mut it = terms.into_iter();
        let (w0, x0) = it.next().expect("convex combination of nothing");
        let mut acc: Vec<f64> = x0.into_iter().map(|x| w0 * x).collect();
        for (w, x) in it {
            assert_eq!(x.len(), acc.len(), "mixing vectors of different length");
            for (a, b) in acc.iter_mut().zip(x) {
                *a += w * b;
            }
        }
        acc
    }
}

impl<A: Convex, B: Convex> Convex for (A, B) {
    fn mix(terms: Vec<(f64, Self)>) -> Self {
        let (left, right): (Vec<_>, Vec<_>) =
            terms.into_iter().map(|(w, (a, b))| ((w, a), (w, b))).unzip();
        (A::mix(left), B::mix(right))
    }
}

/// A lens `(X/X') -> (Y/Y')`: `get : X -> Y` and `put : X × Y' -> X'`.
pub struct Lens<X, Xb, Y, Yb> {
    get: Arc<dyn Fn(&X) -> Y + Send + Sync>,
    put: Arc<dyn Fn(&X, Yb) -> Xb + Send + Sync>,
}

impl<X, Xb, Y, Yb> Clone for Lens<X, Xb, Y, Yb> {
    fn clone(&self) -> Self {
        Self {
            get: Arc::clone(&self.get),
            put: Arc::clone(&self.put),
        }
    }
}

impl<X: 'static, Xb: 'static, Y: 'static, Yb: 'static> Lens<X, Xb, Y, Yb> {
    pub fn new<G, P>(get: G, put: P) -> Self
    where
        G: Fn(&X) -> Y + Send + Sync + 'static,
        P: Fn(&X, Yb) -> Xb + Send + Sync + 'static,
    {
        Self {
            get: Arc::new(get),
            put: Arc::new(put),
        }
    }

    pub fn get(&self, x: &X) -> Y {
        (self.get)(x)
    }

    pub fn put(&self, x: &X, yb: Yb) -> Xb {
        (self.put)(x, yb)
    }

    /// Sequential composition `self ; next`.
    pub fn then<Z: 'static, Zb: 'static>(&self, next: &Lens<Y, Yb, Z, Zb>) -> Lens<X, Xb, Z, Zb> {
        let (g1, p1) = (Arc::clone(&self.get), Arc::clone(&self.put));
        let (g2, p2) = (Arc::clone(&next.get), Arc::clone(&next.put));
        let g1b = Arc::clone(&g1);
        Lens::new(
            move |x| g2(&g1(x)),
            move |x, zb| {
                let y = g1b(x);
                p1(x, p2(&y, zb))
            },
        )
    }

    /// `K(self)(k) = x ↦ put(x, k(get(x)))`.
    pub fn apply_continuation(&self, x: &X, k: impl Fn(&Y) -> Yb) -> Xb {
        self.put(x, k(&self.get(x)))
    }

    /// `K(self)` applied to a shareable continuation, returning another one.
    pub fn continuation(&self, k: Continuation<Y, Yb>) -> Continuation<X, Xb> {
        let lens = self.clone();
        Arc::new(move |x| lens.apply_continuation(x, |y| k(y)))
    }

    /// Parallel composition over pairwise products.
    pub fn tensor<X2, Xb2, Y2, Yb2>(
        &self,
        other: &Lens<X2, Xb2, Y2, Yb2>,
    ) -> Lens<(X, X2), (Xb, Xb2), (Y, Y2), (Yb, Yb2)>
    where
        X2: 'static,
        Xb2: 'static,
        Y2: 'static,
        Yb2: 'static,
    {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        Lens::new(
            move |(x1, x2): &(X, X2)| (a.get(x1), b.get(x2)),
            move |(x1, x2): &(X, X2), (y1, y2): (Yb, Yb2)| (a2.put(x1, y1), b2.put(x2, y2)),
        )
    }
}

impl<X: Clone + 'static, Xb: 'static> Lens<X, Xb, X, Xb> {
    pub fn identity() -> Self {
        Lens::new(|x: &X| x.clone(), |_, xb| xb)
    }
}

/// The lens on the monoidal unit.
pub fn unit_lens() -> Lens<(), (), (), ()> {
    Lens::identity()
}

/// A mixed optic in the Kleisli category of [`FiniteDist`].
///
/// `forward : X -> D(M × Y)` produces a residual `M` alongside `Y`;
/// `backward : D(M) × Y' -> X'` consumes a distribution over residuals. `Y'`
/// and `X'` are convex spaces, so continuations lift through expectation.
pub struct StochOptic<X, Xb, Y, Yb, M> {
    forward: Arc<dyn Fn(&X) -> FiniteDist<(M, Y)> + Send + Sync>,
    backward: Arc<dyn Fn(&FiniteDist<M>, Yb) -> Xb + Send + Sync>,
}

impl<X, Xb, Y, Yb, M> Clone for StochOptic<X, Xb, Y, Yb, M> {
    fn clone(&self) -> Self {
        Self {
            forward: Arc::clone(&self.forward),
            backward: Arc::clone(&self.backward),
        }
    }
}

impl<X, Xb, Y, Yb, M> StochOptic<X, Xb, Y, Yb, M>
where
    X: 'static,
    Xb: 'static,
    Y: Clone + PartialEq + 'static,
    Yb: 'static,
    M: Clone + PartialEq + 'static,
{
    pub fn new<F, B>(forward: F, backward: B) -> Self
    where
        F: Fn(&X) -> FiniteDist<(M, Y)> + Send + Sync + 'static,
        B: Fn(&FiniteDist<M>, Yb) -> Xb + Send + Sync + 'static,
    {
        Self {
            forward: Arc::new(forward),
            backward: Arc::new(backward),
        }
    }

    pub fn forward(&self, x: &X) -> FiniteDist<(M, Y)> {
        (self.forward)(x)
    }

    pub fn backward(&self, residual: &FiniteDist<M>, yb: Yb) -> Xb {
        (self.backward)(residual, yb)
    }

    /// `K(self)(k)` in convex-combination form:
    /// `x ↦ Σ p(m, y) · backward(δ_m, k(y))`.
    pub fn apply_continuation(&self, x: &X, k: impl Fn(&Y) -> Yb) -> Xb
    where
        Xb: Convex,
    {
        let terms = self
            .forward(x)
            .iter()
            .map(|((m, y), p)| (p, self.backward(&FiniteDist::dirac(m.clone()), k(y))))
            .collect();
        Xb::mix(terms)
    }

    /// `K(self)(k)` in marginal form: `x ↦ backward(marginal_M, E[k(y)])`.
    ///
    /// Agrees with [`apply_continuation`](Self::apply_continuation) whenever
    /// the backward pass is affine in both arguments, as for Bellman optics.
    pub fn apply_continuation_marginal(&self, x: &X, k: impl Fn(&Y) -> Yb) -> Xb
    where
        Yb: Convex,
    {
        let joint = self.forward(x);
        let expected = Yb::mix(joint.iter().map(|((_, y), p)| (p, k(y))).collect());
        self.backward(&joint.marginal_first(), expected)
    }

    pub fn continuation(&self, k: Continuation<Y, Yb>) -> Continuation<X, Xb>
    where
        Xb: Convex,
    {
        let optic = self.clone();
        Arc::new(move |x| optic.apply_continuation(x, |y| k(y)))
    }

    /// Sequential composition with residual `M × N`.
    ///
    /// The backward pass disintegrates the joint residual, runs `next`
    /// backwards on each conditional, and mixes the results of `self`'s
    /// backward pass over the first marginal.
    pub fn then<Z, Zb, N>(&self, next: &StochOptic<Y, Yb, Z, Zb, N>) -> StochOptic<X, Xb, Z, Zb, (M, N)>
    where
        Xb: Convex,
        Z: Clone + PartialEq + 'static,
        Zb: Clone + 'static,
        N: Clone + PartialEq + 'static,
    {
        let (f1, b1) = (Arc::clone(&self.forward), Arc::clone(&self.backward));
        let (f2, b2) = (Arc::clone(&next.forward), Arc::clone(&next.backward));
        StochOptic::new(
            move |x| {
                f1(x).bind(|(m, y)| f2(y).map(|(n, z)| ((m.clone(), n.clone()), z.clone())))
            },
            move |residual: &FiniteDist<(M, N)>, zb: Zb| {
                let (outer, inner) = residual.marginal_and_condition();
                let terms = outer
                    .iter()
                    .map(|(m, p)| {
                        let cond = inner.at(m).expect("marginal atom has a conditional");
                        let yb = b2(cond, zb.clone());
                        (p, b1(&FiniteDist::dirac(m.clone()), yb))
                    })
                    .collect();
                Xb::mix(terms)
            },
        )
    }
}

impl<X: Clone + PartialEq + 'static, Xb: 'static> StochOptic<X, Xb, X, Xb, ()> {
    pub fn identity() -> Self {
        StochOptic::new(|x: &X| FiniteDist::dirac(((), x.clone())), |_, xb| xb)
    }
}

impl<X, Xb, Y, Yb> StochOptic<X, Xb, Y, Yb, X>
where
    X: Clone + PartialEq + 'static,
    Xb: Convex + 'static,
    Y: Clone + PartialEq + 'static,
    Yb: Clone + 'static,
{
    /// Embed a lens as a deterministic optic whose residual is the input.
    pub fn from_lens(lens: &Lens<X, Xb, Y, Yb>) -> Self {
        let (l1, l2) = (lens.clone(), lens.clone());
        StochOptic::new(
            move |x: &X| FiniteDist::dirac((x.clone(), l1.get(x))),
            move |residual: &FiniteDist<X>, yb: Yb| {
                Xb::mix(residual.iter().map(|(x, p)| (p, l2.put(x, yb.clone()))).collect())
            },
        )
    }
}
