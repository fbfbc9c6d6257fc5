//! Externally parametrised lenses.
//!
//! A [`ParaLens`] has a forward pass `P × X -> Y` and a backward pass
//! `P × X × Y' -> X'`. Composites pair their parameters, reparametrisation
//! precomposes a map on parameters, and [`ParaLens::para_k`] lifts the
//! continuation functor so a parametrised lens becomes a parametrised function
//! of continuations.

use std::sync::Arc;

use crate::optic::{Continuation, Lens};

pub struct ParaLens<P, X, Xb, Y, Yb> {
    forward: Arc<dyn Fn(&P, &X) -> Y + Send + Sync>,
    backward: Arc<dyn Fn(&P, &X, Yb) -> Xb + Send + Sync>,
}

impl<P, X, Xb, Y, Yb> Clone for ParaLens<P, X, Xb, Y, Yb> {
    fn clone(&self) -> Self {
        Self {
            forward: Arc::clone(&self.forward),
            backward: Arc::clone(&self.backward),
        }
    }
}

/// A parametrised function `P × A -> B`.
pub struct ParaFn<P, A, B> {
    apply: Arc<dyn Fn(&P, &A) -> B + Send + Sync>,
}

impl<P, A, B> Clone for ParaFn<P, A, B> {
    fn clone(&self) -> Self {
        Self {
            apply: Arc::clone(&self.apply),
        }
    }
}

impl<P, A, B> ParaFn<P, A, B> {
    pub fn new(f: impl Fn(&P, &A) -> B + Send + Sync + 'static) -> Self {
        Self { apply: Arc::new(f) }
    }

    pub fn apply(&self, p: &P, a: &A) -> B {
        (self.apply)(p, a)
    }
}

impl<P, X, Xb, Y, Yb> ParaLens<P, X, Xb, Y, Yb>
where
    P: 'static,
    X: 'static,
    Xb: 'static,
    Y: 'static,
    Yb: 'static,
{
    pub fn new<F, B>(forward: F, backward: B) -> Self
    where
        F: Fn(&P, &X) -> Y + Send + Sync + 'static,
        B: Fn(&P, &X, Yb) -> Xb + Send + Sync + 'static,
    {
        Self {
            forward: Arc::new(forward),
            backward: Arc::new(backward),
        }
    }

    /// A lens viewed as trivially parametrised.
    pub fn from_lens(lens: Lens<X, Xb, Y, Yb>) -> ParaLens<(), X, Xb, Y, Yb> {
        let l2 = lens.clone();
        ParaLens::new(move |_, x| lens.get(x), move |_, x, yb| l2.put(x, yb))
    }

    pub fn forward(&self, p: &P, x: &X) -> Y {
        (self.forward)(p, x)
    }

    pub fn backward(&self, p: &P, x: &X, yb: Yb) -> Xb {
        (self.backward)(p, x, yb)
    }

    /// Fix the parameter, leaving an ordinary lens.
    pub fn at(&self, p: P) -> Lens<X, Xb, Y, Yb>
    where
        P: Clone + Send + Sync,
    {
        let (f, b) = (Arc::clone(&self.forward), Arc::clone(&self.backward));
        let q = p.clone();
        Lens::new(move |x| f(&p, x), move |x, yb| b(&q, x, yb))
    }

    /// Composite `self ; next` with parameter `(Q, P)`.
    pub fn then<Q, Z, Zb>(&self, next: &ParaLens<Q, Y, Yb, Z, Zb>) -> ParaLens<(Q, P), X, Xb, Z, Zb>
    where
        Q: 'static,
        Z: 'static,
        Zb: 'static,
    {
        let (f1, b1) = (Arc::clone(&self.forward), Arc::clone(&self.backward));
        let (f2, b2) = (Arc::clone(&next.forward), Arc::clone(&next.backward));
        let f1b = Arc::clone(&f1);
        ParaLens::new(
            move |(q, p): &(Q, P), x| f2(q, &f1(p, x)),
            move |(q, p): &(Q, P), x, zb| {
                let y = f1b(p, x);
                b1(p, x, b2(q, &y, zb))
            },
        )
    }

    /// Precompose the parameter with `h : Q -> P`.
    pub fn reparametrise<Q: 'static>(
        &self,
        h: impl Fn(&Q) -> P + Send + Sync + 'static,
    ) -> ParaLens<Q, X, Xb, Y, Yb> {
        let (f, b) = (Arc::clone(&self.forward), Arc::clone(&self.backward));
        let h = Arc::new(h);
        let h2 = Arc::clone(&h);
        ParaLens::new(move |q, x| f(&h(q), x), move |q, x, yb| b(&h2(q), x, yb))
    }

    /// `Para(K)(self)(p, x, k) = backward(p, x, k(forward(p, x)))`.
    pub fn apply_continuation(&self, p: &P, x: &X, k: impl Fn(&Y) -> Yb) -> Xb {
        self.backward(p, x, k(&self.forward(p, x)))
    }

    /// The lifted continuation functor as a parametrised function of
    /// `(x, k)` pairs.
    pub fn para_k(&self) -> ParaFn<P, (X, Continuation<Y, Yb>), Xb> {
        let lens = self.clone();
        ParaFn::new(move |p, (x, k): &(X, Continuation<Y, Yb>)| {
            lens.apply_continuation(p, x, |y| k(y))
        })
    }
}

impl<X: Clone + 'static, Xb: 'static> ParaLens<(), X, Xb, X, Xb> {
    pub fn identity() -> Self {
        ParaLens::new(|_, x: &X| x.clone(), |_, _, xb| xb)
    }
}
