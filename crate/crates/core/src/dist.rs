//! Finite-support probability distributions.
//!
//! `FiniteDist` is the probability monad used by every stochastic part of the
//! crate: transition kernels, policies, forward passes of stochastic optics and
//! initial states of iterations. Supports are kept in first-occurrence order
//! with equal values merged, so two runs that build the same distribution in the
//! same way see identical supports and identical inverse-CDF samples.

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Absolute tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability distribution with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist<T> {
    atoms: Vec<(T, f64)>,
}

impl<T: Clone + PartialEq> FiniteDist<T> {
    /// Point mass at `x`.
    pub fn dirac(x: T) -> Self {
        Self { atoms: vec![(x, 1.0)] }
    }

    /// Build from `(value, weight)` pairs that already sum to one.
    ///
    /// Zero weights are dropped and repeated values merged. Negative or
    /// non-finite weights, an empty support, or a total mass off by more than
    /// [`MASS_TOLERANCE`] are rejected.
    pub fn new(pairs: impl IntoIterator<Item = (T, f64)>) -> Result<Self> {
        let mut atoms: Vec<(T, f64)> = Vec::new();
        for (x, w) in pairs {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Domain(format!("invalid weight {w}")));
            }
            push_merge(&mut atoms, x, w);
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if atoms.is_empty() {
            return Err(Error::Domain("empty support".into()));
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    /// Build from unnormalised non-negative weights.
    pub fn from_weights(pairs: impl IntoIterator<Item = (T, f64)>) -> Result<Self> {
        let pairs: Vec<(T, f64)> = pairs.into_iter().collect();
        if pairs.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("weights must be finite and non-negative".into()));
        }
        let total: f64 = pairs.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::Domain("weights sum to zero".into()));
        }
        Self::new(pairs.into_iter().map(|(x, w)| (x, w / total)))
    }

    /// Uniform over `values` (duplicates accumulate mass).
    pub fn uniform(values: impl IntoIterator<Item = T>) -> Result<Self> {
        Self::from_weights(values.into_iter().map(|x| (x, 1.0)))
    }

    pub fn atoms(&self) -> &[(T, f64)] {
        &self.atoms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.atoms.iter().map(|(x, w)| (x, *w))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_dirac(&self) -> bool {
        self.atoms.len() == 1
    }

    /// Mass assigned to `x` (zero outside the support).
    pub fn prob(&self, x: &T) -> f64 {
        self.atoms
            .iter()
            .find(|(y, _)| y == x)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Kleisli extension: draw `x`, then draw from `k(x)`.
    pub fn bind<U, F>(&self, mut k: F) -> FiniteDist<U>
    where
        U: Clone + PartialEq,
        F: FnMut(&T) -> FiniteDist<U>,
    {
        let mut atoms: Vec<(U, f64)> = Vec::new();
        for (x, w) in &self.atoms {
            for (y, v) in k(x).atoms {
                push_merge(&mut atoms, y, w * v);
            }
        }
        FiniteDist { atoms }
    }

    /// Functor action of the monad (image measure).
    pub fn map<U, F>(&self, mut f: F) -> FiniteDist<U>
    where
        U: Clone + PartialEq,
        F: FnMut(&T) -> U,
    {
        let mut atoms: Vec<(U, f64)> = Vec::new();
        for (x, w) in &self.atoms {
            push_merge(&mut atoms, f(x), *w);
        }
        FiniteDist { atoms }
    }

    /// Independent product.
    pub fn product<U: Clone + PartialEq>(&self, other: &FiniteDist<U>) -> FiniteDist<(T, U)> {
        self.bind(|x| other.map(|y| (x.clone(), y.clone())))
    }

    /// `E[f(X)]`.
    pub fn expect<F: FnMut(&T) -> f64>(&self, mut f: F) -> f64 {
        self.atoms.iter().map(|(x, w)| w * f(x)).sum()
    }

    /// Inverse-CDF lookup for a given uniform `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> &T {
        let mut acc = 0.0;
        for (x, w) in &self.atoms {
            acc += w;
            if u < acc {
                return x;
            }
        }
        // u lands in the rounding gap above the accumulated mass
        &self.atoms[self.atoms.len() - 1].0
    }

    /// Draw one value. Always consumes exactly one uniform, even for a point mass.
    pub fn sample(&self, rng: &mut RngState) -> T {
        let u = rng.uniform();
        self.quantile(u).clone()
    }

    /// Order-insensitive comparison of supports and weights.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let covers = |a: &Self, b: &Self| {
            a.atoms
                .iter()
                .all(|(x, w)| (b.prob(x) - w).abs() <= tol)
        };
        covers(self, other) && covers(other, self)
    }
}

impl FiniteDist<f64> {
    /// Mean of a real-valued distribution.
    pub fn expectation(&self) -> f64 {
        self.expect(|x| *x)
    }
}

impl<M: Clone + PartialEq, T: Clone + PartialEq> FiniteDist<(M, T)> {
    /// Disintegrate a joint into its first marginal and the conditional of the
    /// second component given the first.
    pub fn marginal_and_condition(&self) -> (FiniteDist<M>, Conditional<M, T>) {
        let marginal = self.map(|(m, _)| m.clone());
        let mut branches: Vec<(M, Vec<(T, f64)>)> = Vec::new();
        for ((m, t), w) in &self.atoms {
            match branches.iter_mut().find(|(k, _)| k == m) {
                Some((_, atoms)) => push_merge(atoms, t.clone(), *w),
                None => branches.push((m.clone(), vec![(t.clone(), *w)])),
            }
        }
        let branches = branches
            .into_iter()
            .map(|(m, atoms)| {
                let mass = marginal.prob(&m);
                let atoms = atoms.into_iter().map(|(t, w)| (t, w / mass)).collect();
                (m, FiniteDist { atoms })
            })
            .collect();
        (marginal, Conditional { branches })
    }

    pub fn marginal_first(&self) -> FiniteDist<M> {
        self.map(|(m, _)| m.clone())
    }

    pub fn marginal_second(&self) -> FiniteDist<T> {
        self.map(|(_, t)| t.clone())
    }
}

/// Conditional distributions indexed by the values of a marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional<M, T> {
    branches: Vec<(M, FiniteDist<T>)>,
}

impl<M: PartialEq, T: Clone> Conditional<M, T> {
    /// The conditional at `m`; `Error::Domain` outside the marginal support.
    pub fn at(&self, m: &M) -> Result<&FiniteDist<T>> {
        self.branches
            .iter()
            .find(|(k, _)| k == m)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::Domain("conditional queried outside the marginal support".into()))
    }
}

fn push_merge<T: PartialEq>(atoms: &mut Vec<(T, f64)>, x: T, w: f64) {
    if w == 0.0 {
        return;
    }
    match atoms.iter_mut().find(|(y, _)| *y == x) {
        Some((_, acc)) => *acc += w,
        None => atoms.push((x, w)),
    }
}
