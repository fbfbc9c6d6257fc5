//! Dynamic programming: policy evaluation and the three fixpoint schedules
//! built from `value_improve` and `policy_improve`.

use crate::bellman::{policy_improve, value_improve, ValueFn};
use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};

/// Sweep cap for every solver here.
pub const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub value: ValueFn,
    /// Greedy with respect to `value`.
    pub policy: Policy,
    /// Value sweeps performed.
    pub sweeps: usize,
    /// The value function after every sweep.
    pub history: Vec<ValueFn>,
}

fn check(mdp: &Mdp, tol: f64) -> Result<()> {
    mdp.require_discounted()?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

/// Iterate `B_π` from `V = 0` until successive iterates are within `tol`.
pub fn policy_evaluation(mdp: &Mdp, pi: &Policy, tol: f64) -> Result<ValueFn> {
    policy_evaluation_capped(mdp, pi, tol, MAX_SWEEPS)
}

pub fn policy_evaluation_capped(mdp: &Mdp, pi: &Policy, tol: f64, cap: usize) -> Result<ValueFn> {
    check(mdp, tol)?;
    evaluate(mdp, pi, ValueFn::zeros(mdp.n_states()), tol, cap, &mut 0, &mut Vec::new())
}

fn evaluate(
    mdp: &Mdp,
    pi: &Policy,
    mut v: ValueFn,
    tol: f64,
    cap: usize,
    sweeps: &mut usize,
    history: &mut Vec<ValueFn>,
) -> Result<ValueFn> {
    loop {
        let next = value_improve(mdp, pi, &v);
        *sweeps += 1;
        let residual = next.distance(&v);
        history.push(next.clone());
        if residual < tol {
            return Ok(next);
        }
        if *sweeps >= cap {
            return Err(Error::NonConvergence { sweeps: *sweeps, residual });
        }
        v = next;
    }
}

/// Evaluate the current policy to tolerance, improve, repeat until the
/// policy is stable. Starts from the policy choosing action 0 everywhere.
pub fn policy_iteration(mdp: &Mdp, tol: f64) -> Result<DpSolution> {
    policy_iteration_capped(mdp, tol, MAX_SWEEPS)
}

pub fn policy_iteration_capped(mdp: &Mdp, tol: f64, cap: usize) -> Result<DpSolution> {
    check(mdp, tol)?;
    let mut pi = Policy::Deterministic(vec![0; mdp.n_states()]);
    let mut v = ValueFn::zeros(mdp.n_states());
    let mut sweeps = 0;
    let mut history = Vec::new();
    loop {
        v = evaluate(mdp, &pi, v, tol, cap, &mut sweeps, &mut history)?;
        let next = policy_improve(mdp, &v);
        if next == pi {
            return Ok(DpSolution {
                value: v,
                policy: next,
                sweeps,
                history,
            });
        }
        pi = next;
    }
}

/// Alternate one improvement with one sweep.
pub fn value_iteration(mdp: &Mdp, tol: f64) -> Result<DpSolution> {
    value_iteration_capped(mdp, tol, MAX_SWEEPS)
}

pub fn value_iteration_capped(mdp: &Mdp, tol: f64, cap: usize) -> Result<DpSolution> {
    check(mdp, tol)?;
    let mut v = ValueFn::zeros(mdp.n_states());
    let mut prev_pi: Option<Policy> = None;
    let mut history = Vec::new();
    for sweeps in 1.. {
        let pi = policy_improve(mdp, &v);
        let next = value_improve(mdp, &pi, &v);
        let residual = next.distance(&v);
        history.push(next.clone());
        v = next;
        if residual < tol && prev_pi.as_ref() == Some(&pi) {
            return Ok(DpSolution {
                policy: policy_improve(mdp, &v),
                value: v,
                sweeps,
                history,
            });
        }
        if sweeps >= cap {
            return Err(Error::NonConvergence { sweeps, residual });
        }
        prev_pi = Some(pi);
    }
    unreachable!("sweep counter overflow")
}

/// `m` improvements then `n` sweeps per round, until the policy is stable
/// and the last sweep moved less than `tol`.
pub fn gpi(mdp: &Mdp, m: usize, n: usize, tol: f64) -> Result<DpSolution> {
    gpi_capped(mdp, m, n, tol, MAX_SWEEPS)
}

pub fn gpi_capped(mdp: &Mdp, m: usize, n: usize, tol: f64, cap: usize) -> Result<DpSolution> {
    check(mdp, tol)?;
    if m == 0 || n == 0 {
        return Err(Error::Config(format!("gpi needs m, n > 0, got m = {m}, n = {n}")));
    }
    let mut v = ValueFn::zeros(mdp.n_states());
    let mut prev_pi: Option<Policy> = None;
    let mut history = Vec::new();
    let mut sweeps = 0;
    loop {
        let mut pi = policy_improve(mdp, &v);
        for _ in 1..m {
            pi = policy_improve(mdp, &v);
        }
        let mut residual = f64::INFINITY;
        for _ in 0..n {
            let next = value_improve(mdp, &pi, &v);
            residual = next.distance(&v);
            history.push(next.clone());
            v = next;
            sweeps += 1;
        }
        if residual < tol && prev_pi.as_ref() == Some(&pi) {
            return Ok(DpSolution {
                policy: policy_improve(mdp, &v),
                value: v,
                sweeps,
                history,
            });
        }
        if sweeps >= cap {
            return Err(Error::NonConvergence { sweeps, residual });
        }
        prev_pi = Some(pi);
    }
}
