//! Bellman operators as optics, sample-parametrised target lenses, and value
//! containers.
//!
//! For a fixed policy π the Bellman optic `ℓ_π : (S/ℝ) -> (S/ℝ)` runs forwards
//! from a state to a joint law over `(reward, next state)` and backwards from a
//! next-state value `v` to `E[r] + γ·v`. Its image under the continuation
//! functor is the expectation backup `B_π`; [`value_improve`] is computed that
//! way.
//!
//! Policy improvement is a plain function. It needs the value function twice
//! (once per candidate action and once to compare them), so it is not the
//! continuation image of any optic and is deliberately not offered as one.
//!
//! Tabular methods update one Q-table entry per sample. Their targets are
//! [`QDelta`]s carrying the full target value; [`cotangent_embed`] exposes the
//! same update as a sparse matrix added to the table.

use crate::dist::FiniteDist;
use crate::error::{Error, Result};
use crate::mdp::{argmax, Action, Episode, Mdp, Policy, SarsaSample, State, Transition};
use crate::optic::{continuation, Continuation, Convex, StochOptic};
use crate::para::ParaLens;

/// A state-value function `V : S -> ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn {
    v: Vec<f64>,
}

impl ValueFn {
    pub fn zeros(n_states: usize) -> Self {
        Self { v: vec![0.0; n_states] }
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self { v }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn get(&self, s: State) -> f64 {
        self.v[s]
    }

    pub fn set(&mut self, s: State, value: f64) {
        self.v[s] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &ValueFn) -> f64 {
        self.v
            .iter()
            .zip(&other.v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The value function as a continuation `S -> ℝ`.
    pub fn continuation(&self) -> Continuation<State, f64> {
        let v = self.v.clone();
        continuation(move |s: &State| v[*s])
    }

    /// CSV with header `s,v`, one row per state in id order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,v\n");
        for (s, v) in self.v.iter().enumerate() {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }
}

impl Convex for ValueFn {
    fn mix(terms: Vec<(f64, Self)>) -> Self {
        ValueFn::from_vec(Vec::mix(terms.into_iter().map(|(w, v)| (w, v.v)).collect()))
    }
}

/// A state-action value table `Q : S × A -> ℝ`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            q: vec![value; n_states * n_actions],
        }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(State, Action) -> f64) -> Self {
        let mut q = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                q.push(f(s, a));
            }
        }
        Self { n_states, n_actions, q }
    }

    /// Table for `mdp` filled with `value`, with terminal rows zeroed.
    pub fn initial(mdp: &Mdp, value: f64) -> Self {
        let mut q = Self::filled(mdp.n_states(), mdp.n_actions(), value);
        for s in mdp.terminals() {
            q.row_mut(s).fill(0.0);
        }
        q
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: State, a: Action) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: State, a: Action, value: f64) {
        self.q[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: State) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, s: State) -> &mut [f64] {
        &mut self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn max(&self, s: State) -> f64 {
        self.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-id greedy action.
    pub fn argmax(&self, s: State) -> Action {
        argmax(self.row(s))
    }

    pub fn greedy_actions(&self) -> Vec<Action> {
        (0..self.n_states).map(|s| self.argmax(s)).collect()
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Entrywise sum; shapes must match.
    pub fn add(&self, other: &QTable) -> QTable {
        assert_eq!((self.n_states, self.n_actions), (other.n_states, other.n_actions));
        QTable {
            q: self.q.iter().zip(&other.q).map(|(a, b)| a + b).collect(),
            ..self.clone()
        }
    }

    /// `Q(s, a) ← Q(s, a) + α·(G − Q(s, a))`, returning the new table.
    pub fn apply_delta(&self, d: &QDelta, alpha: f64) -> QTable {
        let mut next = self.clone();
        next.apply_delta_in_place(d, alpha);
        next
    }

    pub fn apply_delta_in_place(&mut self, d: &QDelta, alpha: f64) {
        let q = self.get(d.s, d.a);
        self.set(d.s, d.a, blend(q, d.target, alpha));
    }

    /// The table as a continuation `S × A -> ℝ`.
    pub fn continuation(&self) -> Continuation<(State, Action), f64> {
        let table = self.clone();
        continuation(move |&(s, a): &(State, Action)| table.get(s, a))
    }

    /// CSV with header `s,a,q`, rows ordered by `(s, a)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,a,q\n");
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.push_str(&format!("{s},{a},{}\n", self.get(s, a)));
            }
        }
        out
    }
}

impl Convex for QTable {
    fn mix(terms: Vec<(f64, Self)>) -> Self {
        let (n_states, n_actions) = (terms[0].1.n_states, terms[0].1.n_actions);
        QTable {
            n_states,
            n_actions,
            q: Vec::mix(terms.into_iter().map(|(w, t)| (w, t.q)).collect()),
        }
    }
}

/// The incremental form of the update rule, `q + α·(g − q)`.
///
/// Tabular updates, the cotangent embedding and the semi-gradient step all
/// use this exact expression so their results agree bit for bit.
pub fn blend(q: f64, target: f64, alpha: f64) -> f64 {
    q + alpha * (target - q)
}

/// A single-entry update target: move `Q(s, a)` towards `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QDelta {
    pub s: State,
    pub a: Action,
    pub target: f64,
}

/// Full-sweep target for a state-value function.
#[derive(Debug, Clone, PartialEq)]
pub struct VDelta {
    pub target: ValueFn,
}

/// The Bellman optic `ℓ_π` for `mdp` under `pi`; its residual is the reward.
///
/// Forward: `s ↦ E_{a∼π(s)} t(s, a)` as a law over `(r, s')`.
/// Backward: `(law of r, v) ↦ E[r] + γ·v`.
pub fn bellman_optic(mdp: &Mdp, pi: &Policy) -> StochOptic<State, f64, State, f64, f64> {
    let (dynamics, pi) = (mdp.clone(), pi.clone());
    let gamma = mdp.gamma();
    StochOptic::new(
        move |&s: &State| {
            pi.action_dist(s)
                .bind(|&a| dynamics.transition(s, a).map(|&(s2, r)| (r, s2)))
        },
        move |rewards: &FiniteDist<f64>, v: f64| rewards.expectation() + gamma * v,
    )
}

/// One expectation backup `B_π(V)`, computed as `K(ℓ_π)(V)`.
/// Terminal states keep value zero.
pub fn value_improve(mdp: &Mdp, pi: &Policy, v: &ValueFn) -> ValueFn {
    let optic = bellman_optic(mdp, pi);
    ValueFn::from_vec(
        (0..mdp.n_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    0.0
                } else {
                    optic.apply_continuation(&s, |s2| v.get(*s2))
                }
            })
            .collect(),
    )
}

/// `E_{(s', r)∼t(s, a)}[r + γ·V(s')]`.
pub fn action_value(mdp: &Mdp, v: &ValueFn, s: State, a: Action) -> f64 {
    mdp.transition(s, a).expect(|&(s2, r)| r + mdp.gamma() * v.get(s2))
}

/// Greedy policy with respect to the one-step lookahead of `v`
/// (lowest action id on ties).
pub fn policy_improve(mdp: &Mdp, v: &ValueFn) -> Policy {
    let actions = (0..mdp.n_states())
        .map(|s| {
            let values: Vec<f64> = (0..mdp.n_actions()).map(|a| action_value(mdp, v, s, a)).collect();
            argmax(&values)
        })
        .collect();
    Policy::Deterministic(actions)
}

/// `r + γ·Q(s', a')`.
pub fn sarsa_target(gamma: f64, q: &QTable, x: &SarsaSample) -> QDelta {
    QDelta {
        s: x.s,
        a: x.a,
        target: x.r + gamma * q.get(x.s_next, x.a_next),
    }
}

/// `r + γ·max_{a'} Q(s', a')`.
pub fn q_learning_target(gamma: f64, q: &QTable, t: &Transition) -> QDelta {
    QDelta {
        s: t.s,
        a: t.a,
        target: t.r + gamma * q.max(t.s_next),
    }
}

/// `r + γ·E_{a'∼π_tgt(s')} Q(s', a')`.
pub fn exp_sarsa_target(gamma: f64, q: &QTable, t: &Transition, pi_tgt: &Policy) -> QDelta {
    let expected = pi_tgt.action_dist(t.s_next).expect(|&a2| q.get(t.s_next, a2));
    QDelta {
        s: t.s,
        a: t.a,
        target: t.r + gamma * expected,
    }
}

/// A window `(s, a, r₀, …, r_{h−1}, s_h, a_h)` for an `h`-step target.
#[derive(Debug, Clone, PartialEq)]
pub struct NStepFragment {
    pub s: State,
    pub a: Action,
    pub rewards: Vec<f64>,
    pub s_last: State,
    pub a_last: Action,
}

/// `Σ_{k<h} γᵏ·r_k + γʰ·Q(s_h, a_h)`, with `r₀` the first reward after `(s, a)`.
pub fn n_step_target(gamma: f64, q: &QTable, fragment: &NStepFragment) -> Result<QDelta> {
    if fragment.rewards.is_empty() {
        return Err(Error::MalformedEpisode("n-step window without rewards".into()));
    }
    let mut g = 0.0;
    let mut discount = 1.0;
    for r in &fragment.rewards {
        g += discount * r;
        discount *= gamma;
    }
    Ok(QDelta {
        s: fragment.s,
        a: fragment.a,
        target: g + discount * q.get(fragment.s_last, fragment.a_last),
    })
}

/// Discounted returns `G_t = r_t + γ·G_{t+1}` for every step, no bootstrap.
pub fn episode_returns(gamma: f64, episode: &Episode) -> Result<Vec<f64>> {
    if episode.steps.is_empty() {
        return Err(Error::MalformedEpisode("episode has no steps".into()));
    }
    let mut returns = vec![0.0; episode.steps.len()];
    let mut g = 0.0;
    for (t, &(_, _, r)) in episode.steps.iter().enumerate().rev() {
        g = r + gamma * g;
        returns[t] = g;
    }
    Ok(returns)
}

/// Monte Carlo target for the first step of `episode`.
pub fn mc_target(gamma: f64, episode: &Episode) -> Result<QDelta> {
    let returns = episode_returns(gamma, episode)?;
    let (s, a, _) = episode.steps[0];
    Ok(QDelta { s, a, target: returns[0] })
}

/// First-visit Monte Carlo targets in episode order.
pub fn mc_first_visit_targets(gamma: f64, episode: &Episode) -> Result<Vec<QDelta>> {
    let returns = episode_returns(gamma, episode)?;
    let mut seen: Vec<(State, Action)> = Vec::new();
    let mut out = Vec::new();
    for (t, &(s, a, _)) in episode.steps.iter().enumerate() {
        if !seen.contains(&(s, a)) {
            seen.push((s, a));
            out.push(QDelta { s, a, target: returns[t] });
        }
    }
    Ok(out)
}

/// The SARSA target as a lens `(1 / S×A×ℝ) -> (S×A / ℝ)` parametrised by the
/// sample `(s, a, r, s', a')`: forwards it picks `(s', a')`, backwards it maps
/// a value `v` to `(s, a, r + γ·v)`.
pub fn para_bellman_sarsa(gamma: f64) -> ParaLens<SarsaSample, (), (State, Action, f64), (State, Action), f64> {
    ParaLens::new(
        |x: &SarsaSample, _: &()| (x.s_next, x.a_next),
        move |x: &SarsaSample, _: &(), v: f64| (x.s, x.a, x.r + gamma * v),
    )
}

/// The update `apply_delta(Q, d, α) − Q` as a sparse matrix over `S × A`.
pub fn cotangent_embed(d: &QDelta, q: &QTable, alpha: f64) -> QTable {
    let mut out = QTable::zeros(q.n_states(), q.n_actions());
    out.set(d.s, d.a, alpha * (d.target - q.get(d.s, d.a)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_mdp, two_state_chain, GO, STAY};
    use crate::optic::Convex;
    use crate::rng::RngState;

    fn go_policy() -> Policy {
        Policy::Deterministic(vec![GO, GO])
    }

    #[test]
    fn optic_examples() {
        let mdp = two_state_chain(0.5).unwrap();
        let optic = bellman_optic(&mdp, &go_policy());
        assert_eq!(optic.forward(&0), FiniteDist::dirac((1.0, 1)));
        assert_eq!(optic.backward(&FiniteDist::dirac(1.0), 0.0), 1.0);
        let d = FiniteDist::new([(0.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(optic.backward(&d, 4.0), 3.0);
    }

    #[test]
    fn backward_is_affine() {
        let mdp = two_state_chain(0.5).unwrap();
        let optic = bellman_optic(&mdp, &go_policy());
        let d = FiniteDist::new([(0.0, 0.25), (3.0, 0.75)]).unwrap();
        for (lam, y1, y2) in [(0.3, 1.0, -2.0), (0.9, 5.0, 0.5)] {
            let lhs = optic.backward(&d, lam * y1 + (1.0 - lam) * y2);
            let rhs = lam * optic.backward(&d, y1) + (1.0 - lam) * optic.backward(&d, y2);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn continuation_examples() {
        let mdp = two_state_chain(0.5).unwrap();
        let v0 = ValueFn::zeros(2);
        let v1 = value_improve(&mdp, &go_policy(), &v0);
        assert_eq!(v1.as_slice(), &[1.0, 0.0]);
        assert_eq!(value_improve(&mdp, &go_policy(), &v1).as_slice(), &[1.0, 0.0]);

        // stay policy with gamma small: only expected reward survives at V = 0
        let stay = Policy::Deterministic(vec![STAY, GO]);
        assert_eq!(value_improve(&mdp, &stay, &v0).as_slice(), &[0.0, 0.0]);
        let optic = bellman_optic(&mdp, &go_policy());
        let v = ValueFn::from_vec(vec![7.0, -3.0]);
        assert_eq!(optic.apply_continuation_marginal(&0, |s| v.get(*s)), 1.0 + 0.5 * -3.0);
    }

    #[test]
    fn gamma_zero_limit_gives_expected_reward() {
        // gamma must be positive for an Mdp; the backward pass at gamma -> 0
        // is checked directly.
        let mut rng = RngState::new(4);
        let mdp = random_mdp(&mut rng, 4, 2, 0.5).unwrap();
        let pi = Policy::uniform(4, 2);
        let optic = bellman_optic(&mdp, &pi);
        for s in 0..4 {
            let joint = optic.forward(&s);
            let expected_r = joint.expect(|(r, _)| *r);
            let direct: f64 = (0..2).map(|a| 0.5 * mdp.expected_reward(s, a)).sum();
            assert!((expected_r - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_improve_examples() {
        let mdp = two_state_chain(0.5).unwrap();
        let pi = policy_improve(&mdp, &ValueFn::zeros(2));
        assert_eq!(pi.mode(0), GO);

        let mut rng = RngState::new(1);
        let flat = random_mdp(&mut rng, 3, 3, 0.9).unwrap();
        // zero every reward: all actions tie at V = 0
        let zeroed = Mdp::new(
            3,
            3,
            (0..9)
                .map(|i| flat.transition(i / 3, i % 3).map(|(s2, _)| (*s2, 0.0)))
                .collect(),
            0.9,
            &[],
            flat.start().clone(),
        )
        .unwrap();
        assert_eq!(policy_improve(&zeroed, &ValueFn::zeros(3)), Policy::Deterministic(vec![0, 0, 0]));
    }

    #[test]
    fn target_examples() {
        let mut q = QTable::zeros(3, 2);
        q.set(1, 1, 2.0);
        let smp = SarsaSample { s: 0, a: 0, r: 1.0, s_next: 1, a_next: 1 };
        assert!((sarsa_target(0.9, &q, &smp).target - 2.8).abs() < 1e-15);
        assert_eq!(sarsa_target(0.0, &q, &smp).target, 1.0);
        // terminal successor row is zero
        let term = SarsaSample { s_next: 2, ..smp };
        assert_eq!(sarsa_target(0.9, &q, &term).target, 1.0);

        let mut q = QTable::zeros(2, 2);
        q.set(1, 1, 5.0);
        let t = Transition { s: 0, a: 1, r: 1.0, s_next: 1 };
        assert_eq!(q_learning_target(0.5, &q, &t).target, 3.5);
        assert_eq!(q_learning_target(0.0, &q, &t).target, 1.0);
        let greedy = Policy::greedy(q.clone());
        assert_eq!(exp_sarsa_target(0.5, &q, &t, &greedy), q_learning_target(0.5, &q, &t));

        let mut q = QTable::zeros(2, 2);
        q.set(1, 1, 2.0);
        let uniform = Policy::uniform(2, 2);
        let t = Transition { s: 0, a: 0, r: 0.0, s_next: 1 };
        assert_eq!(exp_sarsa_target(1.0, &q, &t, &uniform).target, 1.0);
        let point = Policy::Deterministic(vec![0, 1]);
        let smp = SarsaSample { s: 0, a: 0, r: 0.0, s_next: 1, a_next: 1 };
        assert_eq!(exp_sarsa_target(0.7, &q, &t, &point), sarsa_target(0.7, &q, &smp));
        let eps0 = Policy::EpsilonGreedy { q: q.clone(), epsilon: 0.0 };
        assert_eq!(exp_sarsa_target(0.7, &q, &t, &eps0), q_learning_target(0.7, &q, &t));
    }

    #[test]
    fn n_step_and_mc_examples() {
        let mut q = QTable::zeros(3, 2);
        q.set(2, 1, 4.0);
        q.set(1, 0, 3.0);
        let one = NStepFragment { s: 0, a: 1, rewards: vec![1.5], s_last: 1, a_last: 0 };
        let smp = SarsaSample { s: 0, a: 1, r: 1.5, s_next: 1, a_next: 0 };
        assert_eq!(n_step_target(0.9, &q, &one).unwrap(), sarsa_target(0.9, &q, &smp));

        let two = NStepFragment { s: 0, a: 0, rewards: vec![1.0, 1.0], s_last: 2, a_last: 1 };
        assert_eq!(n_step_target(0.5, &q, &two).unwrap().target, 2.5);
        let empty = NStepFragment { rewards: vec![], ..two };
        assert!(matches!(n_step_target(0.5, &q, &empty), Err(Error::MalformedEpisode(_))));

        let ep = Episode { steps: vec![(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)], last_state: 2, truncated: false };
        assert_eq!(mc_target(0.5, &ep).unwrap().target, 1.75);
        let firsts = mc_first_visit_targets(0.5, &ep).unwrap();
        assert_eq!(firsts.len(), 3);
        let revisit = Episode { steps: vec![(0, 0, 1.0), (0, 0, 2.0)], last_state: 2, truncated: false };
        let firsts = mc_first_visit_targets(1.0, &revisit).unwrap();
        assert_eq!(firsts, vec![QDelta { s: 0, a: 0, target: 3.0 }]);
        let none = Episode { steps: vec![], last_state: 0, truncated: true };
        assert!(mc_target(0.5, &none).is_err());
    }

    #[test]
    fn apply_delta_examples() {
        let mut q = QTable::zeros(2, 2);
        q.set(0, 1, 2.0);
        let d = QDelta { s: 0, a: 1, target: 4.0 };
        assert_eq!(q.apply_delta(&d, 1.0).get(0, 1), 4.0);
        assert_eq!(q.apply_delta(&d, 0.0), q);
        let half = q.apply_delta(&d, 0.5);
        assert_eq!(half.get(0, 1), 3.0);
        assert_eq!(half.get(1, 0), 0.0);
    }

    #[test]
    fn para_sarsa_examples() {
        let b = para_bellman_sarsa(0.9);
        let mut q = QTable::zeros(3, 2);
        q.set(2, 1, 2.0);
        let smp = SarsaSample { s: 0, a: 1, r: 1.0, s_next: 2, a_next: 1 };
        let (s, a, g) = b.para_k().apply(&smp, &((), q.continuation()));
        assert_eq!((s, a), (0, 1));
        assert!((g - 2.8).abs() < 1e-15);
        let b0 = para_bellman_sarsa(0.0);
        assert_eq!(b0.backward(&smp, &(), 123.0), (0, 1, 1.0));
    }

    #[test]
    fn cotangent_examples() {
        let mut q = QTable::zeros(2, 2);
        q.set(1, 0, 0.7);
        let fix = QDelta { s: 1, a: 0, target: 0.7 };
        assert!(cotangent_embed(&fix, &q, 0.3).values().iter().all(|v| *v == 0.0));
        let d = QDelta { s: 0, a: 1, target: 6.0 };
        let m = cotangent_embed(&d, &q, 1.0);
        assert_eq!(m.get(0, 1), 6.0);
        assert_eq!(m.values().iter().filter(|v| **v != 0.0).count(), 1);

        let mut rng = RngState::new(8);
        for _ in 0..200 {
            let q = QTable::from_fn(3, 2, |_, _| rng.uniform_in(-5.0, 5.0));
            let d = QDelta { s: rng.index(3), a: rng.index(2), target: rng.uniform_in(-5.0, 5.0) };
            let alpha = rng.uniform();
            assert_eq!(q.add(&cotangent_embed(&d, &q, alpha)), q.apply_delta(&d, alpha));
        }
    }

    #[test]
    fn csv_layout() {
        let q = QTable::from_fn(2, 2, |s, a| (s * 2 + a) as f64 * 0.5);
        assert_eq!(q.to_csv(), "s,a,q\n0,0,0\n0,1,0.5\n1,0,1\n1,1,1.5\n");
        assert_eq!(ValueFn::from_vec(vec![1.0, -0.25]).to_csv(), "s,v\n0,1\n1,-0.25\n");
    }

    #[test]
    fn convex_tables() {
        let a = QTable::filled(1, 2, 1.0);
        let b = QTable::filled(1, 2, 3.0);
        assert_eq!(QTable::mix(vec![(0.5, a), (0.5, b)]).values(), &[2.0, 2.0]);
    }
}
