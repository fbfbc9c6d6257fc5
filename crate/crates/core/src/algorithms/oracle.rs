//! Direct textbook loops.
//!
//! No lenses, iterations or combs here: each oracle keeps a flat table and
//! walks the MDP by hand. They sample through [`FiniteDist`] and make their
//! draws in the documented order, and nothing else is shared with the
//! compositional builds. Every oracle returns the table after each update,
//! starting with the initial one.

use crate::algorithms::{Budget, TdConfig};
use crate::dist::FiniteDist;
use crate::mdp::{Mdp, State};
use crate::rng::RngState;

type Table = Vec<f64>;

struct Walker<'a> {
    mdp: &'a Mdp,
    max_len: usize,
    s: State,
    t: usize,
}

impl<'a> Walker<'a> {
    fn new(mdp: &'a Mdp, max_len: usize, rng: &mut RngState) -> Self {
        let s = mdp.start().sample(rng);
        Self { mdp, max_len, s, t: 0 }
    }

    /// `(s', r, terminal, done)`.
    fn step(&mut self, a: usize, rng: &mut RngState) -> (State, f64, bool, bool) {
        let (s2, r) = self.mdp.transition(self.s, a).sample(rng);
        self.t += 1;
        let terminal = self.mdp.is_terminal(s2);
        (s2, r, terminal, terminal || self.t >= self.max_len)
    }

    fn move_to(&mut self, s2: State, done: bool, rng: &mut RngState) {
        if done {
            self.s = self.mdp.start().sample(rng);
            self.t = 0;
        } else {
            self.s = s2;
        }
    }
}

fn greedy(row: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..row.len() {
        if row[a] > row[best] {
            best = a;
        }
    }
    best
}

fn weights(row: &[f64], epsilon: f64) -> Vec<f64> {
    let best = greedy(row);
    let base = epsilon / row.len() as f64;
    (0..row.len())
        .map(|a| if a == best { 1.0 - epsilon + base } else { base })
        .collect()
}

fn choose(row: &[f64], epsilon: f64, rng: &mut RngState) -> usize {
    let w = weights(row, epsilon);
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last = 0;
    for (a, p) in w.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        acc += p;
        last = a;
        if u < acc {
            return a;
        }
    }
    last
}

fn initial(mdp: &Mdp, q_init: f64) -> Table {
    let na = mdp.n_actions();
    (0..mdp.n_states() * na)
        .map(|i| if mdp.is_terminal(i / na) { 0.0 } else { q_init })
        .collect()
}

fn row(q: &Table, na: usize, s: State) -> &[f64] {
    &q[s * na..(s + 1) * na]
}

fn update(q: &mut Table, i: usize, target: f64, alpha: f64) {
    q[i] += alpha * (target - q[i]);
}

struct Counter {
    budget: Budget,
    steps: usize,
    episodes: usize,
}

impl Counter {
    fn new(budget: Budget) -> Self {
        Self {
            budget,
            steps: 0,
            episodes: 0,
        }
    }

    fn more(&self) -> bool {
        match self.budget {
            Budget::Episodes(n) => self.episodes < n,
            Budget::Steps(n) => self.steps < n,
        }
    }

    fn count(&mut self, done: bool) {
        self.steps += 1;
        self.episodes += usize::from(done);
    }
}

pub fn oracle_sarsa(mdp: &Mdp, cfg: &TdConfig) -> Vec<Table> {
    let na = mdp.n_actions();
    let mut rng = RngState::new(cfg.seed);
    let mut q = initial(mdp, cfg.q_init);
    let mut trace = vec![q.clone()];
    let mut env = Walker::new(mdp, cfg.max_len, &mut rng);
    let mut next: Option<usize> = None;
    let mut budget = Counter::new(cfg.budget);
    while budget.more() {
        let s = env.s;
        let a = match next.take() {
            Some(a) => a,
            None => choose(row(&q, na, s), cfg.epsilon, &mut rng),
        };
        let (s2, r, _, done) = env.step(a, &mut rng);
        let a2 = choose(row(&q, na, s2), cfg.epsilon, &mut rng);
        let target = r + cfg.gamma * q[s2 * na + a2];
        update(&mut q, s * na + a, target, cfg.alpha);
        trace.push(q.clone());
        budget.count(done);
        if !done {
            next = Some(a2);
        }
        env.move_to(s2, done, &mut rng);
    }
    trace
}

pub fn oracle_q_learning(mdp: &Mdp, cfg: &TdConfig) -> Vec<Table> {
    one_step_oracle(mdp, cfg, |q, s2, _| {
        row(q, mdp.n_actions(), s2).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    })
}

pub fn oracle_expected_sarsa(mdp: &Mdp, cfg: &TdConfig) -> Vec<Table> {
    one_step_oracle(mdp, cfg, |q, s2, epsilon| {
        let r = row(q, mdp.n_actions(), s2);
        let mut acc = 0.0;
        for (p, v) in weights(r, epsilon).iter().zip(r) {
            if *p != 0.0 {
                acc += p * v;
            }
        }
        acc
    })
}

fn one_step_oracle(mdp: &Mdp, cfg: &TdConfig, bootstrap: impl Fn(&Table, State, f64) -> f64) -> Vec<Table> {
    let na = mdp.n_actions();
    let mut rng = RngState::new(cfg.seed);
    let mut q = initial(mdp, cfg.q_init);
    let mut trace = vec![q.clone()];
    let mut env = Walker::new(mdp, cfg.max_len, &mut rng);
    let mut budget = Counter::new(cfg.budget);
    while budget.more() {
        let s = env.s;
        let a = choose(row(&q, na, s), cfg.epsilon, &mut rng);
        let (s2, r, _, done) = env.step(a, &mut rng);
        let target = r + cfg.gamma * bootstrap(&q, s2, cfg.epsilon);
        update(&mut q, s * na + a, target, cfg.alpha);
        trace.push(q.clone());
        budget.count(done);
        env.move_to(s2, done, &mut rng);
    }
    trace
}

pub fn oracle_n_step_sarsa(mdp: &Mdp, n: usize, cfg: &TdConfig) -> Vec<Table> {
    let na = mdp.n_actions();
    let mut rng = RngState::new(cfg.seed);
    let mut q = initial(mdp, cfg.q_init);
    let mut trace = vec![q.clone()];
    let mut env = Walker::new(mdp, cfg.max_len, &mut rng);
    let mut next: Option<usize> = None;
    let mut budget = Counter::new(cfg.budget);
    // (s, a, r) of the current episode from index `tau` on
    let mut hist: Vec<(State, usize, f64)> = Vec::new();
    let mut tau = 0;
    while budget.more() {
        let s = env.s;
        let a = match next.take() {
            Some(a) => a,
            None => choose(row(&q, na, s), cfg.epsilon, &mut rng),
        };
        let (s2, r, _, done) = env.step(a, &mut rng);
        let a2 = choose(row(&q, na, s2), cfg.epsilon, &mut rng);
        hist.push((s, a, r));
        let target_for = |q: &Table, from: usize| {
            let mut g = 0.0;
            let mut discount = 1.0;
            for &(_, _, r) in &hist[from..] {
                g += discount * r;
                discount *= cfg.gamma;
            }
            g + discount * q[s2 * na + a2]
        };
        if done {
            let targets: Vec<(usize, f64)> = (tau..hist.len())
                .map(|k| (hist[k].0 * na + hist[k].1, target_for(&q, k)))
                .collect();
            for (i, g) in targets {
                update(&mut q, i, g, cfg.alpha);
            }
            hist.clear();
            tau = 0;
        } else if hist.len() - tau == n {
            let g = target_for(&q, tau);
            update(&mut q, hist[tau].0 * na + hist[tau].1, g, cfg.alpha);
            tau += 1;
        }
        trace.push(q.clone());
        budget.count(done);
        if !done {
            next = Some(a2);
        }
        env.move_to(s2, done, &mut rng);
    }
    trace
}

/// One table per episode.
pub fn oracle_mc(mdp: &Mdp, cfg: &TdConfig) -> Vec<Table> {
    let na = mdp.n_actions();
    let mut rng = RngState::new(cfg.seed);
    let mut q = initial(mdp, cfg.q_init);
    let mut trace = vec![q.clone()];
    let mut env = Walker::new(mdp, cfg.max_len, &mut rng);
    let mut budget = Counter::new(cfg.budget);
    while budget.more() {
        let mut episode = Vec::new();
        loop {
            let s = env.s;
            let a = choose(row(&q, na, s), cfg.epsilon, &mut rng);
            let (s2, r, _, done) = env.step(a, &mut rng);
            episode.push((s, a, r));
            budget.count(done);
            env.move_to(s2, done, &mut rng);
            if done {
                break;
            }
        }
        let mut returns = vec![0.0; episode.len()];
        let mut g = 0.0;
        for t in (0..episode.len()).rev() {
            g = episode[t].2 + cfg.gamma * g;
            returns[t] = g;
        }
        let mut seen = vec![false; q.len()];
        for (t, &(s, a, _)) in episode.iter().enumerate() {
            let i = s * na + a;
            if !seen[i] {
                seen[i] = true;
                update(&mut q, i, returns[t], cfg.alpha);
            }
        }
        trace.push(q.clone());
    }
    trace
}

/// TD(0) on a single-action process. `alpha = None` uses `1 / visits`.
pub fn oracle_td0(
    mdp: &Mdp,
    alpha: Option<f64>,
    gamma: f64,
    budget: Budget,
    max_len: usize,
    seed: u64,
) -> Vec<Table> {
    let mut rng = RngState::new(seed);
    let mut v = vec![0.0; mdp.n_states()];
    let mut visits = vec![0_u64; mdp.n_states()];
    let mut trace = vec![v.clone()];
    let mut env = Walker::new(mdp, max_len, &mut rng);
    let mut budget = Counter::new(budget);
    while budget.more() {
        let s = env.s;
        let (s2, r, _, done) = env.step(0, &mut rng);
        visits[s] += 1;
        let step = alpha.unwrap_or(1.0 / visits[s] as f64);
        let target = r + gamma * v[s2];
        update(&mut v, s, target, step);
        trace.push(v.clone());
        budget.count(done);
        env.move_to(s2, done, &mut rng);
    }
    trace
}

/// `sweeps` rounds of `V(s) ← max_a Σ p·(r + γ·V(s'))`, terminals pinned at 0.
pub fn oracle_value_iteration(mdp: &Mdp, sweeps: usize) -> Vec<Table> {
    let mut v = vec![0.0; mdp.n_states()];
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        v = (0..mdp.n_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    return 0.0;
                }
                (0..mdp.n_actions())
                    .map(|a| {
                        let d: &FiniteDist<(State, f64)> = mdp.transition(s, a);
                        d.iter().map(|((s2, r), p)| p * (r + mdp.gamma() * v[*s2])).sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        out.push(v.clone());
    }
    out
}

/// Exact value of a deterministic policy by Gaussian elimination on
/// `(I − γP)V = R`. Terminal states are pinned at 0.
pub fn exact_policy_value(mdp: &Mdp, actions: &[usize]) -> Vec<f64> {
    let n = mdp.n_states();
    let mut m = vec![vec![0.0; n + 1]; n];
    for s in 0..n {
        m[s][s] = 1.0;
        if mdp.is_terminal(s) {
            continue;
        }
        for ((s2, r), p) in mdp.transition(s, actions[s]).iter() {
            m[s][*s2] -= mdp.gamma() * p;
            m[s][n] += p * r;
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        m.swap(col, pivot);
        for i in 0..n {
            if i != col {
                let f = m[i][col] / m[col][col];
                for j in col..=n {
                    m[i][j] -= f * m[col][j];
                }
            }
        }
    }
    (0..n).map(|s| m[s][n] / m[s][s]).collect()
}

/// Best deterministic policy by enumerating all of them.
///
/// Returns the optimal values and every policy attaining them within `tol`.
pub fn brute_force_optimum(mdp: &Mdp, tol: f64) -> (Vec<f64>, Vec<Vec<usize>>) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let total = na.pow(ns as u32);
    let all: Vec<(Vec<usize>, Vec<f64>)> = (0..total)
        .map(|mut code| {
            let actions: Vec<usize> = (0..ns)
                .map(|_| {
                    let a = code % na;
                    code /= na;
                    a
                })
                .collect();
            let v = exact_policy_value(mdp, &actions);
            (actions, v)
        })
        .collect();
    let best: Vec<f64> = (0..ns)
        .map(|s| all.iter().map(|(_, v)| v[s]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let winners = all
        .into_iter()
        .filter(|(_, v)| v.iter().zip(&best).all(|(a, b)| (a - b).abs() <= tol))
        .map(|(p, _)| p)
        .collect();
    (best, winners)
}

/// ε-greedy bandit loop. Draws: one for the (trivial) initial comb state,
/// then action and reward per step. `alpha = None` averages.
pub fn oracle_bandit(
    arms: &[FiniteDist<f64>],
    steps: usize,
    epsilon: f64,
    alpha: Option<f64>,
    q_init: f64,
    seed: u64,
) -> Vec<Table> {
    let mut rng = RngState::new(seed);
    rng.uniform();
    let mut q = vec![q_init; arms.len()];
    let mut n = vec![0_u64; arms.len()];
    let mut trace = vec![q.clone()];
    for _ in 0..steps {
        let a = choose(&q, epsilon, &mut rng);
        let r = arms[a].sample(&mut rng);
        n[a] += 1;
        update(&mut q, a, r, alpha.unwrap_or(1.0 / n[a] as f64));
        trace.push(q.clone());
    }
    trace
}
