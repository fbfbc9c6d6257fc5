//! Markov decision and reward processes, policies, and environment combs.
//!
//! Transitions are joint distributions over `(next state, reward)` with finite
//! support. States and actions are dense integer ids. Terminal states loop to
//! themselves with reward zero.
//!
//! Environments are exposed as [`EnvComb`]s for agents `(S/I) -> (A/F)`:
//! [`mdp_to_comb`] for online interaction with an MDP, plus the degenerate
//! bandit and offline-replay combs.

use crate::bellman::QTable;
use crate::dist::FiniteDist;
use crate::error::{Error, Result};
use crate::iteration::EnvComb;
use crate::rng::RngState;

pub type State = usize;
pub type Action = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<FiniteDist<(State, f64)>>,
    gamma: f64,
    terminal: Vec<bool>,
    start: FiniteDist<State>,
}

impl Mdp {
    /// `transitions[s * n_actions + a]` is the law of `(s', r)` after `a` in `s`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<FiniteDist<(State, f64)>>,
        gamma: f64,
        terminals: &[State],
        start: FiniteDist<State>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("an MDP needs at least one state and one action".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if transitions.len() != n_states * n_actions {
            return Err(Error::Config(format!(
                "expected {} transition distributions, got {}",
                n_states * n_actions,
                transitions.len()
            )));
        }
        let mut terminal = vec![false; n_states];
        for &s in terminals {
            if s >= n_states {
                return Err(Error::Config(format!("terminal state {s} out of range")));
            }
            terminal[s] = true;
        }
        for (idx, d) in transitions.iter().enumerate() {
            let s = idx / n_actions;
            for ((s2, r), _) in d.iter() {
                if *s2 >= n_states {
                    return Err(Error::Config(format!("transition from {s} reaches unknown state {s2}")));
                }
                if !r.is_finite() {
                    return Err(Error::Config(format!("non-finite reward from state {s}")));
                }
            }
            if terminal[s] && *d != FiniteDist::dirac((s, 0.0)) {
                return Err(Error::Config(format!(
                    "terminal state {s} must loop to itself with reward 0"
                )));
            }
        }
        if start.iter().any(|(s, _)| *s >= n_states) {
            return Err(Error::Config("start distribution outside the state space".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            gamma,
            terminal,
            start,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Same dynamics under a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { gamma, ..self.clone() })
    }

    pub fn transition(&self, s: State, a: Action) -> &FiniteDist<(State, f64)> {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: State) -> bool {
        self.terminal[s]
    }

    pub fn terminals(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.n_states).filter(|&s| self.terminal[s])
    }

    pub fn start(&self) -> &FiniteDist<State> {
        &self.start
    }

    pub fn expected_reward(&self, s: State, a: Action) -> f64 {
        self.transition(s, a).expect(|(_, r)| *r)
    }

    /// Reject discounts the dynamic-programming solvers cannot contract with.
    pub fn require_discounted(&self) -> Result<()> {
        if self.gamma < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "dynamic programming needs gamma < 1, got {}",
                self.gamma
            )))
        }
    }
}

/// A Markov reward process: an MDP with a single action.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrp(Mdp);

impl Mrp {
    pub fn new(
        n_states: usize,
        transitions: Vec<FiniteDist<(State, f64)>>,
        gamma: f64,
        terminals: &[State],
        start: FiniteDist<State>,
    ) -> Result<Self> {
        Mdp::new(n_states, 1, transitions, gamma, terminals, start).map(Mrp)
    }

    pub fn from_mdp(mdp: Mdp) -> Result<Self> {
        if mdp.n_actions != 1 {
            return Err(Error::Config(format!(
                "a reward process has one action, this MDP has {}",
                mdp.n_actions
            )));
        }
        Ok(Mrp(mdp))
    }

    /// The reward process of `mdp` with actions drawn from `pi`.
    pub fn induced(mdp: &Mdp, pi: &Policy) -> Result<Self> {
        let transitions = (0..mdp.n_states)
            .map(|s| pi.action_dist(s).bind(|&a| mdp.transition(s, a).clone()))
            .collect();
        let terminals: Vec<State> = mdp.terminals().collect();
        Self::new(mdp.n_states, transitions, mdp.gamma, &terminals, mdp.start.clone())
    }

    pub fn as_mdp(&self) -> &Mdp {
        &self.0
    }
}

/// How an agent chooses actions.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(Vec<Action>),
    Stochastic(Vec<FiniteDist<Action>>),
    /// Greedy in `q` with probability `1 - epsilon`, otherwise uniform over
    /// all actions (the greedy one included). Ties go to the lowest id.
    EpsilonGreedy { q: QTable, epsilon: f64 },
    /// Boltzmann weights `exp(q(s, a) / temperature)`.
    Softmax { q: QTable, temperature: f64 },
}

impl Policy {
    pub fn greedy(q: QTable) -> Self {
        Policy::EpsilonGreedy { q, epsilon: 0.0 }
    }

    /// Uniformly random over `n_actions` in every state.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let d = FiniteDist::uniform(0..n_actions).expect("at least one action");
        Policy::Stochastic(vec![d; n_states])
    }

    /// The action distribution at `s`, listed in increasing action order.
    pub fn action_dist(&self, s: State) -> FiniteDist<Action> {
        match self {
            Policy::Deterministic(actions) => FiniteDist::dirac(actions[s]),
            Policy::Stochastic(dists) => dists[s].clone(),
            Policy::EpsilonGreedy { q, epsilon } => epsilon_greedy_dist(q.row(s), *epsilon),
            Policy::Softmax { q, temperature } => softmax_dist(q.row(s), *temperature),
        }
    }

    /// The value table behind a value-based policy.
    pub fn q_table(&self) -> Option<&QTable> {
        match self {
            Policy::EpsilonGreedy { q, .. } | Policy::Softmax { q, .. } => Some(q),
            _ => None,
        }
    }

    /// Most probable action at `s` (lowest id on ties).
    pub fn mode(&self, s: State) -> Action {
        let d = self.action_dist(s);
        let mut best = (d.atoms()[0].0, d.atoms()[0].1);
        for (a, p) in d.iter() {
            if p > best.1 || (p == best.1 && *a < best.0) {
                best = (*a, p);
            }
        }
        best.0
    }
}

/// Lowest-id argmax.
pub fn argmax(values: &[f64]) -> Action {
    let mut best = 0;
    for (a, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = a;
        }
    }
    best
}

fn epsilon_greedy_dist(row: &[f64], epsilon: f64) -> FiniteDist<Action> {
    let greedy = argmax(row);
    let n = row.len();
    let base = epsilon / n as f64;
    FiniteDist::new((0..n).map(|a| {
        let w = if a == greedy { 1.0 - epsilon + base } else { base };
        (a, w)
    }))
    .expect("epsilon-greedy weights are a distribution")
}

fn softmax_dist(row: &[f64], temperature: f64) -> FiniteDist<Action> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    FiniteDist::from_weights(
        row.iter()
            .enumerate()
            .map(|(a, q)| (a, ((q - max) / temperature).exp())),
    )
    .expect("softmax weights are positive")
}

/// Sample an action from `policy` at `s`. Consumes exactly one draw.
pub fn sample_action(policy: &Policy, s: State, rng: &mut RngState) -> Action {
    policy.action_dist(s).sample(rng)
}

/// `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: State,
    pub a: Action,
    pub r: f64,
    pub s_next: State,
}

/// `(s, a, r, s', a')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SarsaSample {
    pub s: State,
    pub a: Action,
    pub r: f64,
    pub s_next: State,
    pub a_next: Action,
}

impl SarsaSample {
    pub fn transition(&self) -> Transition {
        Transition {
            s: self.s,
            a: self.a,
            r: self.r,
            s_next: self.s_next,
        }
    }
}

/// A sequence of `(s, a, r)` steps ending in `last_state`.
///
/// `truncated` marks episodes cut off at a length cap rather than by reaching
/// a terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<(State, Action, f64)>,
    pub last_state: State,
    pub truncated: bool,
}

impl Episode {
    pub fn undiscounted_return(&self) -> f64 {
        self.steps.iter().map(|(_, _, r)| r).sum()
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::MalformedEpisode("episode has no steps".into()));
        }
        if self.steps.iter().any(|&(s, a, _)| s >= mdp.n_states || a >= mdp.n_actions)
            || self.last_state >= mdp.n_states
        {
            return Err(Error::MalformedEpisode("state or action id out of range".into()));
        }
        if !self.truncated && !mdp.is_terminal(self.last_state) {
            return Err(Error::MalformedEpisode("untruncated episode ends in a non-terminal state".into()));
        }
        Ok(())
    }
}

/// Grid layout for [`gridworld`]. Cells are `(row, col)` with row 0 on top.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<(usize, usize)>,
    pub goals: Vec<(usize, usize)>,
    pub goal_reward: f64,
    pub step_reward: f64,
    /// `None` starts uniformly over open non-goal cells.
    pub start: Option<(usize, usize)>,
    pub gamma: f64,
}

/// Moves in action order: up, right, down, left.
pub const GRID_MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// A deterministic 4-action grid.
///
/// Open cells get consecutive ids in row-major order. Moving off the grid or
/// into a wall leaves the agent in place. Every move costs `step_reward`;
/// entering a goal adds `goal_reward`. Goals are terminal.
pub fn gridworld(spec: &GridSpec) -> Result<Mdp> {
    let GridSpec { width, height, .. } = *spec;
    if width == 0 || height == 0 {
        return Err(Error::Config("grid dimensions must be at least 1".into()));
    }
    let in_grid = |&(r, c): &(usize, usize)| r < height && c < width;
    if let Some(bad) = spec.walls.iter().chain(&spec.goals).chain(&spec.start).find(|p| !in_grid(p)) {
        return Err(Error::Config(format!("cell {bad:?} lies outside the {height}x{width} grid")));
    }
    let mut id = vec![None; width * height];
    let mut cells = Vec::new();
    for r in 0..height {
        for c in 0..width {
            if !spec.walls.contains(&(r, c)) {
                id[r * width + c] = Some(cells.len());
                cells.push((r, c));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Config("grid has no open cells".into()));
    }
    let state_of = |cell: (usize, usize)| {
        id[cell.0 * width + cell.1].ok_or_else(|| Error::Config(format!("cell {cell:?} is a wall")))
    };
    let goals = spec.goals.iter().map(|&g| state_of(g)).collect::<Result<Vec<_>>>()?;

    let mut transitions = Vec::with_capacity(cells.len() * 4);
    for (s, &(r, c)) in cells.iter().enumerate() {
        for (dr, dc) in GRID_MOVES {
            if goals.contains(&s) {
                transitions.push(FiniteDist::dirac((s, 0.0)));
                continue;
            }
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            let target = if nr >= 0 && nc >= 0 && (nr as usize) < height && (nc as usize) < width {
                id[nr as usize * width + nc as usize].unwrap_or(s)
            } else {
                s
            };
            let bonus = if goals.contains(&target) { spec.goal_reward } else { 0.0 };
            transitions.push(FiniteDist::dirac((target, spec.step_reward + bonus)));
        }
    }
    let start = match spec.start {
        Some(cell) => FiniteDist::dirac(state_of(cell)?),
        None => FiniteDist::uniform((0..cells.len()).filter(|s| !goals.contains(s)))
            .map_err(|_| Error::Config("every open cell is a goal".into()))?,
    };
    Mdp::new(cells.len(), 4, transitions, spec.gamma, &goals, start)
}

/// The 4×4 grid with goals in two opposite corners and unit step cost.
pub fn corner_gridworld(gamma: f64) -> Result<Mdp> {
    gridworld(&GridSpec {
        width: 4,
        height: 4,
        walls: vec![],
        goals: vec![(0, 0), (3, 3)],
        goal_reward: 0.0,
        step_reward: -1.0,
        start: None,
        gamma,
    })
}

pub const CLIFF_ROWS: usize = 4;
pub const CLIFF_COLS: usize = 12;

/// Cliff walking on a 4×12 grid. State id is `row * 12 + col`.
///
/// Start is the bottom-left cell and the goal the bottom-right one. Cells in
/// between form the cliff: stepping into one costs −100 and returns the agent
/// to start. Other moves cost −1.
pub fn cliff_walking(gamma: f64) -> Result<Mdp> {
    let id = |r: usize, c: usize| r * CLIFF_COLS + c;
    let start = id(CLIFF_ROWS - 1, 0);
    let goal = id(CLIFF_ROWS - 1, CLIFF_COLS - 1);
    let is_cliff = |r: usize, c: usize| r == CLIFF_ROWS - 1 && c > 0 && c < CLIFF_COLS - 1;
    let mut transitions = Vec::with_capacity(CLIFF_ROWS * CLIFF_COLS * 4);
    for r in 0..CLIFF_ROWS {
        for c in 0..CLIFF_COLS {
            for (dr, dc) in GRID_MOVES {
                if id(r, c) == goal {
                    transitions.push(FiniteDist::dirac((goal, 0.0)));
                    continue;
                }
                if is_cliff(r, c) {
                    // never occupied; treated like a fall
                    transitions.push(FiniteDist::dirac((start, -100.0)));
                    continue;
                }
                let nr = (r as isize + dr).clamp(0, CLIFF_ROWS as isize - 1) as usize;
                let nc = (c as isize + dc).clamp(0, CLIFF_COLS as isize - 1) as usize;
                let outcome = if is_cliff(nr, nc) { (start, -100.0) } else { (id(nr, nc), -1.0) };
                transitions.push(FiniteDist::dirac(outcome));
            }
        }
    }
    Mdp::new(CLIFF_ROWS * CLIFF_COLS, 4, transitions, gamma, &[goal], FiniteDist::dirac(start))
}

/// A left-to-right chain: state `i` moves to `i + 1` with reward
/// `rewards[i]`; state `n = rewards.len()` is terminal.
pub fn chain_mrp(rewards: &[f64], gamma: f64) -> Result<Mrp> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::Config("a chain needs at least one reward".into()));
    }
    let mut transitions: Vec<_> = rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| FiniteDist::dirac((i + 1, r)))
        .collect();
    transitions.push(FiniteDist::dirac((n, 0.0)));
    Mrp::new(n + 1, transitions, gamma, &[n], FiniteDist::dirac(0))
}

pub const GO: Action = 0;
pub const STAY: Action = 1;

/// Two states: `GO` moves 0 → 1 with reward 1, `STAY` keeps 0 with reward 0,
/// and state 1 is terminal.
pub fn two_state_chain(gamma: f64) -> Result<Mdp> {
    let transitions = vec![
        FiniteDist::dirac((1, 1.0)),
        FiniteDist::dirac((0, 0.0)),
        FiniteDist::dirac((1, 0.0)),
        FiniteDist::dirac((1, 0.0)),
    ];
    Mdp::new(2, 2, transitions, gamma, &[1], FiniteDist::dirac(0))
}

/// Random dense MDP without terminal states; each `(s, a)` reaches one to
/// three successors with rewards in `[-1, 1]`.
pub fn random_mdp(rng: &mut RngState, n_states: usize, n_actions: usize, gamma: f64) -> Result<Mdp> {
    let mut transitions = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let k = 1 + rng.index(3);
        let atoms: Vec<((State, f64), f64)> = (0..k)
            .map(|_| {
                let s2 = rng.index(n_states);
                let r = (rng.uniform_in(-1.0, 1.0) * 8.0).round() / 8.0;
                ((s2, r), 0.1 + rng.uniform())
            })
            .collect();
        transitions.push(FiniteDist::from_weights(atoms)?);
    }
    let start = FiniteDist::uniform(0..n_states)?;
    Mdp::new(n_states, n_actions, transitions, gamma, &[], start)
}

/// Comb state between environment steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpPosition {
    pub state: State,
    pub t: usize,
}

/// Comb state between continuation and step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpOutcome {
    pub next: MdpPosition,
    pub done: bool,
}

/// What the environment returns to the agent after an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub reward: f64,
    pub next_state: State,
    /// `next_state` is terminal.
    pub terminal: bool,
    /// The episode ends here (terminal or truncated); the comb resets next.
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeMode {
    /// Reset only on reaching a terminal state.
    Continuing,
    /// Also reset after `max_len` steps.
    Episodic { max_len: usize },
}

pub type MdpComb = EnvComb<MdpPosition, MdpOutcome, State, (), Action, Feedback>;

/// The distributions an [`MdpComb`] samples from.
#[derive(Debug, Clone)]
pub struct MdpKernels {
    mdp: Mdp,
    mode: EpisodeMode,
}

impl MdpKernels {
    pub fn new(mdp: &Mdp, mode: EpisodeMode) -> Self {
        Self { mdp: mdp.clone(), mode }
    }

    pub fn init(&self) -> FiniteDist<(MdpPosition, State)> {
        self.mdp.start().map(|&s| (MdpPosition { state: s, t: 0 }, s))
    }

    /// Law of the continuation after action `a` at `pos`.
    pub fn respond(&self, pos: &MdpPosition, a: Action) -> FiniteDist<(MdpOutcome, Feedback)> {
        self.mdp.transition(pos.state, a).map(|&(s2, r)| self.outcome(pos, s2, r))
    }

    /// Law of the next position; a reset iff the episode is done.
    pub fn advance(&self, out: &MdpOutcome) -> FiniteDist<(MdpPosition, State)> {
        if out.done {
            self.init()
        } else {
            FiniteDist::dirac((out.next, out.next.state))
        }
    }

    fn outcome(&self, pos: &MdpPosition, s2: State, r: f64) -> (MdpOutcome, Feedback) {
        let terminal = self.mdp.is_terminal(s2);
        let truncated = matches!(self.mode, EpisodeMode::Episodic { max_len } if pos.t + 1 >= max_len);
        let done = terminal || truncated;
        let outcome = MdpOutcome {
            next: MdpPosition { state: s2, t: pos.t + 1 },
            done,
        };
        let fb = Feedback {
            reward: r,
            next_state: s2,
            terminal,
            done,
        };
        (outcome, fb)
    }
}

/// Online environment for an MDP.
///
/// Draws: the initial state and every reset take one draw from the start
/// distribution; each continuation takes one draw from the transition law;
/// a step that does not reset takes none. The discount plays no part here.
pub fn mdp_to_comb(mdp: &Mdp, mode: EpisodeMode) -> MdpComb {
    let kernels = MdpKernels::new(mdp, mode);
    let k2 = kernels.clone();
    EnvComb::new(
        kernels.init(),
        move |pos: &MdpPosition, &a: &Action, rng: &mut RngState| {
            let (s2, r) = kernels.mdp.transition(pos.state, a).sample(rng);
            kernels.outcome(pos, s2, r)
        },
        move |out: &MdpOutcome, _: (), rng: &mut RngState| {
            if out.done {
                let s0 = k2.mdp.start().sample(rng);
                (MdpPosition { state: s0, t: 0 }, s0)
            } else {
                (out.next, out.next.state)
            }
        },
    )
}

/// Bandit comb: no observation, no state, the continuation is the arm's
/// reward distribution.
pub type BanditComb = EnvComb<(), (), (), (), Action, f64>;

pub fn multi_armed_bandit(arms: Vec<FiniteDist<f64>>) -> Result<BanditComb> {
    if arms.is_empty() {
        return Err(Error::Config("a bandit needs at least one arm".into()));
    }
    Ok(EnvComb::new(
        FiniteDist::dirac(((), ())),
        move |_: &(), &a: &Action, rng: &mut RngState| ((), arms[a].sample(rng)),
        |_: &(), _: (), _: &mut RngState| ((), ()),
    ))
}

/// Contextual bandit comb: the state is a context drawn afresh every step and
/// shown to the agent; the reward depends on context and action.
pub type ContextualComb = EnvComb<State, (), State, (), Action, f64>;

pub fn contextual_bandit(
    contexts: FiniteDist<State>,
    payoff: Vec<Vec<FiniteDist<f64>>>,
) -> Result<ContextualComb> {
    if payoff.is_empty() || payoff.iter().any(|row| row.is_empty()) {
        return Err(Error::Config("contextual bandit needs a payoff for every context".into()));
    }
    if contexts.iter().any(|(s, _)| *s >= payoff.len()) {
        return Err(Error::Config("context outside the payoff table".into()));
    }
    let init = contexts.map(|&s| (s, s));
    Ok(EnvComb::new(
        init,
        move |&s: &State, &a: &Action, rng: &mut RngState| ((), payoff[s][a].sample(rng)),
        move |_: &(), _: (), rng: &mut RngState| {
            let s = contexts.sample(rng);
            (s, s)
        },
    ))
}

/// Offline comb over logged `(s, a, f)` records, sampled uniformly.
///
/// The comb state is the current record; the continuation ignores the agent's
/// action and returns the logged action with its feedback. The initial state
/// and each step draw one record (one draw each, via [`FiniteDist::sample`] on
/// the uniform distribution over record indices).
pub type OfflineComb<F> = EnvComb<(State, Action, F), (), State, (), Action, (Action, F)>;

pub fn offline_env<F>(dataset: Vec<(State, Action, F)>) -> Result<OfflineComb<F>>
where
    F: Clone + PartialEq + Send + Sync + 'static,
{
    if dataset.is_empty() {
        return Err(Error::Config("offline dataset is empty".into()));
    }
    let picker = FiniteDist::uniform(0..dataset.len())?;
    let init = picker.map(|&i| (dataset[i].clone(), dataset[i].0));
    Ok(EnvComb::new(
        init,
        |(_, a, f): &(State, Action, F), _: &Action, _: &mut RngState| ((), (*a, f.clone())),
        move |_: &(), _: (), rng: &mut RngState| {
            let record = dataset[picker.sample(rng)].clone();
            let s = record.0;
            (record, s)
        },
    ))
}
