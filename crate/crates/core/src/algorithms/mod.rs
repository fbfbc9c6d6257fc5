//! Planning and learning algorithms.
//!
//! Every learner is assembled from the same three pieces:
//!
//! - a [`ModelLens`] from parameters `Θ` to the agent interface, deploying a
//!   policy forwards and turning a sample into an update target backwards;
//! - an [`UpdateRule`], an iteration on `(Θ / ΔΘ)` that applies targets;
//! - an environment comb that, together with the deployed agent, closes the
//!   loop as a continuation `policy -> sample`.
//!
//! The update rule mapped along the model lens is an iteration on the agent
//! interface; running it against the environment continuation is training.
//! The [`oracle`] module holds direct textbook loops that follow the same
//! random draw order, so each assembly can be checked against them exactly.

pub mod bandit;
pub mod dp;
pub mod oracle;
pub mod td;

use crate::bellman::{QDelta, QTable, ValueFn};
use crate::error::{Error, Result};
use crate::iteration::{Agent, FnAgent, IterationData};
use crate::mdp::{sample_action, Action, Feedback, MdpComb, MdpOutcome, MdpPosition, Policy, SarsaSample, State, Transition};
use crate::optic::Lens;
use crate::rng::RngState;

pub use bandit::{bandit_epsilon_greedy, contextual_bandit_agent, BanditConfig};
pub use dp::{
    gpi, gpi_capped, policy_evaluation, policy_evaluation_capped, policy_iteration, policy_iteration_capped,
    value_iteration, value_iteration_capped, DpSolution, MAX_SWEEPS,
};
pub use td::{
    expected_sarsa, mc_control, mc_prediction, mc_prediction_under, n_step_sarsa, q_learning, sarsa,
    sarsa_internal_policy, td0_prediction, td0_prediction_under, AlphaSchedule, PredictionConfig,
};

/// Parameters `Θ` as a lens onto the agent interface: `deploy` forwards,
/// `learn` backwards.
pub struct ModelLens<Theta, Delta, Sample> {
    lens: Lens<Theta, Delta, Policy, Sample>,
}

impl<Theta, Delta, Sample> Clone for ModelLens<Theta, Delta, Sample> {
    fn clone(&self) -> Self {
        Self { lens: self.lens.clone() }
    }
}

impl<Theta: 'static, Delta: 'static, Sample: 'static> ModelLens<Theta, Delta, Sample> {
    pub fn new(
        deploy: impl Fn(&Theta) -> Policy + Send + Sync + 'static,
        learn: impl Fn(&Theta, Sample) -> Delta + Send + Sync + 'static,
    ) -> Self {
        Self {
            lens: Lens::new(deploy, learn),
        }
    }

    pub fn deploy(&self, theta: &Theta) -> Policy {
        self.lens.get(theta)
    }

    pub fn learn(&self, theta: &Theta, sample: Sample) -> Delta {
        self.lens.put(theta, sample)
    }

    pub fn lens(&self) -> &Lens<Theta, Delta, Policy, Sample> {
        &self.lens
    }

    /// The same lens with the parameters shown next to the policy, for logging.
    pub fn observed(&self) -> Lens<Theta, Delta, (Policy, Theta), Sample>
    where
        Theta: Clone,
    {
        let (l1, l2) = (self.lens.clone(), self.lens.clone());
        Lens::new(move |theta: &Theta| (l1.get(theta), theta.clone()), move |theta, x| l2.put(theta, x))
    }
}

/// An iteration on `(Θ / ΔΘ)`: emits parameters, consumes update targets.
pub struct UpdateRule<M, Theta, Delta> {
    iteration: IterationData<M, Theta, Delta>,
}

impl<M, Theta, Delta> UpdateRule<M, Theta, Delta>
where
    M: Clone + PartialEq + 'static,
    Theta: Clone + PartialEq + 'static,
    Delta: 'static,
{
    pub fn new(iteration: IterationData<M, Theta, Delta>) -> Self {
        Self { iteration }
    }

    pub fn iteration(&self) -> &IterationData<M, Theta, Delta> {
        &self.iteration
    }

    /// The rule mapped along the (observed) model lens: an iteration on the
    /// agent interface.
    pub fn deploy<Sample: 'static>(
        &self,
        model: &ModelLens<Theta, Delta, Sample>,
    ) -> IterationData<(M, Theta), (Policy, Theta), Sample> {
        self.iteration.map_lens(&model.observed())
    }
}

/// `Q ← Q + α·(G − Q)` entry by entry, targets applied in order.
pub fn tabular_rule(q0: QTable, alpha: f64) -> UpdateRule<QTable, QTable, Vec<QDelta>> {
    UpdateRule::new(IterationData::from_state(
        q0.clone(),
        q0,
        move |q: &QTable, deltas: Vec<QDelta>, _: &mut RngState| {
            let mut q = q.clone();
            for d in &deltas {
                q.apply_delta_in_place(d, alpha);
            }
            (q.clone(), q)
        },
    ))
}

/// Parameters that can report how far an update moved them.
pub trait Params: Clone {
    fn max_abs_diff(&self, other: &Self) -> f64;
}

impl Params for QTable {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        QTable::max_abs_diff(self, other)
    }
}

impl Params for ValueFn {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.distance(other)
    }
}

impl<A: Params, B: Clone> Params for (A, B) {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

/// How long to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Episodes(usize),
    /// Environment steps.
    Steps(usize),
}

/// Hyperparameters shared by the tabular control methods.
#[derive(Debug, Clone, PartialEq)]
pub struct TdConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub budget: Budget,
    /// Episodes are cut off after this many steps.
    pub max_len: usize,
    /// Initial value of non-terminal table entries.
    pub q_init: f64,
    pub seed: u64,
    /// Keep every intermediate table and sample in the report.
    pub record_trace: bool,
}

impl TdConfig {
    pub fn new(budget: Budget, seed: u64) -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            gamma: 0.9,
            budget,
            max_len: 1000,
            q_init: 0.0,
            seed,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha, false)?;
        check_unit("epsilon", self.epsilon, true)?;
        check_unit("gamma", self.gamma, true)?;
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if !self.q_init.is_finite() {
            return Err(Error::Config("q_init must be finite".into()));
        }
        Ok(())
    }
}

/// `value` in `[0, 1]`, or `(0, 1]` when zero is not allowed.
pub(crate) fn check_unit(name: &str, value: f64, allow_zero: bool) -> Result<()> {
    let ok = value <= 1.0 && if allow_zero { value >= 0.0 } else { value > 0.0 };
    if ok {
        Ok(())
    } else {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        Err(Error::Config(format!("{name} must lie in {range}, got {value}")))
    }
}

/// What one report row counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportUnit {
    Episode,
    Step,
}

impl ReportUnit {
    pub fn name(self) -> &'static str {
        match self {
            ReportUnit::Episode => "episode",
            ReportUnit::Step => "step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub index: usize,
    /// Undiscounted reward collected in the row.
    pub ret: f64,
    /// Largest parameter change caused by the row's updates.
    pub max_q_change: f64,
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<Theta, Sample = ()> {
    pub unit: ReportUnit,
    pub rows: Vec<ReportRow>,
    pub params: Theta,
    /// Environment steps taken.
    pub steps: usize,
    pub seed: u64,
    /// Parameters after each update, starting with the initial ones.
    /// Empty unless tracing was requested.
    pub trace: Vec<Theta>,
    /// Samples fed to the model, in order. Empty unless tracing was requested.
    pub samples: Vec<Sample>,
}

impl<Theta, Sample> TrainReport<Theta, Sample> {
    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ret).collect()
    }

    pub fn mean_return(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.rows.iter().map(|r| r.ret).sum::<f64>() / self.rows.len() as f64
        }
    }

    /// CSV with header `episode,return,max_q_change` (or `step,...`).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},return,max_q_change\n", self.unit.name());
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.index, r.ret, r.max_q_change));
        }
        out
    }
}

/// What the environment side reports about one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub reward: f64,
    pub env_steps: usize,
    /// The sample closes a report row.
    pub closes_row: bool,
}

/// Run `rule` against the environment continuation `env` until it declines
/// to produce another sample.
pub fn train<M, Theta, Delta, Sample>(
    rule: &UpdateRule<M, Theta, Delta>,
    model: &ModelLens<Theta, Delta, Sample>,
    unit: ReportUnit,
    seed: u64,
    record_trace: bool,
    mut env: impl FnMut(&Policy, &Theta, &mut RngState) -> Option<(Sample, StepLog)>,
    rng: &mut RngState,
) -> TrainReport<Theta, Sample>
where
    M: Clone + PartialEq + 'static,
    Theta: Params + PartialEq + 'static,
    Delta: 'static,
    Sample: Clone + 'static,
{
    let driven = rule.deploy(model);
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    let mut samples = Vec::new();
    let mut prev: Option<Theta> = None;
    let (mut row_ret, mut row_change, mut row_open, mut closing) = (0.0, 0.0_f64, false, false);
    let mut steps = 0;
    let ((_, last), _) = driven.run_until(
        |(policy, theta): &(Policy, Theta), rng| {
            if let Some(p) = &prev {
                row_change = row_change.max(theta.max_abs_diff(p));
            }
            if record_trace {
                trace.push(theta.clone());
            }
            if closing {
                rows.push(ReportRow {
                    index: rows.len(),
                    ret: row_ret,
                    max_q_change: row_change,
                });
                (row_ret, row_change, row_open, closing) = (0.0, 0.0, false, false);
            }
            prev = Some(theta.clone());
            let (sample, log) = env(policy, theta, rng)?;
            steps += log.env_steps;
            row_ret += log.reward;
            row_open = true;
            closing = log.closes_row;
            if record_trace {
                samples.push(sample.clone());
            }
            Some(sample)
        },
        rng,
    );
    if row_open && closing {
        rows.push(ReportRow {
            index: rows.len(),
            ret: row_ret,
            max_q_change: row_change,
        });
    }
    TrainReport {
        unit,
        rows,
        params: last,
        steps,
        seed,
        trace,
        samples,
    }
}

/// The deployed policy as an agent on `(S / 1) -> (A / F)`. Acting takes
/// one draw.
pub fn policy_agent(policy: &Policy) -> impl Agent<State, (), Action, Feedback> + '_ {
    FnAgent {
        act: move |s: &State, rng: &mut RngState| sample_action(policy, *s, rng),
        feedback: |_: &State, _: &Action, _: Feedback| (),
    }
}

/// Where a closed loop stands between steps.
///
/// The comb step after a continuation is taken lazily, at the start of the
/// next step, so a reset draw always follows every draw of the step that
/// ended the episode.
#[derive(Debug, Clone, Default)]
pub struct LoopCursor {
    at: Option<(MdpPosition, State)>,
    outcome: Option<MdpOutcome>,
    /// Action chosen at the current state by the previous step.
    pending: Option<Action>,
}

impl LoopCursor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current position, starting or advancing the comb if needed.
    pub fn observe(&mut self, env: &MdpComb, rng: &mut RngState) -> (MdpPosition, State) {
        if let Some(out) = self.outcome.take() {
            self.at = Some(env.advance(&out, (), rng));
        }
        *self.at.get_or_insert_with(|| env.start(rng))
    }

    /// The action committed at the current state, if any.
    pub fn pending(&self) -> Option<Action> {
        self.pending
    }

    /// Commit (or clear) the action the next step executes.
    pub fn commit(&mut self, action: Option<Action>) {
        self.pending = action;
    }

    fn record(&mut self, out: MdpOutcome, next_action: Option<Action>) {
        self.at = None;
        self.pending = if out.done { None } else { next_action };
        self.outcome = Some(out);
    }
}

/// One step with a single agent copy: act, then the environment responds.
///
/// Draws: start or reset (if due), action, transition.
pub fn run_loop_1<A>(env: &MdpComb, agent: &A, cursor: &mut LoopCursor, rng: &mut RngState) -> (Transition, Feedback)
where
    A: Agent<State, (), Action, Feedback>,
{
    let (pos, s) = cursor.observe(env, rng);
    let a = match cursor.pending.take() {
        Some(a) => a,
        None => agent.act(&s, rng),
    };
    let (out, fb) = env.respond(&pos, &a, rng);
    agent.feedback(&s, &a, fb);
    cursor.record(out, None);
    let t = Transition {
        s,
        a,
        r: fb.reward,
        s_next: fb.next_state,
    };
    (t, fb)
}

/// One step with two agent copies, on `s` and on `s'`.
///
/// Draws: start or reset (if due), action at `s` unless the previous step
/// already chose it, transition, action at `s'`. The action at `s'` becomes
/// the executed action of the next step unless the episode ended.
pub fn run_loop_2<A>(env: &MdpComb, agent: &A, cursor: &mut LoopCursor, rng: &mut RngState) -> (SarsaSample, Feedback)
where
    A: Agent<State, (), Action, Feedback>,
{
    let (pos, s) = cursor.observe(env, rng);
    let a = match cursor.pending.take() {
        Some(a) => a,
        None => agent.act(&s, rng),
    };
    let (out, fb) = env.respond(&pos, &a, rng);
    agent.feedback(&s, &a, fb);
    let a_next = agent.act(&fb.next_state, rng);
    cursor.record(out, Some(a_next));
    let x = SarsaSample {
        s,
        a,
        r: fb.reward,
        s_next: fb.next_state,
        a_next,
    };
    (x, fb)
}

/// Budget bookkeeping for the environment continuation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BudgetMeter {
    budget: Budget,
    steps: usize,
    episodes: usize,
}

impl BudgetMeter {
    pub(crate) fn new(budget: Budget) -> Self {
        Self {
            budget,
            steps: 0,
            episodes: 0,
        }
    }

    pub(crate) fn exhausted(&self) -> bool {
        match self.budget {
            Budget::Episodes(n) => self.episodes >= n,
            Budget::Steps(n) => self.steps >= n,
        }
    }

    pub(crate) fn tick(&mut self, done: bool) {
        self.steps += 1;
        if done {
            self.episodes += 1;
        }
    }
}
