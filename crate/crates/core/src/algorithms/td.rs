//! Tabular control and prediction: SARSA, Q-learning, Expected SARSA,
//! n-step SARSA, Monte Carlo, TD(0).
//!
//! All of them share the wiring in the parent module. They differ in the
//! sample the environment side produces and in the model's backward pass.

use std::collections::VecDeque;

use crate::bellman::{
    blend, episode_returns, exp_sarsa_target, mc_first_visit_targets, n_step_target, q_learning_target, sarsa_target,
    NStepFragment, QDelta, QTable, ValueFn,
};
use crate::error::{Error, Result};
use crate::iteration::{FnAgent, IterationData};
use crate::mdp::{
    mdp_to_comb, Action, Episode, EpisodeMode, Feedback, Mdp, MdpComb, Mrp, Policy, SarsaSample,
    State, Transition,
};
use crate::rng::RngState;

use super::{
    policy_agent, run_loop_1, run_loop_2, tabular_rule, train, Budget, BudgetMeter, LoopCursor, ModelLens,
    ReportUnit, StepLog, TdConfig, TrainReport, UpdateRule,
};

fn epsilon_greedy(epsilon: f64) -> impl Fn(&QTable) -> Policy + Send + Sync + 'static {
    move |q: &QTable| Policy::EpsilonGreedy { q: q.clone(), epsilon }
}

fn comb(mdp: &Mdp, cfg: &TdConfig) -> MdpComb {
    mdp_to_comb(mdp, EpisodeMode::Episodic { max_len: cfg.max_len })
}

fn log(fb: &Feedback) -> StepLog {
    StepLog {
        reward: fb.reward,
        env_steps: 1,
        closes_row: fb.done,
    }
}

fn run_tabular<Sample: Clone + 'static>(
    mdp: &Mdp,
    cfg: &TdConfig,
    model: &ModelLens<QTable, Vec<QDelta>, Sample>,
    env: impl FnMut(&Policy, &QTable, &mut RngState) -> Option<(Sample, StepLog)>,
) -> Result<TrainReport<QTable, Sample>> {
    cfg.validate()?;
    let rule = tabular_rule(QTable::initial(mdp, cfg.q_init), cfg.alpha);
    let mut rng = RngState::new(cfg.seed);
    Ok(train(&rule, model, ReportUnit::Episode, cfg.seed, cfg.record_trace, env, &mut rng))
}

/// On-policy SARSA with two agent copies per step.
///
/// Draws per step: start or reset when due, action at `s` at the start of an
/// episode, transition, action at `s'`.
pub fn sarsa(mdp: &Mdp, cfg: &TdConfig) -> Result<TrainReport<QTable, SarsaSample>> {
    let gamma = cfg.gamma;
    let model = ModelLens::new(epsilon_greedy(cfg.epsilon), move |q: &QTable, x: SarsaSample| {
        vec![sarsa_target(gamma, q, &x)]
    });
    let env = comb(mdp, cfg);
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    run_tabular(mdp, cfg, &model, |pi, _, rng| {
        if meter.exhausted() {
            return None;
        }
        let (x, fb) = run_loop_2(&env, &policy_agent(pi), &mut cursor, rng);
        meter.tick(fb.done);
        Some((x, log(&fb)))
    })
}

/// SARSA with one agent copy: the model receives `(s, a, r, s')` and picks
/// `a'` with its own copy of the deployed policy.
///
/// The model's backward pass returns the law of the target over `a'`; the
/// update rule draws from it and commits the drawn action as the next
/// executed one. The draws land where [`sarsa`] makes them, so both
/// presentations produce the same tables.
pub fn sarsa_internal_policy(
    mdp: &Mdp,
    cfg: &TdConfig,
) -> Result<TrainReport<(QTable, Option<Action>), (Transition, bool)>> {
    cfg.validate()?;
    let (gamma, epsilon, alpha) = (cfg.gamma, cfg.epsilon, cfg.alpha);
    type Theta = (QTable, Option<Action>);
    type Delta = (crate::dist::FiniteDist<(Action, QDelta)>, bool);
    let model: ModelLens<Theta, Delta, (Transition, bool)> = ModelLens::new(
        move |(q, _): &Theta| Policy::EpsilonGreedy { q: q.clone(), epsilon },
        move |(q, _): &Theta, (t, done): (Transition, bool)| {
            let internal = Policy::EpsilonGreedy { q: q.clone(), epsilon };
            let targets = internal.action_dist(t.s_next).map(|&a_next| {
                let x = SarsaSample {
                    s: t.s,
                    a: t.a,
                    r: t.r,
                    s_next: t.s_next,
                    a_next,
                };
                (a_next, sarsa_target(gamma, q, &x))
            });
            (targets, done)
        },
    );
    let theta0: Theta = (QTable::initial(mdp, cfg.q_init), None);
    let rule = UpdateRule::new(IterationData::from_state(
        theta0.clone(),
        theta0,
        move |(q, _): &Theta, (targets, done): Delta, rng: &mut RngState| {
            let (a_next, d) = targets.sample(rng);
            let next = (q.apply_delta(&d, alpha), (!done).then_some(a_next));
            (next.clone(), next)
        },
    ));
    let env = comb(mdp, cfg);
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    let mut rng = RngState::new(cfg.seed);
    Ok(train(
        &rule,
        &model,
        ReportUnit::Episode,
        cfg.seed,
        cfg.record_trace,
        |pi, (_, committed), rng| {
            if meter.exhausted() {
                return None;
            }
            cursor.commit(*committed);
            let (t, fb) = run_loop_1(&env, &policy_agent(pi), &mut cursor, rng);
            meter.tick(fb.done);
            Some(((t, fb.done), log(&fb)))
        },
        &mut rng,
    ))
}

/// Off-policy Q-learning: ε-greedy behaviour, greedy target.
///
/// Draws per step: start or reset when due, action, transition.
pub fn q_learning(mdp: &Mdp, cfg: &TdConfig) -> Result<TrainReport<QTable, Transition>> {
    let gamma = cfg.gamma;
    let model = ModelLens::new(epsilon_greedy(cfg.epsilon), move |q: &QTable, t: Transition| {
        vec![q_learning_target(gamma, q, &t)]
    });
    one_copy(mdp, cfg, &model)
}

/// Expected SARSA with the deployed ε-greedy policy as target policy.
///
/// Same draws as [`q_learning`].
pub fn expected_sarsa(mdp: &Mdp, cfg: &TdConfig) -> Result<TrainReport<QTable, Transition>> {
    let (gamma, epsilon) = (cfg.gamma, cfg.epsilon);
    let model = ModelLens::new(epsilon_greedy(epsilon), move |q: &QTable, t: Transition| {
        let target = Policy::EpsilonGreedy { q: q.clone(), epsilon };
        vec![exp_sarsa_target(gamma, q, &t, &target)]
    });
    one_copy(mdp, cfg, &model)
}

fn one_copy(
    mdp: &Mdp,
    cfg: &TdConfig,
    model: &ModelLens<QTable, Vec<QDelta>, Transition>,
) -> Result<TrainReport<QTable, Transition>> {
    let env = comb(mdp, cfg);
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    run_tabular(mdp, cfg, model, |pi, _, rng| {
        if meter.exhausted() {
            return None;
        }
        let (t, fb) = run_loop_1(&env, &policy_agent(pi), &mut cursor, rng);
        meter.tick(fb.done);
        Some((t, log(&fb)))
    })
}

/// n-step SARSA over a sliding window of [`run_loop_2`] steps.
///
/// A full window yields one fragment for its oldest entry. When the episode
/// ends, every remaining entry yields a fragment ending at the last state
/// (shorter than `n`). All fragments of one step are targeted against the
/// same table and applied in window order. Draws are those of [`sarsa`].
pub fn n_step_sarsa(mdp: &Mdp, n: usize, cfg: &TdConfig) -> Result<TrainReport<QTable, Vec<NStepFragment>>> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let gamma = cfg.gamma;
    let model = ModelLens::new(epsilon_greedy(cfg.epsilon), move |q: &QTable, frags: Vec<NStepFragment>| {
        frags
            .iter()
            .map(|f| n_step_target(gamma, q, f).expect("windows hold at least one reward"))
            .collect()
    });
    let env = comb(mdp, cfg);
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    let mut window: VecDeque<(State, Action, f64)> = VecDeque::with_capacity(n);
    run_tabular(mdp, cfg, &model, |pi, _, rng| {
        if meter.exhausted() {
            return None;
        }
        let (x, fb) = run_loop_2(&env, &policy_agent(pi), &mut cursor, rng);
        meter.tick(fb.done);
        window.push_back((x.s, x.a, x.r));
        let fragment = |w: &VecDeque<(State, Action, f64)>| {
            let (s, a, _) = w[0];
            NStepFragment {
                s,
                a,
                rewards: w.iter().map(|e| e.2).collect(),
                s_last: x.s_next,
                a_last: x.a_next,
            }
        };
        let mut frags = Vec::new();
        if fb.done {
            while !window.is_empty() {
                frags.push(fragment(&window));
                window.pop_front();
            }
        } else if window.len() == n {
            frags.push(fragment(&window));
            window.pop_front();
        }
        Some((frags, log(&fb)))
    })
}

/// Play one episode with a fixed agent. Draws are those of repeated
/// [`run_loop_1`] steps.
fn rollout<A>(env: &MdpComb, agent: &A, cursor: &mut LoopCursor, rng: &mut RngState) -> Episode
where
    A: crate::iteration::Agent<State, (), Action, Feedback>,
{
    let mut steps = Vec::new();
    loop {
        let (t, fb) = run_loop_1(env, agent, cursor, rng);
        steps.push((t.s, t.a, t.r));
        if fb.done {
            return Episode {
                steps,
                last_state: fb.next_state,
                truncated: !fb.terminal,
            };
        }
    }
}

fn episode_log(ep: &Episode) -> StepLog {
    StepLog {
        reward: ep.undiscounted_return(),
        env_steps: ep.steps.len(),
        closes_row: true,
    }
}

/// First-visit Monte Carlo control with constant α, one update batch per
/// episode. A step budget is checked at episode boundaries.
pub fn mc_control(mdp: &Mdp, cfg: &TdConfig) -> Result<TrainReport<QTable, Episode>> {
    let gamma = cfg.gamma;
    let model = ModelLens::new(epsilon_greedy(cfg.epsilon), move |_: &QTable, ep: Episode| {
        mc_first_visit_targets(gamma, &ep).expect("rollouts are never empty")
    });
    let env = comb(mdp, cfg);
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    run_tabular(mdp, cfg, &model, |pi, _, rng| {
        if meter.exhausted() {
            return None;
        }
        let ep = rollout(&env, &policy_agent(pi), &mut cursor, rng);
        for i in 0..ep.steps.len() {
            meter.tick(i + 1 == ep.steps.len());
        }
        let log = episode_log(&ep);
        Some((ep, log))
    })
}

/// Step size for prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Constant(f64),
    /// `1 / n(s)` after the `n`-th visit to `s`.
    InverseVisits,
}

impl AlphaSchedule {
    fn at(self, visits: u64) -> f64 {
        match self {
            AlphaSchedule::Constant(a) => a,
            AlphaSchedule::InverseVisits => 1.0 / visits as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionConfig {
    pub alpha: AlphaSchedule,
    pub gamma: f64,
    pub budget: Budget,
    pub max_len: usize,
    pub seed: u64,
    pub record_trace: bool,
}

impl PredictionConfig {
    pub fn new(alpha: AlphaSchedule, budget: Budget, seed: u64) -> Self {
        Self {
            alpha,
            gamma: 0.9,
            budget,
            max_len: 1000,
            seed,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if let AlphaSchedule::Constant(a) = self.alpha {
            super::check_unit("alpha", a, false)?;
        }
        super::check_unit("gamma", self.gamma, true)?;
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(())
    }
}

/// `V(s) ← V(s) + α·(g − V(s))` per `(s, g)`, with visit counts in the state.
fn value_rule(n_states: usize, schedule: AlphaSchedule) -> UpdateRule<(ValueFn, Vec<u64>), ValueFn, Vec<(State, f64)>> {
    let v0 = ValueFn::zeros(n_states);
    UpdateRule::new(IterationData::from_state(
        (v0.clone(), vec![0; n_states]),
        v0,
        move |(v, visits): &(ValueFn, Vec<u64>), targets: Vec<(State, f64)>, _: &mut RngState| {
            let (mut v, mut visits) = (v.clone(), visits.clone());
            for (s, g) in targets {
                visits[s] += 1;
                v.set(s, blend(v.get(s), g, schedule.at(visits[s])));
            }
            ((v.clone(), visits), v)
        },
    ))
}

/// The observer of a reward process: its one action is taken without a draw.
fn observer() -> impl crate::iteration::Agent<State, (), Action, Feedback> {
    FnAgent {
        act: |_: &State, _: &mut RngState| 0,
        feedback: |_: &State, _: &Action, _: Feedback| (),
    }
}

fn require_single_action(mrp: &Mrp, policy: &Policy) -> Result<()> {
    let valid = (0..mrp.as_mdp().n_states()).all(|s| policy.action_dist(s).iter().all(|(a, _)| *a == 0));
    if valid {
        Ok(())
    } else {
        Err(Error::Config("a reward process only has action 0".into()))
    }
}

/// TD(0) prediction, target `r + γ·V(s')`.
pub fn td0_prediction(mrp: &Mrp, cfg: &PredictionConfig) -> Result<TrainReport<ValueFn, Transition>> {
    td0_prediction_under(mrp, cfg, &Policy::Deterministic(vec![0; mrp.as_mdp().n_states()]))
}

/// TD(0) with an explicitly deployed policy. The observer ignores it, so any
/// valid choice gives the same run.
pub fn td0_prediction_under(
    mrp: &Mrp,
    cfg: &PredictionConfig,
    policy: &Policy,
) -> Result<TrainReport<ValueFn, Transition>> {
    cfg.validate()?;
    require_single_action(mrp, policy)?;
    let mdp = mrp.as_mdp();
    let gamma = cfg.gamma;
    let deployed = policy.clone();
    let model = ModelLens::new(move |_: &ValueFn| deployed.clone(), move |v: &ValueFn, t: Transition| {
        vec![(t.s, t.r + gamma * v.get(t.s_next))]
    });
    let rule = value_rule(mdp.n_states(), cfg.alpha);
    let env = mdp_to_comb(mdp, EpisodeMode::Episodic { max_len: cfg.max_len });
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    let agent = observer();
    let mut rng = RngState::new(cfg.seed);
    Ok(train(
        &rule,
        &model,
        ReportUnit::Episode,
        cfg.seed,
        cfg.record_trace,
        |_, _, rng| {
            if meter.exhausted() {
                return None;
            }
            let (t, fb) = run_loop_1(&env, &agent, &mut cursor, rng);
            meter.tick(fb.done);
            Some((t, log(&fb)))
        },
        &mut rng,
    ))
}

/// First-visit Monte Carlo prediction.
pub fn mc_prediction(mrp: &Mrp, cfg: &PredictionConfig) -> Result<TrainReport<ValueFn, Episode>> {
    mc_prediction_under(mrp, cfg, &Policy::Deterministic(vec![0; mrp.as_mdp().n_states()]))
}

pub fn mc_prediction_under(
    mrp: &Mrp,
    cfg: &PredictionConfig,
    policy: &Policy,
) -> Result<TrainReport<ValueFn, Episode>> {
    cfg.validate()?;
    require_single_action(mrp, policy)?;
    let mdp = mrp.as_mdp();
    let gamma = cfg.gamma;
    let deployed = policy.clone();
    let model = ModelLens::new(move |_: &ValueFn| deployed.clone(), move |_: &ValueFn, ep: Episode| {
        let returns = episode_returns(gamma, &ep).expect("rollouts are never empty");
        let mut seen = Vec::new();
        let mut targets = Vec::new();
        for (t, &(s, _, _)) in ep.steps.iter().enumerate() {
            if !seen.contains(&s) {
                seen.push(s);
                targets.push((s, returns[t]));
            }
        }
        targets
    });
    let rule = value_rule(mdp.n_states(), cfg.alpha);
    let env = mdp_to_comb(mdp, EpisodeMode::Episodic { max_len: cfg.max_len });
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    let agent = observer();
    let mut rng = RngState::new(cfg.seed);
    Ok(train(
        &rule,
        &model,
        ReportUnit::Episode,
        cfg.seed,
        cfg.record_trace,
        |_, _, rng| {
            if meter.exhausted() {
                return None;
            }
            let ep = rollout(&env, &agent, &mut cursor, rng);
            for i in 0..ep.steps.len() {
                meter.tick(i + 1 == ep.steps.len());
            }
            let log = episode_log(&ep);
            Some((ep, log))
        },
        &mut rng,
    ))
}
