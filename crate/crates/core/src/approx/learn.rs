//! Semi-gradient Q updates, softmax policies and actor-critic, wired like
//! the tabular learners: a model lens over network parameters, a gradient
//! step as update rule, and the MDP comb.

use crate::algorithms::{
    check_unit, policy_agent, run_loop_1, run_loop_2, train, Budget, BudgetMeter, LoopCursor, ModelLens, Params,
    ReportUnit, StepLog, TrainReport, UpdateRule,
};
use crate::bellman::QTable;
use crate::dist::FiniteDist;
use crate::error::{Error, Result};
use crate::iteration::IterationData;
use crate::mdp::{mdp_to_comb, Action, EpisodeMode, Feedback, Mdp, Policy, State, Transition};
use crate::rng::RngState;

use super::net::{Init, ParamVector, QNetwork};
use super::tape::{grad, Tape, Var};

impl Params for ParamVector {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        ParamVector::max_abs_diff(self, other)
    }
}

/// Which bootstrap the TD target uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetRule {
    /// `Q(s', a')` for the sampled next action.
    Sarsa,
    /// `max_a' Q(s', a')`.
    QLearning,
    /// `E_{a'} Q(s', a')` under ε-greedy in the current network.
    ExpectedSarsa { epsilon: f64 },
}

/// A transition with the next action when one was chosen, and whether `s'`
/// is terminal (its bootstrap is then zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetSample {
    pub t: Transition,
    pub a_next: Option<Action>,
    pub terminal: bool,
}

fn one_row(values: &[f64]) -> QTable {
    QTable::from_fn(1, values.len(), |_, a| values[a])
}

fn bootstrap(net: &QNetwork, theta: &ParamVector, x: &NetSample, rule: TargetRule) -> Result<f64> {
    if x.terminal {
        return Ok(0.0);
    }
    let row = one_row(&net.eval(theta, x.t.s_next));
    Ok(match rule {
        TargetRule::Sarsa => {
            let a = x.a_next.ok_or_else(|| Error::Config("sarsa targets need the next action".into()))?;
            row.get(0, a)
        }
        TargetRule::QLearning => row.max(0),
        TargetRule::ExpectedSarsa { epsilon } => {
            let pi = Policy::EpsilonGreedy { q: row.clone(), epsilon };
            pi.action_dist(0).expect(|&a| row.get(0, a))
        }
    })
}

/// `G = r + γ·bootstrap`, evaluated at the current parameters.
pub fn td_target(net: &QNetwork, theta: &ParamVector, x: &NetSample, gamma: f64, rule: TargetRule) -> Result<f64> {
    Ok(x.t.r + gamma * bootstrap(net, theta, x, rule)?)
}

/// `∇_θ (Q_θ(s, a) − G)²` with `G` held constant.
pub fn semi_gradient(net: &QNetwork, theta: &ParamVector, x: &NetSample, gamma: f64, rule: TargetRule) -> Result<Vec<f64>> {
    let g = td_target(net, theta, x, gamma, rule)?;
    let (_, d) = grad(theta.values(), |tape, leaves| -> Result<Var> {
        let q = net.eval_tape(tape, leaves, x.t.s)[x.t.a];
        Ok(tape.square(tape.shift(q, -g)))
    })?;
    Ok(d)
}

/// `θ − (α/2)·∇L`. For the squared TD loss the factor two cancels, so a
/// one-hot linear network moves its `(s, a)` coordinate by `α·(G − Q)`,
/// the tabular step.
pub fn sgd_step(theta: &ParamVector, loss_grad: &[f64], alpha: f64) -> ParamVector {
    theta.add_scaled(-(alpha / 2.0), loss_grad)
}

pub fn semi_gradient_q_update(
    net: &QNetwork,
    theta: &ParamVector,
    x: &NetSample,
    alpha: f64,
    gamma: f64,
    rule: TargetRule,
) -> Result<ParamVector> {
    Ok(sgd_step(theta, &semi_gradient(net, theta, x, gamma, rule)?, alpha))
}

/// Like [`semi_gradient_q_update`] but differentiating through the target
/// as well (the greedy entry for Q-learning, fixed weights for Expected
/// SARSA).
pub fn full_gradient_q_update(
    net: &QNetwork,
    theta: &ParamVector,
    x: &NetSample,
    alpha: f64,
    gamma: f64,
    rule: TargetRule,
) -> Result<ParamVector> {
    let (_, d) = grad(theta.values(), |tape: &Tape, leaves| -> Result<Var> {
        let q = net.eval_tape(tape, leaves, x.t.s)[x.t.a];
        let boot = if x.terminal {
            tape.var(0.0)
        } else {
            let next = net.eval_tape(tape, leaves, x.t.s_next);
            let values: Vec<f64> = next.iter().map(|v| v.value()).collect();
            match rule {
                TargetRule::Sarsa => {
                    next[x.a_next.ok_or_else(|| Error::Config("sarsa targets need the next action".into()))?]
                }
                TargetRule::QLearning => next[crate::mdp::argmax(&values)],
                TargetRule::ExpectedSarsa { epsilon } => {
                    let pi = Policy::EpsilonGreedy {
                        q: one_row(&values),
                        epsilon,
                    };
                    let weights: Vec<f64> = (0..values.len()).map(|a| pi.action_dist(0).prob(&a)).collect();
                    tape.dot_const(&weights, &next)
                }
            }
        };
        let target = tape.shift(tape.scale(boot, gamma), x.t.r);
        Ok(tape.square(tape.sub(q, target)))
    })?;
    Ok(sgd_step(theta, &d, alpha))
}

/// `p(a) ∝ exp(net_θ(s)[a] / τ)`, with the maximum subtracted first.
pub fn softmax_policy(net: &QNetwork, theta: &ParamVector, s: State, temperature: f64) -> Result<FiniteDist<Action>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let q = one_row(&net.eval(theta, s));
    Ok(Policy::Softmax { q, temperature }.action_dist(0))
}

/// A softmax actor over logits and a scalar critic on the same states.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    actor: QNetwork,
    critic: QNetwork,
}

/// Actor parameters `θ` and critic parameters `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcParams {
    pub actor: ParamVector,
    pub critic: ParamVector,
}

impl Params for AcParams {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.actor
            .max_abs_diff(&other.actor)
            .max(self.critic.max_abs_diff(&other.critic))
    }
}

/// Unscaled update directions; the rule multiplies by the step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct AcDirection {
    /// `r − V_ω(s)`.
    pub advantage: f64,
    /// `∇_θ log π_θ(s, a)`.
    pub score: Vec<f64>,
    /// `r + γ·V_ω(s') − V_ω(s)`.
    pub td_error: f64,
    /// `∇_ω V_ω(s)`.
    pub value_grad: Vec<f64>,
}

impl ActorCritic {
    pub fn new(actor: QNetwork, critic: QNetwork) -> Result<Self> {
        if critic.n_actions() != 1 {
            return Err(Error::Config("the critic must have a single output".into()));
        }
        if critic.n_states() != actor.n_states() {
            return Err(Error::Config("actor and critic must cover the same states".into()));
        }
        Ok(Self { actor, critic })
    }

    /// Linear actor and critic on one-hot state features.
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        Self::new(QNetwork::tabular(n_states, n_actions), QNetwork::tabular(n_states, 1)).expect("matching networks")
    }

    pub fn actor(&self) -> &QNetwork {
        &self.actor
    }

    pub fn critic(&self) -> &QNetwork {
        &self.critic
    }

    pub fn init(&self, init: Init, seed: u64) -> AcParams {
        AcParams {
            actor: self.actor.init(init, seed),
            // a different sub-seed keeps the two initialisations independent
            critic: self.critic.init(init, seed.wrapping_add(1)),
        }
    }

    pub fn policy(&self, theta: &ParamVector, s: State) -> FiniteDist<Action> {
        softmax_policy(&self.actor, theta, s, 1.0).expect("unit temperature")
    }

    /// The actor as a softmax policy over every state.
    pub fn deploy(&self, theta: &ParamVector) -> Policy {
        Policy::Softmax {
            q: self.actor.table(theta),
            temperature: 1.0,
        }
    }

    pub fn value(&self, omega: &ParamVector, s: State) -> f64 {
        self.critic.eval(omega, s)[0]
    }

    /// `∇_θ log π_θ(s, a)`.
    pub fn score(&self, theta: &ParamVector, s: State, a: Action) -> Vec<f64> {
        grad(theta.values(), |tape, leaves| -> Result<Var> {
            Ok(tape.log_softmax(&self.actor.eval_tape(tape, leaves, s))[a])
        })
        .expect("supported ops")
        .1
    }

    pub fn value_grad(&self, omega: &ParamVector, s: State) -> Vec<f64> {
        grad(omega.values(), |tape, leaves| -> Result<Var> { Ok(self.critic.eval_tape(tape, leaves, s)[0]) })
            .expect("supported ops")
            .1
    }

    pub fn direction(&self, p: &AcParams, x: &NetSample, gamma: f64) -> AcDirection {
        let t = &x.t;
        let v = self.value(&p.critic, t.s);
        let v_next = if x.terminal { 0.0 } else { self.value(&p.critic, t.s_next) };
        AcDirection {
            advantage: t.r - v,
            score: self.score(&p.actor, t.s, t.a),
            td_error: t.r + gamma * v_next - v,
            value_grad: self.value_grad(&p.critic, t.s),
        }
    }
}

fn ac_step(p: &AcParams, d: &AcDirection, alpha_actor: f64, alpha_critic: f64) -> AcParams {
    AcParams {
        actor: p.actor.add_scaled(alpha_actor * d.advantage, &d.score),
        critic: p.critic.add_scaled(alpha_critic * d.td_error, &d.value_grad),
    }
}

/// `θ += α_actor·(r − V_ω(s))·∇_θ log π_θ(s, a)` and
/// `ω += α_critic·(r + γ·V_ω(s') − V_ω(s))·∇_ω V_ω(s)`.
pub fn actor_critic_update(
    ac: &ActorCritic,
    p: &AcParams,
    x: &NetSample,
    alpha_actor: f64,
    alpha_critic: f64,
    gamma: f64,
) -> AcParams {
    ac_step(p, &ac.direction(p, x, gamma), alpha_actor, alpha_critic)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub rule: TargetRule,
    pub budget: Budget,
    pub max_len: usize,
    pub init: Init,
    pub seed: u64,
    pub record_trace: bool,
}

impl DqnConfig {
    pub fn new(budget: Budget, seed: u64) -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            gamma: 0.9,
            rule: TargetRule::QLearning,
            budget,
            max_len: 1000,
            init: Init::Uniform(0.1),
            seed,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha, false)?;
        check_unit("epsilon", self.epsilon, true)?;
        check_unit("gamma", self.gamma, true)?;
        if let TargetRule::ExpectedSarsa { epsilon } = self.rule {
            check_unit("epsilon", epsilon, true)?;
        }
        validate_run(self.max_len, self.init)
    }
}

fn validate_run(max_len: usize, init: Init) -> Result<()> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    if let Init::Uniform(scale) = init {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("init scale must be finite and non-negative, got {scale}")));
        }
    }
    Ok(())
}

fn check_shape(mdp: &Mdp, net: &QNetwork, n_actions: usize) -> Result<()> {
    if net.n_states() != mdp.n_states() || n_actions != mdp.n_actions() {
        return Err(Error::Config(format!(
            "network covers {} states and {} actions, the MDP has {} and {}",
            net.n_states(),
            n_actions,
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

fn log(fb: &Feedback) -> StepLog {
    StepLog {
        reward: fb.reward,
        env_steps: 1,
        closes_row: fb.done,
    }
}

fn gradient_rule<Theta: Clone + PartialEq + 'static, Delta: 'static>(
    theta0: Theta,
    step: impl Fn(&Theta, &Delta) -> Theta + Send + Sync + 'static,
) -> UpdateRule<Theta, Theta, Delta> {
    UpdateRule::new(IterationData::from_state(
        theta0.clone(),
        theta0,
        move |theta: &Theta, d: Delta, _: &mut RngState| {
            let next = step(theta, &d);
            (next.clone(), next)
        },
    ))
}

/// Semi-gradient TD control with a Q-network.
///
/// The model deploys ε-greedy in the network's values and learns `∇L`; the
/// update rule is the SGD step. Draws are those of the tabular learner with
/// the same target rule.
pub fn dqn_train(mdp: &Mdp, net: &QNetwork, cfg: &DqnConfig) -> Result<TrainReport<ParamVector, NetSample>> {
    cfg.validate()?;
    check_shape(mdp, net, net.n_actions())?;
    let (gamma, epsilon, rule, alpha) = (cfg.gamma, cfg.epsilon, cfg.rule, cfg.alpha);
    let (deploy_net, learn_net) = (net.clone(), net.clone());
    let model = ModelLens::new(
        move |theta: &ParamVector| Policy::EpsilonGreedy {
            q: deploy_net.table(theta),
            epsilon,
        },
        move |theta: &ParamVector, x: NetSample| {
            semi_gradient(&learn_net, theta, &x, gamma, rule).expect("validated target rule")
        },
    );
    let update = gradient_rule(net.init(cfg.init, cfg.seed), move |theta: &ParamVector, g: &Vec<f64>| {
        sgd_step(theta, g, alpha)
    });
    let env = mdp_to_comb(mdp, EpisodeMode::Episodic { max_len: cfg.max_len });
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    let mut rng = RngState::new(cfg.seed);
    Ok(train(
        &update,
        &model,
        ReportUnit::Episode,
        cfg.seed,
        cfg.record_trace,
        |pi, _, rng| {
            if meter.exhausted() {
                return None;
            }
            let (x, fb) = if rule == TargetRule::Sarsa {
                let (x, fb) = run_loop_2(&env, &policy_agent(pi), &mut cursor, rng);
                (
                    NetSample {
                        t: x.transition(),
                        a_next: Some(x.a_next),
                        terminal: fb.terminal,
                    },
                    fb,
                )
            } else {
                let (t, fb) = run_loop_1(&env, &policy_agent(pi), &mut cursor, rng);
                (
                    NetSample {
                        t,
                        a_next: None,
                        terminal: fb.terminal,
                    },
                    fb,
                )
            };
            meter.tick(fb.done);
            Some((x, log(&fb)))
        },
        &mut rng,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcConfig {
    pub alpha_actor: f64,
    pub alpha_critic: f64,
    pub gamma: f64,
    pub budget: Budget,
    pub max_len: usize,
    pub init: Init,
    pub seed: u64,
    pub record_trace: bool,
}

impl AcConfig {
    pub fn new(budget: Budget, seed: u64) -> Self {
        Self {
            alpha_actor: 0.1,
            alpha_critic: 0.1,
            gamma: 0.9,
            budget,
            max_len: 1000,
            init: Init::Uniform(0.1),
            seed,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        check_unit("alpha_actor", self.alpha_actor, false)?;
        check_unit("alpha_critic", self.alpha_critic, false)?;
        check_unit("gamma", self.gamma, true)?;
        validate_run(self.max_len, self.init)
    }
}

/// One-step actor-critic: the deployed policy is the actor's softmax, the
/// backward pass returns the actor and critic directions.
///
/// Draws per step: start or reset when due, action, transition.
pub fn actor_critic_train(mdp: &Mdp, ac: &ActorCritic, cfg: &AcConfig) -> Result<TrainReport<AcParams, NetSample>> {
    cfg.validate()?;
    check_shape(mdp, ac.actor(), ac.actor().n_actions())?;
    let (gamma, alpha_actor, alpha_critic) = (cfg.gamma, cfg.alpha_actor, cfg.alpha_critic);
    let (deploy_ac, learn_ac) = (ac.clone(), ac.clone());
    let model = ModelLens::new(
        move |p: &AcParams| deploy_ac.deploy(&p.actor),
        move |p: &AcParams, x: NetSample| learn_ac.direction(p, &x, gamma),
    );
    let update = gradient_rule(ac.init(cfg.init, cfg.seed), move |p: &AcParams, d: &AcDirection| {
        ac_step(p, d, alpha_actor, alpha_critic)
    });
    let env = mdp_to_comb(mdp, EpisodeMode::Episodic { max_len: cfg.max_len });
    let mut cursor = LoopCursor::new();
    let mut meter = BudgetMeter::new(cfg.budget);
    let mut rng = RngState::new(cfg.seed);
    Ok(train(
        &update,
        &model,
        ReportUnit::Episode,
        cfg.seed,
        cfg.record_trace,
        |pi, _, rng| {
            if meter.exhausted() {
                return None;
            }
            let (t, fb) = run_loop_1(&env, &policy_agent(pi), &mut cursor, rng);
            meter.tick(fb.done);
            let x = NetSample {
                t,
                a_next: None,
                terminal: fb.terminal,
            };
            Some((x, log(&fb)))
        },
        &mut rng,
    ))
}
