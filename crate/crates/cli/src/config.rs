//! Experiment configuration: a TOML file with a top-level `seed` and two
//! sections, `[env]` and `[algorithm]`.

use std::fmt;
use std::path::Path;

use lensrl::algorithms::{AlphaSchedule, Budget};
use lensrl::approx::{Activation, TargetRule};
use lensrl::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    env: RawEnv,
    algorithm: RawAlgorithm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    name: String,
    gamma: Option<f64>,
    rewards: Option<Vec<f64>>,
    arms: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    name: String,
    alpha: Option<f64>,
    alpha_schedule: Option<String>,
    alpha_actor: Option<f64>,
    alpha_critic: Option<f64>,
    epsilon: Option<f64>,
    episodes: Option<usize>,
    steps: Option<usize>,
    max_len: Option<usize>,
    q_init: Option<f64>,
    n: Option<usize>,
    m: Option<usize>,
    tol: Option<f64>,
    max_sweeps: Option<usize>,
    target: Option<String>,
    hidden: Option<Vec<usize>>,
    activation: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    CliffWalking,
    Gridworld,
    TwoStateChain,
    ChainMrp { rewards: Vec<f64> },
    Bandit { arms: Vec<f64> },
}

impl EnvSpec {
    pub const NAMES: [(&'static str, &'static str); 5] = [
        ("cliff_walking", "4x12 cliff, start bottom-left, goal bottom-right, -100 for falling"),
        ("gridworld", "4x4 grid, goals in two opposite corners, -1 per step"),
        ("two_state_chain", "state 0 chooses GO (+1, ends) or STAY (+0); state 1 is terminal"),
        ("chain_mrp", "left-to-right reward process; set `rewards`"),
        ("bandit", "multi-armed bandit with deterministic arms; set `arms`"),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::CliffWalking => "cliff_walking",
            EnvSpec::Gridworld => "gridworld",
            EnvSpec::TwoStateChain => "two_state_chain",
            EnvSpec::ChainMrp { .. } => "chain_mrp",
            EnvSpec::Bandit { .. } => "bandit",
        }
    }

    pub fn is_mrp(&self) -> bool {
        matches!(self, EnvSpec::ChainMrp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoKind {
    ValueIteration,
    PolicyIteration,
    Gpi,
    PolicyEvaluation,
    Sarsa,
    QLearning,
    ExpectedSarsa,
    NStepSarsa,
    McControl,
    Td0,
    McPrediction,
    Bandit,
    Dqn,
    ActorCritic,
}

impl AlgoKind {
    pub const ALL: [(AlgoKind, &'static str, &'static str); 14] = [
        (AlgoKind::ValueIteration, "value_iteration", "planning; keys tol, max_sweeps"),
        (AlgoKind::PolicyIteration, "policy_iteration", "planning; keys tol, max_sweeps"),
        (AlgoKind::Gpi, "gpi", "planning; keys m, n, tol, max_sweeps"),
        (AlgoKind::PolicyEvaluation, "policy_evaluation", "prediction on an MRP; keys tol, max_sweeps"),
        (AlgoKind::Sarsa, "sarsa", "control; keys alpha, epsilon, episodes|steps, max_len, q_init"),
        (AlgoKind::QLearning, "q_learning", "control; same keys as sarsa"),
        (AlgoKind::ExpectedSarsa, "expected_sarsa", "control; same keys as sarsa"),
        (AlgoKind::NStepSarsa, "n_step_sarsa", "control; keys as sarsa plus n"),
        (AlgoKind::McControl, "mc_control", "control; same keys as sarsa"),
        (AlgoKind::Td0, "td0", "prediction on an MRP; keys alpha|alpha_schedule, episodes|steps, max_len"),
        (AlgoKind::McPrediction, "mc_prediction", "prediction on an MRP; same keys as td0"),
        (AlgoKind::Bandit, "bandit", "epsilon-greedy on a bandit; keys epsilon, steps, alpha, q_init"),
        (AlgoKind::Dqn, "dqn", "semi-gradient Q-network; keys as sarsa plus target, hidden, activation"),
        (AlgoKind::ActorCritic, "actor_critic", "softmax actor, linear critic; keys alpha_actor, alpha_critic"),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(k, _, _)| *k == self).map(|(_, n, _)| *n).unwrap_or("?")
    }

    fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|(_, n, _)| *n == name)
            .map(|(k, _, _)| *k)
            .ok_or_else(|| Error::Config(format!("algorithm.name: unknown algorithm {name:?}")))
    }

    pub fn is_planning(self) -> bool {
        matches!(self, AlgoKind::ValueIteration | AlgoKind::PolicyIteration | AlgoKind::Gpi | AlgoKind::PolicyEvaluation)
    }

    pub fn is_prediction(self) -> bool {
        matches!(self, AlgoKind::PolicyEvaluation | AlgoKind::Td0 | AlgoKind::McPrediction)
    }
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub env: EnvSpec,
    pub gamma: f64,
    pub algorithm: AlgoKind,
    pub alpha: f64,
    pub alpha_schedule: AlphaSchedule,
    pub alpha_actor: f64,
    pub alpha_critic: f64,
    pub epsilon: f64,
    pub budget: Budget,
    pub max_len: usize,
    pub q_init: f64,
    pub n: usize,
    pub m: usize,
    pub tol: f64,
    pub max_sweeps: Option<usize>,
    pub target: TargetRule,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

fn config_err(msg: String) -> Error {
    Error::Config(msg)
}

fn in_unit(key: &str, v: f64, allow_zero: bool) -> Result<f64> {
    let ok = v <= 1.0 && if allow_zero { v >= 0.0 } else { v > 0.0 };
    if ok {
        Ok(v)
    } else {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        Err(config_err(format!("{key} must lie in {range}, got {v}")))
    }
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(config_err(format!("{key} must be at least 1")))
    } else {
        Ok(v)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let RawConfig { seed, env, algorithm: a } = raw;
        let gamma = in_unit("env.gamma", env.gamma.unwrap_or(0.9), false)?;
        let env_spec = match env.name.as_str() {
            "cliff_walking" => EnvSpec::CliffWalking,
            "gridworld" => EnvSpec::Gridworld,
            "two_state_chain" => EnvSpec::TwoStateChain,
            "chain_mrp" => EnvSpec::ChainMrp {
                rewards: env
                    .rewards
                    .filter(|r| !r.is_empty())
                    .ok_or_else(|| config_err("env.rewards: chain_mrp needs a nonempty reward list".into()))?,
            },
            "bandit" => EnvSpec::Bandit {
                arms: env
                    .arms
                    .filter(|r| !r.is_empty())
                    .ok_or_else(|| config_err("env.arms: bandit needs a nonempty list of arm rewards".into()))?,
            },
            other => return Err(config_err(format!("env.name: unknown environment {other:?}"))),
        };
        let algorithm = AlgoKind::from_name(&a.name)?;

        if (algorithm == AlgoKind::Bandit) != matches!(env_spec, EnvSpec::Bandit { .. }) {
            return Err(config_err(format!(
                "algorithm.name: {algorithm} cannot run on environment {}",
                env_spec.name()
            )));
        }
        if algorithm.is_prediction() != env_spec.is_mrp() {
            let why = if algorithm.is_prediction() { "needs a reward process (chain_mrp)" } else { "needs an MDP" };
            return Err(config_err(format!("algorithm.name: {algorithm} {why}, got {}", env_spec.name())));
        }

        let budget = match (a.episodes, a.steps) {
            (Some(_), Some(_)) => {
                return Err(config_err("algorithm: set either episodes or steps, not both".into()));
            }
            (Some(e), None) => Budget::Episodes(positive("algorithm.episodes", e)?),
            (None, Some(s)) => Budget::Steps(positive("algorithm.steps", s)?),
            (None, None) if algorithm.is_planning() => Budget::Steps(1),
            (None, None) => return Err(config_err("algorithm: one of episodes or steps is required".into())),
        };
        if algorithm == AlgoKind::Bandit && matches!(budget, Budget::Episodes(_)) {
            return Err(config_err("algorithm.episodes: bandits count steps; use steps".into()));
        }

        let alpha = in_unit("algorithm.alpha", a.alpha.unwrap_or(0.1), false)?;
        let alpha_schedule = match a.alpha_schedule.as_deref() {
            None | Some("constant") => AlphaSchedule::Constant(alpha),
            Some("inverse_visits") => AlphaSchedule::InverseVisits,
            Some(other) => {
                return Err(config_err(format!(
                    "algorithm.alpha_schedule: expected constant or inverse_visits, got {other:?}"
                )))
            }
        };
        let tol = a.tol.unwrap_or(1e-10);
        if !(tol > 0.0) {
            return Err(config_err(format!("algorithm.tol must be positive, got {tol}")));
        }
        let q_init = a.q_init.unwrap_or(0.0);
        if !q_init.is_finite() {
            return Err(config_err("algorithm.q_init must be finite".into()));
        }
        let target = match a.target.as_deref() {
            None | Some("q_learning") => TargetRule::QLearning,
            Some("sarsa") => TargetRule::Sarsa,
            Some("expected_sarsa") => TargetRule::ExpectedSarsa { epsilon: a.epsilon.unwrap_or(0.1) },
            Some(other) => {
                return Err(config_err(format!(
                    "algorithm.target: expected q_learning, sarsa or expected_sarsa, got {other:?}"
                )))
            }
        };
        let activation = match a.activation.as_deref() {
            None => Activation::Tanh,
            Some(s) => s.parse().map_err(|_| config_err(format!("algorithm.activation: unknown activation {s:?}")))?,
        };
        let hidden = a.hidden.unwrap_or_default();
        if hidden.contains(&0) {
            return Err(config_err("algorithm.hidden: layer widths must be at least 1".into()));
        }

        Ok(Self {
            seed,
            env: env_spec,
            gamma,
            algorithm,
            alpha,
            alpha_schedule,
            alpha_actor: in_unit("algorithm.alpha_actor", a.alpha_actor.unwrap_or(0.1), false)?,
            alpha_critic: in_unit("algorithm.alpha_critic", a.alpha_critic.unwrap_or(0.1), false)?,
            epsilon: in_unit("algorithm.epsilon", a.epsilon.unwrap_or(0.1), true)?,
            budget,
            max_len: positive("algorithm.max_len", a.max_len.unwrap_or(1000))?,
            q_init,
            n: positive("algorithm.n", a.n.unwrap_or(1))?,
            m: positive("algorithm.m", a.m.unwrap_or(1))?,
            tol,
            max_sweeps: a.max_sweeps.map(|c| positive("algorithm.max_sweeps", c)).transpose()?,
            target,
            hidden,
            activation,
        })
    }
}
