//! Bandit learners. The model's backward pass targets the observed reward
//! directly; there is no successor state to bootstrap from.

use crate::bellman::{QDelta, QTable};
use crate::error::{Error, Result};
use crate::iteration::IterationData;
use crate::mdp::{sample_action, Action, BanditComb, ContextualComb, Policy, State};
use crate::rng::RngState;

use super::{check_unit, train, ModelLens, ReportUnit, StepLog, TrainReport, UpdateRule};

#[derive(Debug, Clone, PartialEq)]
pub struct BanditConfig {
    pub steps: usize,
    pub epsilon: f64,
    /// Constant step size; `None` averages the rewards seen per arm.
    pub alpha: Option<f64>,
    pub q_init: f64,
    pub seed: u64,
    pub record_trace: bool,
}

impl BanditConfig {
    pub fn new(steps: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            steps,
            epsilon,
            alpha: None,
            q_init: 0.0,
            seed,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        check_unit("epsilon", self.epsilon, true)?;
        if let Some(a) = self.alpha {
            check_unit("alpha", a, false)?;
        }
        if !self.q_init.is_finite() {
            return Err(Error::Config("q_init must be finite".into()));
        }
        Ok(())
    }
}

/// Update rule over `S × A` tables keeping visit counts for sample averages.
fn bandit_rule(q0: QTable, alpha: Option<f64>) -> UpdateRule<(QTable, Vec<u64>), QTable, QDelta> {
    let counts = vec![0; q0.values().len()];
    UpdateRule::new(IterationData::from_state(
        (q0.clone(), counts),
        q0,
        move |(q, counts): &(QTable, Vec<u64>), d: QDelta, _: &mut RngState| {
            let (mut q, mut counts) = (q.clone(), counts.clone());
            let idx = d.s * q.n_actions() + d.a;
            counts[idx] += 1;
            q.apply_delta_in_place(&d, alpha.unwrap_or(1.0 / counts[idx] as f64));
            ((q.clone(), counts), q)
        },
    ))
}

fn model(epsilon: f64) -> ModelLens<QTable, QDelta, (State, Action, f64)> {
    ModelLens::new(
        move |q: &QTable| Policy::EpsilonGreedy { q: q.clone(), epsilon },
        |_: &QTable, (s, a, r): (State, Action, f64)| QDelta { s, a, target: r },
    )
}

/// ε-greedy on a multi-armed bandit, one report row per pull.
///
/// Draws: one for the comb's initial state, then per step the action and the
/// reward.
pub fn bandit_epsilon_greedy(
    env: &BanditComb,
    n_arms: usize,
    cfg: &BanditConfig,
) -> Result<TrainReport<QTable, (State, Action, f64)>> {
    cfg.validate()?;
    if n_arms == 0 {
        return Err(Error::Config("a bandit needs at least one arm".into()));
    }
    let rule = bandit_rule(QTable::filled(1, n_arms, cfg.q_init), cfg.alpha);
    let mut rng = RngState::new(cfg.seed);
    let mut state: Option<()> = None;
    let mut steps = 0;
    Ok(train(
        &rule,
        &model(cfg.epsilon),
        ReportUnit::Step,
        cfg.seed,
        cfg.record_trace,
        |pi, _, rng| {
            if steps == cfg.steps {
                return None;
            }
            if state.is_none() {
                state = Some(env.start(rng).0);
            }
            let a = sample_action(pi, 0, rng);
            let (mp, r) = env.respond(&(), &a, rng);
            env.advance(&mp, (), rng);
            steps += 1;
            Some((
                (0, a, r),
                StepLog {
                    reward: r,
                    env_steps: 1,
                    closes_row: true,
                },
            ))
        },
        &mut rng,
    ))
}

/// ε-greedy per context on a contextual bandit.
///
/// Draws: one for the first context, then per step the action, the reward
/// and the next context.
pub fn contextual_bandit_agent(
    env: &ContextualComb,
    n_contexts: usize,
    n_actions: usize,
    cfg: &BanditConfig,
) -> Result<TrainReport<QTable, (State, Action, f64)>> {
    cfg.validate()?;
    if n_contexts == 0 || n_actions == 0 {
        return Err(Error::Config("contextual bandit needs contexts and actions".into()));
    }
    let rule = bandit_rule(QTable::filled(n_contexts, n_actions, cfg.q_init), cfg.alpha);
    let mut rng = RngState::new(cfg.seed);
    let mut context: Option<State> = None;
    let mut steps = 0;
    Ok(train(
        &rule,
        &model(cfg.epsilon),
        ReportUnit::Step,
        cfg.seed,
        cfg.record_trace,
        |pi, _, rng| {
            if steps == cfg.steps {
                return None;
            }
            let s = match context {
                Some(s) => s,
                None => env.start(rng).0,
            };
            let a = sample_action(pi, s, rng);
            let (mp, r) = env.respond(&s, &a, rng);
            context = Some(env.advance(&mp, (), rng).0);
            steps += 1;
            Some((
                (s, a, r),
                StepLog {
                    reward: r,
                    env_steps: 1,
                    closes_row: true,
                },
            ))
        },
        &mut rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FiniteDist;
    use crate::mdp::{contextual_bandit, multi_armed_bandit};

    fn zero_one() -> BanditComb {
        multi_armed_bandit(vec![FiniteDist::dirac(0.0), FiniteDist::dirac(1.0)]).unwrap()
    }

    #[test]
    fn optimistic_greedy_locks_onto_better_arm() {
        let cfg = BanditConfig {
            q_init: 10.0,
            ..BanditConfig::new(100, 0.0, 1)
        };
        let report = bandit_epsilon_greedy(&zero_one(), 2, &cfg).unwrap();
        // arm 0 first (tie), then arm 1 forever once arm 0 has dropped to 0
        let returns = report.returns();
        assert_eq!(returns[0], 0.0);
        assert!(returns[1..].iter().all(|&r| r == 1.0));
        assert!((report.mean_return() - 0.99).abs() < 1e-12);
    }

    #[test]
    fn optimistic_greedy_tries_every_arm() {
        let arms = vec![FiniteDist::dirac(0.5), FiniteDist::dirac(0.2), FiniteDist::dirac(0.9)];
        let cfg = BanditConfig {
            q_init: 1e6,
            record_trace: true,
            ..BanditConfig::new(10, 0.0, 4)
        };
        let report = bandit_epsilon_greedy(&multi_armed_bandit(arms).unwrap(), 3, &cfg).unwrap();
        let pulled: Vec<Action> = report.samples.iter().map(|x| x.1).collect();
        assert_eq!(&pulled[..3], &[0, 1, 2]);
        assert!(pulled[3..].iter().all(|&a| a == 2));
    }

    #[test]
    fn epsilon_greedy_mean_reward() {
        let report = bandit_epsilon_greedy(&zero_one(), 2, &BanditConfig::new(10_000, 0.1, 7)).unwrap();
        assert!((report.mean_return() - 0.95).abs() < 0.05, "{}", report.mean_return());
    }

    #[test]
    fn context_free_payoff_gives_same_argmax_everywhere() {
        let arms = vec![FiniteDist::dirac(0.0), FiniteDist::dirac(1.0), FiniteDist::dirac(0.3)];
        let env = contextual_bandit(FiniteDist::uniform(0..3).unwrap(), vec![arms; 3]).unwrap();
        let report = contextual_bandit_agent(&env, 3, 3, &BanditConfig::new(3000, 0.1, 5)).unwrap();
        assert_eq!(report.params.greedy_actions(), vec![1, 1, 1]);
    }

    #[test]
    fn rejects_bad_rates() {
        let cfg = BanditConfig::new(10, 1.5, 0);
        assert!(matches!(bandit_epsilon_greedy(&zero_one(), 2, &cfg), Err(Error::Config(_))));
    }
}
