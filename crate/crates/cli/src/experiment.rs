//! Building environments, running algorithms and rendering their reports.

use std::fmt;

use lensrl::algorithms::oracle::{
    oracle_bandit, oracle_expected_sarsa, oracle_mc, oracle_n_step_sarsa, oracle_q_learning, oracle_sarsa, oracle_td0,
    oracle_value_iteration,
};
use lensrl::algorithms::{
    bandit_epsilon_greedy, expected_sarsa, gpi_capped, mc_control, mc_prediction, n_step_sarsa,
    policy_evaluation_capped, policy_iteration_capped, q_learning, sarsa, td0_prediction, value_iteration_capped,
    AlphaSchedule, BanditConfig, Budget, DpSolution, PredictionConfig, ReportRow, TdConfig, TrainReport, MAX_SWEEPS,
};
use lensrl::approx::{
    actor_critic_train, dqn_train, AcConfig, ActorCritic, Architecture, DqnConfig, Features, Init, ParamVector,
    QNetwork,
};
use lensrl::bellman::{QTable, ValueFn};
use lensrl::mdp::{chain_mrp, cliff_walking, corner_gridworld, multi_armed_bandit, two_state_chain, Mdp, Mrp, Policy};
use lensrl::{Error, FiniteDist, Result};

use crate::config::{AlgoKind, EnvSpec, ExperimentConfig};

/// A learning curve: an index column and named value columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub index: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    fn from_report(unit: &'static str, rows: &[ReportRow]) -> Self {
        Self {
            index: unit,
            columns: vec!["return", "max_q_change"],
            rows: rows.iter().map(|r| vec![r.ret, r.max_q_change]).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.index.to_string();
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algorithm: AlgoKind,
    pub env: &'static str,
    pub seed: u64,
    pub rows: usize,
    pub steps: usize,
    pub final_mean_return: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "algorithm={} env={} seed={} rows={} steps={} final_mean_return={}",
            self.algorithm, self.env, self.seed, self.rows, self.steps, self.final_mean_return
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub curve: Curve,
    /// Final value table, Q-table or parameter vector as CSV.
    pub table: String,
    pub summary: Summary,
}

/// Rows averaged for the summary's final mean return.
const SUMMARY_WINDOW: usize = 100;

enum Built {
    Mdp(Mdp),
    Mrp(Mrp),
    Bandit(Vec<f64>),
}

fn build(cfg: &ExperimentConfig) -> Result<Built> {
    Ok(match &cfg.env {
        EnvSpec::CliffWalking => Built::Mdp(cliff_walking(cfg.gamma)?),
        EnvSpec::Gridworld => Built::Mdp(corner_gridworld(cfg.gamma)?),
        EnvSpec::TwoStateChain => Built::Mdp(two_state_chain(cfg.gamma)?),
        EnvSpec::ChainMrp { rewards } => Built::Mrp(chain_mrp(rewards, cfg.gamma)?),
        EnvSpec::Bandit { arms } => Built::Bandit(arms.clone()),
    })
}

fn td_config(cfg: &ExperimentConfig, record_trace: bool) -> TdConfig {
    TdConfig {
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        gamma: cfg.gamma,
        max_len: cfg.max_len,
        q_init: cfg.q_init,
        record_trace,
        ..TdConfig::new(cfg.budget, cfg.seed)
    }
}

fn prediction_config(cfg: &ExperimentConfig, record_trace: bool) -> PredictionConfig {
    PredictionConfig {
        gamma: cfg.gamma,
        max_len: cfg.max_len,
        record_trace,
        ..PredictionConfig::new(cfg.alpha_schedule, cfg.budget, cfg.seed)
    }
}

fn bandit_config(cfg: &ExperimentConfig, record_trace: bool) -> Result<BanditConfig> {
    let Budget::Steps(steps) = cfg.budget else {
        return Err(Error::Config("algorithm.steps: bandits count steps".into()));
    };
    Ok(BanditConfig {
        alpha: match cfg.alpha_schedule {
            AlphaSchedule::Constant(a) => Some(a),
            AlphaSchedule::InverseVisits => None,
        },
        q_init: cfg.q_init,
        record_trace,
        ..BanditConfig::new(steps, cfg.epsilon, cfg.seed)
    })
}

fn arms(rewards: &[f64]) -> Vec<FiniteDist<f64>> {
    rewards.iter().map(|&r| FiniteDist::dirac(r)).collect()
}

fn network(cfg: &ExperimentConfig, mdp: &Mdp) -> Result<QNetwork> {
    let arch = if cfg.hidden.is_empty() {
        Architecture::Linear
    } else {
        Architecture::Mlp {
            hidden: cfg.hidden.clone(),
            activation: cfg.activation,
        }
    };
    QNetwork::new(Features::one_hot(mdp.n_states()), mdp.n_actions(), arch)
}

fn params_csv(blocks: &[(&str, &ParamVector)]) -> String {
    let mut out = String::from("block,index,value\n");
    for (prefix, p) in blocks {
        for b in p.layout() {
            for (i, v) in p.values()[b.range.clone()].iter().enumerate() {
                out.push_str(&format!("{prefix}{},{i},{v}\n", b.name));
            }
        }
    }
    out
}

fn summarize<T, S>(cfg: &ExperimentConfig, report: &TrainReport<T, S>) -> Summary {
    let tail = &report.rows[report.rows.len().saturating_sub(SUMMARY_WINDOW)..];
    let mean = if tail.is_empty() { 0.0 } else { tail.iter().map(|r| r.ret).sum::<f64>() / tail.len() as f64 };
    Summary {
        algorithm: cfg.algorithm,
        env: cfg.env.name(),
        seed: cfg.seed,
        rows: report.rows.len(),
        steps: report.steps,
        final_mean_return: mean,
    }
}

fn learned<T, S>(cfg: &ExperimentConfig, report: &TrainReport<T, S>, table: String) -> Outcome {
    Outcome {
        curve: Curve::from_report(report.unit.name(), &report.rows),
        table,
        summary: summarize(cfg, report),
    }
}

fn planned(cfg: &ExperimentConfig, mdp: &Mdp, sol: &DpSolution) -> Outcome {
    let mut prev = ValueFn::zeros(mdp.n_states());
    let rows = sol
        .history
        .iter()
        .map(|v| {
            let residual = v.distance(&prev);
            prev = v.clone();
            vec![residual]
        })
        .collect::<Vec<_>>();
    Outcome {
        curve: Curve {
            index: "sweep",
            columns: vec!["residual"],
            rows,
        },
        table: sol.value.to_csv(),
        summary: Summary {
            algorithm: cfg.algorithm,
            env: cfg.env.name(),
            seed: cfg.seed,
            rows: sol.history.len(),
            steps: 0,
            final_mean_return: mdp.start().expect(|s| sol.value.get(*s)),
        },
    }
}

/// Run one experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let cap = cfg.max_sweeps.unwrap_or(MAX_SWEEPS);
    match (build(cfg)?, cfg.algorithm) {
        (Built::Mdp(mdp), AlgoKind::ValueIteration) => Ok(planned(cfg, &mdp, &value_iteration_capped(&mdp, cfg.tol, cap)?)),
        (Built::Mdp(mdp), AlgoKind::PolicyIteration) => {
            Ok(planned(cfg, &mdp, &policy_iteration_capped(&mdp, cfg.tol, cap)?))
        }
        (Built::Mdp(mdp), AlgoKind::Gpi) => Ok(planned(cfg, &mdp, &gpi_capped(&mdp, cfg.m, cfg.n, cfg.tol, cap)?)),
        (Built::Mrp(mrp), AlgoKind::PolicyEvaluation) => {
            let mdp = mrp.as_mdp();
            let pi = Policy::Deterministic(vec![0; mdp.n_states()]);
            let value = policy_evaluation_capped(mdp, &pi, cfg.tol, cap)?;
            let sol = DpSolution {
                history: vec![value.clone()],
                value,
                policy: pi,
                sweeps: 1,
            };
            Ok(planned(cfg, mdp, &sol))
        }
        (Built::Mdp(mdp), kind @ (AlgoKind::Sarsa | AlgoKind::QLearning | AlgoKind::ExpectedSarsa | AlgoKind::McControl)) => {
            let td = td_config(cfg, false);
            let report = match kind {
                AlgoKind::Sarsa => strip(sarsa(&mdp, &td)?),
                AlgoKind::QLearning => strip(q_learning(&mdp, &td)?),
                AlgoKind::ExpectedSarsa => strip(expected_sarsa(&mdp, &td)?),
                _ => strip(mc_control(&mdp, &td)?),
            };
            Ok(learned(cfg, &report, report.params.to_csv()))
        }
        (Built::Mdp(mdp), AlgoKind::NStepSarsa) => {
            let report = n_step_sarsa(&mdp, cfg.n, &td_config(cfg, false))?;
            Ok(learned(cfg, &report, report.params.to_csv()))
        }
        (Built::Mrp(mrp), AlgoKind::Td0) => {
            let report = td0_prediction(&mrp, &prediction_config(cfg, false))?;
            Ok(learned(cfg, &report, report.params.to_csv()))
        }
        (Built::Mrp(mrp), AlgoKind::McPrediction) => {
            let report = mc_prediction(&mrp, &prediction_config(cfg, false))?;
            Ok(learned(cfg, &report, report.params.to_csv()))
        }
        (Built::Bandit(rewards), AlgoKind::Bandit) => {
            let env = multi_armed_bandit(arms(&rewards))?;
            let report = bandit_epsilon_greedy(&env, rewards.len(), &bandit_config(cfg, false)?)?;
            Ok(learned(cfg, &report, report.params.to_csv()))
        }
        (Built::Mdp(mdp), AlgoKind::Dqn) => {
            let net = network(cfg, &mdp)?;
            let dqn = DqnConfig {
                alpha: cfg.alpha,
                epsilon: cfg.epsilon,
                gamma: cfg.gamma,
                rule: cfg.target,
                max_len: cfg.max_len,
                init: Init::Uniform(0.1),
                ..DqnConfig::new(cfg.budget, cfg.seed)
            };
            let report = dqn_train(&mdp, &net, &dqn)?;
            Ok(learned(cfg, &report, params_csv(&[("", &report.params)])))
        }
        (Built::Mdp(mdp), AlgoKind::ActorCritic) => {
            let ac = ActorCritic::tabular(mdp.n_states(), mdp.n_actions());
            let ac_cfg = AcConfig {
                alpha_actor: cfg.alpha_actor,
                alpha_critic: cfg.alpha_critic,
                gamma: cfg.gamma,
                max_len: cfg.max_len,
                ..AcConfig::new(cfg.budget, cfg.seed)
            };
            let report = actor_critic_train(&mdp, &ac, &ac_cfg)?;
            let table = params_csv(&[("actor.", &report.params.actor), ("critic.", &report.params.critic)]);
            Ok(learned(cfg, &report, table))
        }
        (_, kind) => Err(Error::Config(format!(
            "algorithm.name: {kind} cannot run on environment {}",
            cfg.env.name()
        ))),
    }
}

fn strip<S>(report: TrainReport<QTable, S>) -> TrainReport<QTable, ()> {
    TrainReport {
        unit: report.unit,
        rows: report.rows,
        params: report.params,
        steps: report.steps,
        seed: report.seed,
        trace: report.trace,
        samples: Vec::new(),
    }
}

fn q_rows(trace: &[QTable]) -> Vec<Vec<f64>> {
    trace.iter().map(|q| q.values().to_vec()).collect()
}

/// Parameter traces of the assembled learner and of its direct oracle.
pub fn traces(cfg: &ExperimentConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let td = td_config(cfg, true);
    match (build(cfg)?, cfg.algorithm) {
        (Built::Mdp(mdp), AlgoKind::Sarsa) => Ok((q_rows(&sarsa(&mdp, &td)?.trace), oracle_sarsa(&mdp, &td))),
        (Built::Mdp(mdp), AlgoKind::QLearning) => {
            Ok((q_rows(&q_learning(&mdp, &td)?.trace), oracle_q_learning(&mdp, &td)))
        }
        (Built::Mdp(mdp), AlgoKind::ExpectedSarsa) => {
            Ok((q_rows(&expected_sarsa(&mdp, &td)?.trace), oracle_expected_sarsa(&mdp, &td)))
        }
        (Built::Mdp(mdp), AlgoKind::NStepSarsa) => Ok((
            q_rows(&n_step_sarsa(&mdp, cfg.n, &td)?.trace),
            oracle_n_step_sarsa(&mdp, cfg.n, &td),
        )),
        (Built::Mdp(mdp), AlgoKind::McControl) => Ok((q_rows(&mc_control(&mdp, &td)?.trace), oracle_mc(&mdp, &td))),
        (Built::Mdp(mdp), AlgoKind::ValueIteration) => {
            let sol = value_iteration_capped(&mdp, cfg.tol, cfg.max_sweeps.unwrap_or(MAX_SWEEPS))?;
            let ours: Vec<Vec<f64>> = sol.history.iter().map(|v| v.as_slice().to_vec()).collect();
            Ok((ours, oracle_value_iteration(&mdp, sol.history.len())))
        }
        (Built::Mrp(mrp), AlgoKind::Td0) => {
            let pc = prediction_config(cfg, true);
            let ours = td0_prediction(&mrp, &pc)?.trace.iter().map(|v| v.as_slice().to_vec()).collect();
            let alpha = match cfg.alpha_schedule {
                AlphaSchedule::Constant(a) => Some(a),
                AlphaSchedule::InverseVisits => None,
            };
            Ok((ours, oracle_td0(mrp.as_mdp(), alpha, cfg.gamma, cfg.budget, cfg.max_len, cfg.seed)))
        }
        (Built::Bandit(rewards), AlgoKind::Bandit) => {
            let bc = bandit_config(cfg, true)?;
            let env = multi_armed_bandit(arms(&rewards))?;
            let ours = q_rows(&bandit_epsilon_greedy(&env, rewards.len(), &bc)?.trace);
            let Budget::Steps(steps) = cfg.budget else { unreachable!("checked by bandit_config") };
            Ok((ours, oracle_bandit(&arms(&rewards), steps, bc.epsilon, bc.alpha, bc.q_init, bc.seed)))
        }
        (_, kind) => Err(Error::Config(format!("algorithm.name: no direct oracle for {kind}"))),
    }
}

/// Per-update `max |ΔQ|` between the assembled learner and its oracle.
pub fn oracle_gaps(cfg: &ExperimentConfig) -> Result<Curve> {
    let (ours, oracle) = traces(cfg)?;
    if ours.len() != oracle.len() {
        return Err(Error::Domain(format!(
            "trace lengths differ: {} updates against {} from the oracle",
            ours.len(),
            oracle.len()
        )));
    }
    let rows = ours
        .iter()
        .zip(&oracle)
        .map(|(a, b)| vec![a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)])
        .collect();
    Ok(Curve {
        index: "update",
        columns: vec!["max_abs_dq"],
        rows,
    })
}

/// Join two curves row by row; columns get `_a` and `_b` suffixes.
pub fn join(a: &Curve, b: &Curve) -> Result<String> {
    if a.index != b.index || a.columns != b.columns {
        return Err(Error::Config(format!(
            "curves are not comparable: {} rows against {} rows",
            a.index, b.index
        )));
    }
    if a.rows.len() != b.rows.len() {
        return Err(Error::Config(format!(
            "curve lengths differ: {} against {} rows",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let mut out = a.index.to_string();
    for suffix in ["a", "b"] {
        for c in &a.columns {
            out.push_str(&format!(",{c}_{suffix}"));
        }
    }
    out.push('\n');
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        out.push_str(&i.to_string());
        for v in ra.iter().chain(rb) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    Ok(out)
}
