//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lensrl::algorithms::oracle::{
    brute_force_optimum, oracle_expected_sarsa, oracle_mc, oracle_q_learning, oracle_sarsa, oracle_td0,
};
use lensrl::algorithms::{
    bandit_epsilon_greedy, expected_sarsa, gpi, mc_control, policy_evaluation, policy_iteration, q_learning, sarsa,
    td0_prediction, value_iteration, AlphaSchedule, BanditConfig, Budget, PredictionConfig, TdConfig,
};
use lensrl::approx::{finite_difference, grad, semi_gradient_q_update, td_target, Activation, Architecture, Features};
use lensrl::approx::{Init, NetSample, QNetwork, TargetRule, Var};
use lensrl::bellman::{bellman_optic, para_bellman_sarsa, sarsa_target, value_improve, QDelta, QTable, ValueFn};
use lensrl::iteration::IterationData;
use lensrl::mdp::{
    chain_mrp, cliff_walking, corner_gridworld, multi_armed_bandit, random_mdp, two_state_chain, Action, Mdp, Mrp,
    Policy, SarsaSample, State, Transition,
};
use lensrl::optic::Lens;
use lensrl::{FiniteDist, RngState};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_policy(rng: &mut RngState, n_states: usize, n_actions: usize) -> Policy {
    Policy::Stochastic(
        (0..n_states)
            .map(|_| FiniteDist::from_weights((0..n_actions).map(|a| (a, 0.05 + rng.uniform()))).unwrap())
            .collect(),
    )
}

fn random_values(rng: &mut RngState, n: usize) -> ValueFn {
    ValueFn::from_vec((0..n).map(|_| rng.uniform_in(-10.0, 10.0)).collect())
}

fn contraction() -> Check {
    let mut rng = RngState::new(1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let (ns, na) = (1 + rng.index(6), 1 + rng.index(3));
        for gamma in [0.5, 0.9, 0.99] {
            let mdp = random_mdp(&mut rng, ns, na, gamma).unwrap();
            let pi = random_policy(&mut rng, ns, na);
            for _ in 0..10 {
                let (v1, v2) = (random_values(&mut rng, ns), random_values(&mut rng, ns));
                let lhs = value_improve(&mdp, &pi, &v1).distance(&value_improve(&mdp, &pi, &v2));
                let slack = lhs - gamma * v1.distance(&v2);
                worst = worst.max(slack);
                ensure(slack <= 1e-9, || format!("excess {slack:e} at gamma {gamma}"))?;
            }
        }
    }
    Ok(format!("6000 pairs, max excess over gamma-bound {worst:.3e}"))
}

/// `Σ_a π(a|s) Σ_{s', r} t(s', r | s, a)·(r + γ·V(s'))`, summed directly.
fn direct_backup(mdp: &Mdp, pi: &Policy, v: &ValueFn) -> Vec<f64> {
    (0..mdp.n_states())
        .map(|s| {
            let mut total = 0.0;
            for (a, pa) in pi.action_dist(s).iter() {
                for ((s2, r), p) in mdp.transition(s, *a).iter() {
                    total += pa * p * (r + mdp.gamma() * v.get(*s2));
                }
            }
            total
        })
        .collect()
}

fn factorization() -> Check {
    let mut rng = RngState::new(2);
    let (mut worst_single, mut worst_double) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let (ns, na) = (1 + rng.index(6), 1 + rng.index(3));
        let gamma = rng.uniform_in(0.1, 0.99);
        let mdp = random_mdp(&mut rng, ns, na, gamma).unwrap();
        let pi = random_policy(&mut rng, ns, na);
        let v = random_values(&mut rng, ns);
        let via_k = value_improve(&mdp, &pi, &v);
        let direct = direct_backup(&mdp, &pi, &v);
        for s in 0..ns {
            worst_single = worst_single.max((via_k.get(s) - direct[s]).abs());
        }
        let twice = value_improve(&mdp, &pi, &via_k);
        let optic = bellman_optic(&mdp, &pi);
        let composed = optic.then(&optic);
        for s in 0..ns {
            let k = composed.apply_continuation(&s, |s2| v.get(*s2));
            worst_double = worst_double.max((twice.get(s) - k).abs());
        }
    }
    ensure(worst_single <= 1e-12, || format!("single backup off by {worst_single:e}"))?;
    ensure(worst_double <= 1e-9, || format!("double backup off by {worst_double:e}"))?;
    Ok(format!("single {worst_single:.1e}, composed {worst_double:.1e}"))
}

fn functoriality() -> Check {
    let mut rng = RngState::new(3);
    let mut max_real = 0.0_f64;
    for trial in 0..50 {
        // integer carriers
        let c: [i64; 6] = std::array::from_fn(|_| rng.index(7) as i64 - 3);
        let f = Lens::new(move |x: &i64| (c[0] * x + c[1]) % 1009, move |x: &i64, yb: i64| (c[2] * yb + x) % 1009);
        let g = Lens::new(move |y: &i64| (y * y + c[3]) % 997, move |y: &i64, zb: i64| (zb - c[4] * y) % 997);
        let m0 = rng.index(10) as i64;
        let it = IterationData::from_state(m0, c[5], move |m: &i64, xb: i64, rng: &mut RngState| {
            ((m + xb + rng.index(3) as i64) % 101, (xb * 3 + m) % 1013)
        });
        let k = |z: &i64| z % 17 - 8;
        let seed = rng.next_u64();
        let composed = it.map_lens(&f.then(&g)).run_stream(k, 100, &mut RngState::new(seed));
        let stepwise = it.map_lens(&f).map_lens(&g).run_stream(k, 100, &mut RngState::new(seed));
        ensure(composed == stepwise, || format!("integer streams differ in trial {trial}"))?;

        // real carriers
        let d: [f64; 4] = std::array::from_fn(|_| rng.uniform_in(-1.0, 1.0));
        let f = Lens::new(move |x: &f64| (d[0] * x).tanh(), move |x: &f64, yb: f64| yb * d[1] + x);
        let g = Lens::new(move |y: &f64| y.sin() + d[2], move |y: &f64, zb: f64| zb * y + d[3]);
        let it = IterationData::from_state(0.0f64, 0.5f64, |m: &f64, xb: f64, rng: &mut RngState| {
            (0.9 * m + xb * 0.1, (m - xb).cos() + rng.uniform_in(-0.1, 0.1))
        });
        let k = |z: &f64| 0.5 * z;
        let seed = rng.next_u64();
        let composed = it.map_lens(&f.then(&g)).run_stream(k, 100, &mut RngState::new(seed));
        let stepwise = it.map_lens(&f).map_lens(&g).run_stream(k, 100, &mut RngState::new(seed));
        for (a, b) in composed.iter().zip(&stepwise) {
            max_real = max_real.max((a - b).abs());
        }
        ensure(composed.len() == 100 && stepwise.len() == 100, || "short stream".into())?;
    }
    ensure(max_real <= 1e-12, || format!("real streams differ by {max_real:e}"))?;
    Ok(format!("50 triples x 2 carriers, integer exact, real max diff {max_real:.1e}"))
}

fn tables(trace: &[QTable]) -> Vec<Vec<f64>> {
    trace.iter().map(|q| q.values().to_vec()).collect()
}

fn compositional_equals_direct() -> Check {
    let envs = [("chain", two_state_chain(0.9).unwrap()), ("grid", corner_gridworld(0.9).unwrap())];
    let mut compared = 0usize;
    for (name, mdp) in &envs {
        for seed in 0..5 {
            let cfg = TdConfig {
                alpha: 0.2,
                epsilon: 0.2,
                gamma: 0.9,
                max_len: 100,
                record_trace: true,
                ..TdConfig::new(Budget::Steps(10_000), seed)
            };
            let pairs: [(&str, Vec<Vec<f64>>, Vec<Vec<f64>>); 4] = [
                ("sarsa", tables(&sarsa(mdp, &cfg).unwrap().trace), oracle_sarsa(mdp, &cfg)),
                ("q_learning", tables(&q_learning(mdp, &cfg).unwrap().trace), oracle_q_learning(mdp, &cfg)),
                (
                    "expected_sarsa",
                    tables(&expected_sarsa(mdp, &cfg).unwrap().trace),
                    oracle_expected_sarsa(mdp, &cfg),
                ),
                ("mc_control", tables(&mc_control(mdp, &cfg).unwrap().trace), oracle_mc(mdp, &cfg)),
            ];
            for (algo, ours, oracle) in pairs {
                ensure(ours == oracle, || format!("{algo} on {name}, seed {seed}: traces differ"))?;
                compared += ours.len();
            }

            // TD(0) on the reward process of the uniform policy
            let mrp = Mrp::induced(mdp, &Policy::uniform(mdp.n_states(), mdp.n_actions())).unwrap();
            let pcfg = PredictionConfig {
                gamma: 0.9,
                max_len: 100,
                record_trace: true,
                ..PredictionConfig::new(AlphaSchedule::Constant(0.2), Budget::Steps(10_000), seed)
            };
            let ours: Vec<Vec<f64>> = td0_prediction(&mrp, &pcfg)
                .unwrap()
                .trace
                .iter()
                .map(|v| v.as_slice().to_vec())
                .collect();
            let oracle = oracle_td0(mrp.as_mdp(), Some(0.2), 0.9, pcfg.budget, pcfg.max_len, seed);
            ensure(ours == oracle, || format!("td0 on {name}, seed {seed}: traces differ"))?;
            compared += ours.len();
        }
    }
    Ok(format!("5 algorithms x 2 envs x 5 seeds, {compared} tables bit-identical"))
}

fn dp_trio() -> Check {
    let mut rng = RngState::new(5);
    let mut worst = 0.0_f64;
    for trial in 0..100 {
        let ns = 1 + rng.index(4);
        let gamma = rng.uniform_in(0.5, 0.95);
        let mdp = random_mdp(&mut rng, ns, 2, gamma).unwrap();
        let tol = 1e-12;
        let pit = policy_iteration(&mdp, tol).map_err(|e| e.to_string())?;
        let vit = value_iteration(&mdp, tol).map_err(|e| e.to_string())?;
        let gp = gpi(&mdp, 2, 3, tol).map_err(|e| e.to_string())?;
        let (best, winners) = brute_force_optimum(&mdp, 1e-9);
        let greedy = |p: &Policy| (0..ns).map(|s| p.mode(s)).collect::<Vec<Action>>();
        let (a, b, c) = (greedy(&pit.policy), greedy(&vit.policy), greedy(&gp.policy));
        ensure(a == b && b == c, || format!("trial {trial}: greedy policies {a:?} {b:?} {c:?}"))?;
        ensure(winners.contains(&a), || format!("trial {trial}: {a:?} not among optimal policies"))?;
        for sol in [&pit, &vit, &gp] {
            for s in 0..ns {
                worst = worst.max((sol.value.get(s) - best[s]).abs());
            }
        }
    }
    ensure(worst <= 1e-8, || format!("values off by {worst:e}"))?;
    Ok(format!("100 MDPs, policies identical and optimal, max value gap {worst:.1e}"))
}

fn para_k_bridge() -> Check {
    let mut rng = RngState::new(6);
    let para = para_bellman_sarsa(0.9).para_k();
    for i in 0..1000 {
        let (ns, na) = (1 + rng.index(6), 1 + rng.index(4));
        let q = QTable::from_fn(ns, na, |_, _| rng.uniform_in(-5.0, 5.0));
        let x = SarsaSample {
            s: rng.index(ns),
            a: rng.index(na),
            r: rng.uniform_in(-3.0, 3.0),
            s_next: rng.index(ns),
            a_next: rng.index(na),
        };
        let (s, a, target) = para.apply(&x, &((), q.continuation()));
        let expected = sarsa_target(0.9, &q, &x);
        ensure(QDelta { s, a, target } == expected, || format!("input {i}: mismatch"))?;
    }
    Ok("1000 inputs, exact".into())
}

fn greedy_rollout(mdp: &Mdp, q: &QTable, start: State, cap: usize) -> (Vec<State>, f64) {
    let (mut s, mut ret, mut path) = (start, 0.0, vec![start]);
    for _ in 0..cap {
        if mdp.is_terminal(s) {
            break;
        }
        let (s2, r) = mdp.transition(s, q.argmax(s)).atoms()[0].0;
        ret += r;
        s = s2;
        path.push(s);
    }
    (path, ret)
}

fn control_quality() -> Check {
    let mdp = cliff_walking(0.99).unwrap();
    let cfg = TdConfig {
        alpha: 0.5,
        epsilon: 0.1,
        gamma: 0.99,
        ..TdConfig::new(Budget::Episodes(500), 7)
    };
    let vi = value_iteration(&mdp, 1e-10).map_err(|e| e.to_string())?;
    let start = 36;
    let mut optimal_path = vec![start];
    let mut s = start;
    while !mdp.is_terminal(s) && optimal_path.len() < 100 {
        s = mdp.transition(s, vi.policy.mode(s)).atoms()[0].0 .0;
        optimal_path.push(s);
    }
    let q = q_learning(&mdp, &cfg).map_err(|e| e.to_string())?.params;
    let mismatched: Vec<State> = optimal_path
        .iter()
        .filter(|&&s| !mdp.is_terminal(s) && q.argmax(s) != vi.policy.mode(s))
        .copied()
        .collect();
    ensure(mismatched.is_empty(), || format!("q_learning greedy differs from optimal at {mismatched:?}"))?;

    // the cliff-avoiding route: up to the top row, across, back down
    let baseline = -17.0;
    let sq = sarsa(&mdp, &cfg).map_err(|e| e.to_string())?.params;
    let (path, ret) = greedy_rollout(&mdp, &sq, start, 200);
    let reached = mdp.is_terminal(*path.last().unwrap());
    ensure(reached && ret >= baseline, || format!("sarsa greedy route returns {ret} (goal reached: {reached})"))?;
    let rerun = sarsa(&mdp, &cfg).map_err(|e| e.to_string())?.params;
    ensure(rerun == sq, || "sarsa rerun differs".into())?;
    Ok(format!(
        "q_learning matches optimal on {} path states; sarsa route {} steps, return {ret}",
        optimal_path.len() - 1,
        path.len() - 1
    ))
}

fn prediction_coherence() -> Check {
    let mrp = chain_mrp(&[1.0, 0.0, 2.0, -1.0, 0.5], 0.9).unwrap();
    let cfg = PredictionConfig {
        gamma: 0.9,
        ..PredictionConfig::new(AlphaSchedule::InverseVisits, Budget::Steps(100_000), 8)
    };
    let td = td0_prediction(&mrp, &cfg).map_err(|e| e.to_string())?.params;
    let dp = policy_evaluation(mrp.as_mdp(), &Policy::Deterministic(vec![0; 6]), 1e-12).map_err(|e| e.to_string())?;
    let gap = td.distance(&dp);
    ensure(gap <= 0.05, || format!("sup-norm gap {gap}"))?;
    Ok(format!("sup-norm gap {gap:.2e}"))
}

fn semi_gradient_reduction() -> Check {
    let mut rng = RngState::new(9);
    for i in 0..1000 {
        let (ns, na) = (1 + rng.index(6), 1 + rng.index(4));
        let net = QNetwork::tabular(ns, na);
        let theta = net.params((0..ns * na).map(|_| rng.uniform_in(-5.0, 5.0)).collect()).unwrap();
        let x = NetSample {
            t: Transition {
                s: rng.index(ns),
                a: rng.index(na),
                r: rng.uniform_in(-2.0, 2.0),
                s_next: rng.index(ns),
            },
            a_next: None,
            terminal: rng.uniform() < 0.2,
        };
        let (alpha, gamma) = (rng.uniform_in(0.01, 1.0), rng.uniform_in(0.0, 1.0));
        let q = net.table(&theta);
        let boot = if x.terminal { 0.0 } else { q.max(x.t.s_next) };
        let target = x.t.r + gamma * boot;
        ensure(target == td_target(&net, &theta, &x, gamma, TargetRule::QLearning).unwrap(), || {
            format!("instance {i}: target differs")
        })?;
        let updated = semi_gradient_q_update(&net, &theta, &x, alpha, gamma, TargetRule::QLearning).unwrap();
        let tabular = q.apply_delta(&QDelta { s: x.t.s, a: x.t.a, target }, alpha);
        ensure(updated.values() == tabular.values(), || format!("instance {i}: update differs"))?;
    }

    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let dim = 1 + rng.index(4);
        let ns = 1 + rng.index(3);
        let rows = (0..ns).map(|_| (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
        let na = 1 + rng.index(3);
        let hidden = (0..1 + rng.index(2)).map(|_| 1 + rng.index(5)).collect();
        let net = QNetwork::new(
            Features::new(rows).unwrap(),
            na,
            Architecture::Mlp {
                hidden,
                activation: Activation::Tanh,
            },
        )
        .unwrap();
        let theta = net.init(Init::Uniform(1.0), rng.next_u64());
        let (s, a, g) = (rng.index(ns), rng.index(na), rng.uniform_in(-1.0, 1.0));
        let (_, analytic) = grad(theta.values(), |t, th| -> lensrl::Result<Var> {
            let q = net.eval_tape(t, th, s)[a];
            Ok(t.square(t.shift(q, -g)))
        })
        .unwrap();
        let numeric = finite_difference(theta.values(), 1e-5, |v| {
            let q = net.eval(&theta.with_values(v.to_vec()).unwrap(), s)[a];
            (q - g) * (q - g)
        });
        for (x, y) in analytic.iter().zip(&numeric) {
            let scale = x.abs().max(y.abs());
            if scale > 1e-6 {
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    ensure(worst <= 1e-4, || format!("finite-difference relative error {worst:e}"))?;
    Ok(format!("1000 one-hot updates exact; MLP gradient max relative error {worst:.1e}"))
}

fn bandit_asymptotics() -> Check {
    let env = multi_armed_bandit(vec![FiniteDist::dirac(0.0), FiniteDist::dirac(1.0)]).unwrap();
    let report = bandit_epsilon_greedy(&env, 2, &BanditConfig::new(10_000, 0.1, 10)).map_err(|e| e.to_string())?;
    let mean = report.mean_return();
    ensure((mean - 0.95).abs() <= 0.05, || format!("mean reward {mean}"))?;
    Ok(format!("mean reward {mean:.4}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Check); 10] = [
        ("contraction", 5, contraction),
        ("bellman-optic factorization", 5, factorization),
        ("iteration functoriality", 5, functoriality),
        ("compositional = direct", 30, compositional_equals_direct),
        ("dp trio", 20, dp_trio),
        ("para-K bridge", 1, para_k_bridge),
        ("control quality", 30, control_quality),
        ("prediction coherence", 10, prediction_coherence),
        ("semi-gradient reduction", 10, semi_gradient_reduction),
        ("bandit asymptotics", 2, bandit_asymptotics),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (status, detail) = match (&outcome, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the {limit} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {status}  {detail} [{:.2} s]",
            i + 1,
            name,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
