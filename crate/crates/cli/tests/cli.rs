use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lensrl"))
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(cfg: &Path, out: &Path) -> Output {
    bin().args(["run", "--config"]).arg(cfg).arg("--out").arg(out).output().unwrap()
}

const CLIFF: &str = "seed = 7\n[env]\nname = \"cliff_walking\"\ngamma = 0.99\n[algorithm]\nname = \"q_learning\"\nalpha = 0.5\nepsilon = 0.1\nepisodes = 500\n";
const GRID_VI: &str = "seed = 1\n[env]\nname = \"gridworld\"\ngamma = 0.9\n[algorithm]\nname = \"value_iteration\"\n";

#[test]
fn value_iteration_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "vi.toml", GRID_VI);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (ra, rb) = (run(&cfg, &a), run(&cfg, &b));
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(ra.stdout, rb.stdout);
    for file in ["curve.csv", "table.csv", "summary.txt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let table = fs::read_to_string(a.join("table.csv")).unwrap();
    assert!(table.starts_with("s,v\n"));
    assert_eq!(table.lines().count(), 17);
}

#[test]
fn q_learning_curve_has_one_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "cliff.toml", CLIFF);
    let out = run(&cfg, &dir.path().join("out"));
    assert!(out.status.success());
    let curve = fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("episode,return,max_q_change"));
    assert_eq!(lines.count(), 500);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("algorithm=q_learning env=cliff_walking seed=7 rows=500 "), "{summary}");
}

#[test]
fn invalid_gamma_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "bad.toml", &CLIFF.replace("0.99", "1.5"));
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("env.gamma"), "{err}");
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "noseed.toml", &CLIFF.replace("seed = 7\n", ""));
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("seed"));
}

#[test]
fn sweep_cap_exits_with_non_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "capped.toml", &format!("{GRID_VI}max_sweeps = 2\n"));
    let out = run(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "cliff.toml", &CLIFF.replace("500", "20"));
    let out = bin().args(["run", "--seed", "11", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("seed=11"));
}

#[test]
fn compare_joins_curves_and_rejects_mismatched_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let q = config(dir.path(), "q.toml", &CLIFF.replace("500", "50"));
    let s = config(dir.path(), "s.toml", &CLIFF.replace("500", "50").replace("q_learning", "sarsa"));
    let out = dir.path().join("out");
    let status = bin().args(["compare", "--config"]).arg(&s).arg("--config").arg(&q).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let joined = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(joined.lines().next(), Some("episode,return_a,max_q_change_a,return_b,max_q_change_b"));
    assert_eq!(joined.lines().count(), 51);

    // identical configs give identical columns
    bin().args(["compare", "--config"]).arg(&q).arg("--config").arg(&q).arg("--out").arg(&out).status().unwrap();
    for line in fs::read_to_string(out.join("compare.csv")).unwrap().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1..3], cols[3..5]);
    }

    let short = config(dir.path(), "short.toml", &CLIFF.replace("500", "49"));
    let out2 = bin().args(["compare", "--config"]).arg(&q).arg("--config").arg(&short).arg("--out").arg(&out).output().unwrap();
    assert_eq!(out2.status.code(), Some(2));
}

#[test]
fn oracle_mode_reports_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    for algo in ["sarsa", "q_learning", "expected_sarsa", "mc_control"] {
        let cfg = config(dir.path(), "c.toml", &CLIFF.replace("500", "30").replace("q_learning", algo));
        let out = dir.path().join(algo);
        let status = bin().args(["compare", "--oracle", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("update,max_abs_dq"));
        assert!(lines.all(|l| l.ends_with(",0")), "{algo}: nonzero gap");
    }
}

#[test]
fn listings_name_every_entry() {
    let envs = String::from_utf8(bin().arg("list-envs").output().unwrap().stdout).unwrap();
    for e in ["cliff_walking", "gridworld", "two_state_chain", "chain_mrp", "bandit"] {
        assert!(envs.contains(e));
    }
    let algos = String::from_utf8(bin().arg("list-algos").output().unwrap().stdout).unwrap();
    assert_eq!(algos.lines().count(), 14);
}
