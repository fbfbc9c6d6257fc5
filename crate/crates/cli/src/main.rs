//! `lensrl`: run and compare reinforcement-learning experiments described by
//! TOML configs.

mod config;
mod experiment;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use config::{AlgoKind, EnvSpec, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lensrl", version, about = "Run and compare reinforcement-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; writes curve.csv and table.csv and prints a summary.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "DIR", default_value = "lensrl-out")]
        out: PathBuf,
        /// Override the config's seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Join the curves of two experiments (compare.csv), or with --oracle,
    /// check one learner against its direct implementation (oracle.csv).
    Compare {
        #[arg(long, value_name = "PATH", num_args = 1, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_name = "DIR", default_value = "lensrl-out")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// List the bundled environments.
    ListEnvs,
    /// List the available algorithms.
    ListAlgos,
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let outcome = experiment::run(&cfg)?;
            write(&out, "curve.csv", &outcome.curve.to_csv())?;
            write(&out, "table.csv", &outcome.table)?;
            let line = outcome.summary.to_string();
            write(&out, "summary.txt", &format!("{line}\n"))?;
            println!("{line}");
        }
        Command::Compare { config, oracle, out, seed } => {
            if oracle {
                let [path] = config.as_slice() else {
                    anyhow::bail!(lensrl::Error::Config("compare --oracle takes exactly one --config".into()));
                };
                let cfg = load(path, seed)?;
                let gaps = experiment::oracle_gaps(&cfg)?;
                write(&out, "oracle.csv", &gaps.to_csv())?;
                let worst = gaps.rows.iter().map(|r| r[0]).fold(0.0, f64::max);
                println!("oracle algorithm={} updates={} max_abs_dq={worst}", cfg.algorithm, gaps.rows.len());
            } else {
                let [a, b] = config.as_slice() else {
                    anyhow::bail!(lensrl::Error::Config("compare takes exactly two --config files".into()));
                };
                let (ca, cb) = (load(a, seed)?, load(b, seed)?);
                // independent runs, no shared state
                let (ra, rb) = std::thread::scope(|s| {
                    let ha = s.spawn(|| experiment::run(&ca));
                    let hb = s.spawn(|| experiment::run(&cb));
                    (ha.join().expect("run panicked"), hb.join().expect("run panicked"))
                });
                let (ra, rb) = (ra?, rb?);
                write(&out, "compare.csv", &experiment::join(&ra.curve, &rb.curve)?)?;
                println!("a: {}", ra.summary);
                println!("b: {}", rb.summary);
            }
        }
        Command::ListEnvs => {
            for (name, about) in EnvSpec::NAMES {
                println!("{name:<16} {about}");
            }
        }
        Command::ListAlgos => {
            for (_, name, about) in AlgoKind::ALL {
                println!("{name:<18} {about}");
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<lensrl::Error>() {
        Some(lensrl::Error::Config(_)) => 2,
        Some(lensrl::Error::NonConvergence { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("lensrl: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
