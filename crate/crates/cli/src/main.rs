use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use vfdcf_core::harness::{export, run_experiment, ExperimentConfig, Scheme};
use vfdcf_core::moments::mc_moment_oracle;
use vfdcf_core::sca::{enumerate::enumerate_modes, run_sca};
use vfdcf_core::Scenario;

#[derive(Parser)]
#[command(name = "vfdcf", version, about = "AP mode assignment and power control for vFD cell-free massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo comparison and write CSV/JSON results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of vfd, heu, hd.
        #[arg(long, value_delimiter = ',')]
        scheme: Option<Vec<Scheme>>,
        /// Override the number of APs.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores, 1 = serial).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare the closed-form channel moments against explicit fading draws.
    ValidateMoments {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
    /// Brute-force every mode vector and compare with the joint algorithm.
    Enumerate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            scheme,
            m,
            realizations,
            seed,
            out,
            workers,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = scheme {
                cfg.schemes = s;
            }
            if let Some(m) = m {
                cfg.system.num_aps = m;
            }
            if let Some(r) = realizations {
                cfg.realizations = r;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(w) = workers {
                cfg.parallelism = w;
            }
            cfg.validate()?;
            let summary = run_experiment(&cfg)?;
            export(&summary, &cfg.output_dir).with_context(|| format!("writing {}", cfg.output_dir.display()))?;
            for s in &summary.schemes {
                println!(
                    "{:<4} converged {:>3}/{}  p5 {}  median {}  ({:.1}s)",
                    s.scheme.as_str(),
                    s.converged,
                    cfg.realizations,
                    s.p5.map_or("-".into(), |v| format!("{v:.3}")),
                    s.median.map_or("-".into(), |v| format!("{v:.3}")),
                    s.wall_clock.total_s,
                );
            }
            println!("results in {}", cfg.output_dir.display());
        }
        Command::ValidateMoments { config, draws } => {
            let cfg = load(&config)?;
            let sc = Scenario::generate(&cfg.system, cfg.base_seed)?;
            let report = mc_moment_oracle(&sc, draws, cfg.base_seed, cfg.execution());
            println!(
                "{} moments, {} draws: max relative error {:.3e}, max |z| {:.2}",
                report.checks.len(),
                draws,
                report.max_rel_error(),
                report.max_z_score()
            );
            if !report.all_within(3.0, 0.02) {
                anyhow::bail!("closed-form moments disagree with the Monte Carlo estimates");
            }
        }
        Command::Enumerate { config } => {
            let cfg = load(&config)?;
            let mut rows = Vec::new();
            for r in 0..cfg.realizations {
                let seed = cfg.base_seed + r as u64;
                let sc = Scenario::generate(&cfg.system, seed)?;
                let en = enumerate_modes(&sc, &cfg.penalty, cfg.execution())?;
                let joint = run_sca(&sc, &cfg.penalty, seed)?;
                let best = en.best_entry();
                let ratio = match best {
                    Some(b) if joint.converged() => Some(joint.se.sum / b.result.se.sum),
                    _ => None,
                };
                println!(
                    "seed {seed}: best {}  joint {:.4} ({})  ratio {}",
                    best.map_or("infeasible".into(), |b| format!("{:.4}", b.result.se.sum)),
                    joint.se.sum,
                    joint.status.as_str(),
                    ratio.map_or("-".into(), |v| format!("{v:.4}")),
                );
                rows.push(json!({
                    "seed": seed,
                    "best_sum_se": best.map(|b| b.result.se.sum),
                    "best_dl_flags": best.map(|b| b.dl_flags.clone()),
                    "joint_sum_se": joint.se.sum,
                    "joint_status": joint.status,
                    "ratio": ratio,
                }));
            }
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("enumeration.json");
            std::fs::write(&path, serde_json::to_string_pretty(&rows)?)?;
            println!("results in {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
