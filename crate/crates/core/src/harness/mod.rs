//! Seeded Monte Carlo experiments over network realizations.
//!
//! Realization `r` uses seed `base_seed + r` for the network draw, the SCA
//! start and (through a fixed offset) the random HEU-vFD modes, so every
//! realization is independent of the others and of the worker count.

mod export;
mod stats;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{hd_baseline, heu_vfd};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::sca::{run_sca, PenaltyConfig, Residuals, RunResult, RunStatus, TraceRow};
use crate::scenario::Scenario;

pub use export::{export, write_cdf, write_samples, PLOT_SCRIPT};
pub use stats::{cdf, percentile};

/// Added to the realization seed to get the HEU-vFD mode seed.
pub const HEU_SEED_OFFSET: u64 = 0x5eed_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Vfd,
    Heu,
    Hd,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Vfd, Scheme::Heu, Scheme::Hd];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Vfd => "vfd",
            Scheme::Heu => "heu",
            Scheme::Hd => "hd",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vfd" => Ok(Scheme::Vfd),
            "heu" | "heu-vfd" => Ok(Scheme::Heu),
            "hd" => Ok(Scheme::Hd),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}' (expected vfd, heu or hd)"))),
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "SystemConfig::desk")]
    pub system: SystemConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    pub realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; 0 picks the machine default, 1 runs serially.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale defaults: M = 10, K_d = K_u = 2, 20 realizations, all schemes.
    pub fn desk() -> Self {
        ExperimentConfig {
            system: SystemConfig::desk(),
            penalty: PenaltyConfig::default(),
            schemes: default_schemes(),
            realizations: 20,
            base_seed: 0,
            parallelism: 0,
            output_dir: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.penalty.validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidConfig("realizations must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("schemes must not be empty".into()));
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        Execution::from_workers(self.parallelism)
    }
}

/// One scheme on one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scheme: Scheme,
    pub realization: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub sum_se: f64,
    pub dl_se: Vec<f64>,
    pub ul_se: Vec<f64>,
    pub iterations: usize,
    pub residuals: Residuals,
    /// Set when the run errored instead of returning a status.
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WallClock {
    pub total_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    /// Sum SEs of converged realizations, in realization order.
    pub sum_se: Vec<f64>,
    /// 5th percentile (95%-likely sum SE) of `sum_se`.
    pub p5: Option<f64>,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub converged: usize,
    pub infeasible: usize,
    pub failed: usize,
    pub feasibility_rate: f64,
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub schemes: Vec<SchemeSummary>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

impl ExperimentSummary {
    pub fn scheme(&self, s: Scheme) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|x| x.scheme == s)
    }
}

fn sample_from(scheme: Scheme, realization: usize, seed: u64, res: Result<RunResult>, runtime_s: f64) -> Sample {
    match res {
        Ok(r) => Sample {
            scheme,
            realization,
            seed,
            status: r.status,
            sum_se: r.se.sum,
            dl_se: r.se.dl,
            ul_se: r.se.ul,
            iterations: r.iterations,
            residuals: r.residuals,
            error: None,
            trace: r.trace,
            runtime_s,
        },
        Err(e) => Sample {
            scheme,
            realization,
            seed,
            status: RunStatus::NumericalFailure,
            sum_se: f64::NAN,
            dl_se: Vec::new(),
            ul_se: Vec::new(),
            iterations: 0,
            residuals: Residuals::default(),
            error: Some(e.to_string()),
            trace: Vec::new(),
            runtime_s,
        },
    }
}

/// Runs every requested scheme on one realization.
pub fn run_realization(cfg: &ExperimentConfig, r: usize) -> Vec<Sample> {
    let seed = cfg.base_seed.wrapping_add(r as u64);
    let scenario = Scenario::generate(&cfg.system, seed);
    cfg.schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let res = match &scenario {
                Ok(sc) => match scheme {
                    Scheme::Vfd => run_sca(sc, &cfg.penalty, seed),
                    Scheme::Heu => heu_vfd(sc, seed.wrapping_add(HEU_SEED_OFFSET), &cfg.penalty),
                    Scheme::Hd => hd_baseline(sc, &cfg.penalty),
                },
                Err(e) => Err(Error::InvalidConfig(format!("network generation failed: {e}"))),
            };
            if let Err(e) = &res {
                log::warn!("realization {r} ({}): {e}", scheme.as_str());
            }
            sample_from(scheme, r, seed, res, start.elapsed().as_secs_f64())
        })
        .collect()
}

fn summarize(scheme: Scheme, samples: &[Sample], realizations: usize) -> SchemeSummary {
    let mine: Vec<&Sample> = samples.iter().filter(|s| s.scheme == scheme).collect();
    let sum_se: Vec<f64> = mine
        .iter()
        .filter(|s| s.status == RunStatus::Converged)
        .map(|s| s.sum_se)
        .collect();
    let converged = sum_se.len();
    let infeasible = mine.iter().filter(|s| s.status == RunStatus::Infeasible).count();
    let times: Vec<f64> = mine.iter().map(|s| s.runtime_s).collect();
    let total: f64 = times.iter().sum();
    SchemeSummary {
        scheme,
        p5: percentile(&sum_se, 5.0).ok(),
        median: percentile(&sum_se, 50.0).ok(),
        mean: (converged > 0).then(|| sum_se.iter().sum::<f64>() / converged as f64),
        converged,
        infeasible,
        failed: realizations - converged - infeasible,
        feasibility_rate: converged as f64 / realizations as f64,
        wall_clock: WallClock {
            total_s: total,
            mean_s: total / times.len().max(1) as f64,
            max_s: times.iter().copied().fold(0.0, f64::max),
        },
        sum_se,
    }
}

/// Runs all realizations and aggregates per scheme. Per-realization failures
/// are recorded in the samples; only an invalid config aborts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let per_realization = map_indexed(cfg.execution(), cfg.realizations, |r| run_realization(cfg, r));
    let samples: Vec<Sample> = per_realization.into_iter().flatten().collect();
    let schemes = cfg
        .schemes
        .iter()
        .map(|&s| summarize(s, &samples, cfg.realizations))
        .collect();
    Ok(ExperimentSummary {
        config: cfg.clone(),
        schemes,
        samples,
    })
}
