//! Comparison schemes: random fixed modes (HEU-vFD) and half duplex (HD).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::Scenario;
use crate::sca::polish::{fixed_mode_result, power_excess, QOS_TOLERANCE};
use crate::sca::power::{optimize_powers, PowerSpec};
use crate::sca::{DecisionPoint, PenaltyConfig, Residuals, RunResult, RunStatus, TraceRow};
use crate::se::{self, ModeAssignment, PowerAllocation, SeVector};

/// Re-draws allowed when a random mode vector leaves a served UE group without APs.
pub const MODE_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    HeuVfd,
    HalfDuplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Seed for the random modes (HEU-vFD only).
    pub mode_seed: u64,
}

impl BaselineSpec {
    pub fn run(&self, sc: &Scenario, pen: &PenaltyConfig) -> Result<RunResult> {
        match self.kind {
            BaselineKind::HeuVfd => heu_vfd(sc, self.mode_seed, pen),
            BaselineKind::HalfDuplex => hd_baseline(sc, pen),
        }
    }
}

/// Fair coin per AP; re-drawn while a nonempty UE group has no AP of its mode.
pub fn random_modes<R: Rng>(sc: &Scenario, rng: &mut R) -> Vec<bool> {
    let m = sc.num_aps();
    let mut flags = Vec::new();
    for _ in 0..=MODE_REDRAWS {
        flags = (0..m).map(|_| rng.random_bool(0.5)).collect();
        let has_dl = flags.iter().any(|&d| d);
        let has_ul = flags.iter().any(|&d| !d);
        if (sc.num_dl() == 0 || has_dl) && (sc.num_ul() == 0 || has_ul) {
            break;
        }
    }
    flags
}

/// Power control for random binary modes under the same QoS targets.
pub fn heu_vfd(sc: &Scenario, mode_seed: u64, pen: &PenaltyConfig) -> Result<RunResult> {
    pen.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mode_seed);
    let flags = random_modes(sc, &mut rng);
    fixed_mode_result(sc, &flags, None, pen)
}

/// Half duplex: every AP serves the DL UEs for half the data symbols and the UL
/// UEs for the other half; the two power problems are independent.
///
/// In the returned point all APs are marked DL and `varsigma_tilde` holds the UL
/// half's UE powers (`varsigma` is left at zero because no AP is UL at once).
pub fn hd_baseline(sc: &Scenario, pen: &PenaltyConfig) -> Result<RunResult> {
    pen.validate()?;
    let (m, kd, ku) = (sc.num_aps(), sc.num_dl(), sc.num_ul());
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut status = RunStatus::Converged;
    let mut iterations = 0;
    let mut theta = DMatrix::zeros(m, kd);
    let mut vst = vec![0.0; ku];

    let mut merge = |s: RunStatus| {
        // the worst phase decides
        let rank = |s: RunStatus| match s {
            RunStatus::Converged => 0,
            RunStatus::MaxIters => 1,
            RunStatus::NumericalFailure => 2,
            RunStatus::Infeasible => 3,
        };
        if rank(s) > rank(status) {
            status = s;
        }
    };
    if kd > 0 {
        let out = optimize_powers(sc, &PowerSpec::hd_dl(sc), None, pen)?;
        merge(out.status);
        iterations += out.iterations;
        trace.extend(out.trace);
        theta = out.theta;
    }
    if ku > 0 {
        let out = optimize_powers(sc, &PowerSpec::hd_ul(sc), None, pen)?;
        merge(out.status);
        iterations += out.iterations;
        let offset = trace.last().map_or(0, |r| r.iteration + 1);
        trace.extend(out.trace.into_iter().map(|mut r| {
            r.iteration += offset;
            r
        }));
        vst = out.varsigma_tilde;
    }

    let se = SeVector::new(se::hd_dl_se(sc, &theta)?, se::hd_ul_se(sc, &vst)?);
    let mode = ModeAssignment::from_dl_flags(&vec![true; m]);
    let mut power = PowerAllocation::consistent(theta, vst, &mode.b);
    power.varsigma.fill(0.0);
    let scale = sc.cfg.hd_target_scale;
    let qos_ok = se.dl.iter().all(|&s| s >= scale * sc.cfg.se_target_dl - QOS_TOLERANCE)
        && se.ul.iter().all(|&s| s >= scale * sc.cfg.se_target_ul - QOS_TOLERANCE)
        && power.varsigma_tilde.iter().all(|&v| (0.0..=1.0).contains(&v))
        && (kd == 0 || power_excess(sc, &power.eta) <= crate::sca::polish::POWER_TOLERANCE);
    if status == RunStatus::Converged && !qos_ok {
        status = RunStatus::Infeasible;
    }
    Ok(RunResult {
        point: DecisionPoint {
            q_ul: se.ul.clone(),
            q_dl: se.dl.clone(),
            mode,
            power,
        },
        se,
        trace,
        residuals: Residuals::default(),
        relaxed_residuals: None,
        relaxed_modes: None,
        pre_polish_sum: None,
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;

    #[test]
    fn random_modes_cover_both_groups() {
        let sc = Scenario::generate(&SystemConfig::reference(2, 1, 1), 1).unwrap();
        for seed in 0..50 {
            let f = random_modes(&sc, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(f.iter().any(|&d| d) && f.iter().any(|&d| !d));
        }
    }

    #[test]
    fn no_ul_ues_reduces_to_dl_power_control() {
        let sc = Scenario::generate(&SystemConfig::reference(10, 2, 0), 2).unwrap();
        let hd = hd_baseline(&sc, &PenaltyConfig::default()).unwrap();
        assert_eq!(hd.status, RunStatus::Converged);
        assert!(hd.se.ul.is_empty());
        assert!((hd.se.sum - hd.se.dl.iter().sum::<f64>()).abs() < 1e-12);
        let heu = heu_vfd(&sc, 7, &PenaltyConfig::default()).unwrap();
        assert_eq!(heu.status, RunStatus::Converged);
    }

    #[test]
    fn heu_is_deterministic() {
        let sc = Scenario::generate(&SystemConfig::reference(4, 1, 1), 3).unwrap();
        let pen = PenaltyConfig::default();
        assert_eq!(heu_vfd(&sc, 5, &pen).unwrap(), heu_vfd(&sc, 5, &pen).unwrap());
    }
}
