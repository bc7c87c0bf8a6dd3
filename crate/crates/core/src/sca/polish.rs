//! Rounding the relaxed modes and re-optimizing the powers for them.

use nalgebra::DMatrix;

use super::joint::scaled_residuals;
use super::penalty;
use super::power::{optimize_powers, PowerSpec};
use super::{DecisionPoint, PenaltyConfig, Rounding, RunResult, RunStatus};
use crate::error::Result;
use crate::scenario::Scenario;
use crate::se::{self, ModeAssignment, PowerAllocation, SeVector};

/// Accepted shortfall of an exact SE below its target.
pub const QOS_TOLERANCE: f64 = 1e-4;
/// Accepted excess of an AP's transmit power over its budget.
pub const POWER_TOLERANCE: f64 = 1e-7;

/// Largest `N Σ_k γ_mk η_mk - 1` over APs.
pub fn power_excess(sc: &Scenario, eta: &DMatrix<f64>) -> f64 {
    (0..sc.num_aps())
        .map(|m| {
            (0..sc.num_dl())
                .map(|k| sc.antennas() * sc.stats.gamma_dl[(m, k)] * eta[(m, k)])
                .sum::<f64>()
                - 1.0
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Binary modes summing to one, per-AP power within budget, no DL power on UL
/// APs, and every exact SE at its target.
pub fn verify_point(sc: &Scenario, mode: &ModeAssignment, power: &PowerAllocation, se: &SeVector) -> bool {
    let modes_ok = mode
        .a
        .iter()
        .zip(&mode.b)
        .all(|(&a, &b)| (a == 0.0 || a == 1.0) && a + b == 1.0);
    let silent_ok = (0..sc.num_aps())
        .filter(|&m| mode.a[m] == 0.0)
        .all(|m| power.eta.row(m).iter().all(|&e| e == 0.0));
    let qos_ok = se.dl.iter().all(|&s| s >= sc.cfg.se_target_dl - QOS_TOLERANCE)
        && se.ul.iter().all(|&s| s >= sc.cfg.se_target_ul - QOS_TOLERANCE);
    modes_ok && silent_ok && qos_ok && power_excess(sc, &power.eta) <= POWER_TOLERANCE
}

/// The rounded point: `a ≥ 0.5` goes DL, DL powers of UL APs are zeroed and the
/// UL coefficients rebuilt as `ς = √(b ς̃)`.
pub fn round_point(point: &DecisionPoint) -> (ModeAssignment, PowerAllocation) {
    let flags = point.mode.dl_flags();
    let mode = ModeAssignment::from_dl_flags(&flags);
    let mut theta = point.power.theta.clone();
    for (m, &dl) in flags.iter().enumerate() {
        if !dl {
            theta.row_mut(m).fill(0.0);
        }
    }
    let power = PowerAllocation::consistent(theta, point.power.varsigma_tilde.clone(), &mode.b);
    (mode, power)
}

/// Runs a fixed-mode power optimization and packages it as a [`RunResult`].
pub(crate) fn fixed_mode_result(
    sc: &Scenario,
    flags: &[bool],
    start: Option<(&DMatrix<f64>, &[f64])>,
    pen: &PenaltyConfig,
) -> Result<RunResult> {
    let spec = PowerSpec::vfd(sc, flags);
    let out = optimize_powers(sc, &spec, start, pen)?;
    let mode = ModeAssignment::from_dl_flags(flags);
    let power = PowerAllocation::consistent(out.theta, out.varsigma_tilde, &mode.b);
    let se = se::evaluate(sc, &mode, &power)?;
    let mut status = out.status;
    if status == RunStatus::Converged && !verify_point(sc, &mode, &power, &se) {
        status = RunStatus::Infeasible;
    }
    Ok(RunResult {
        residuals: penalty::residuals(&mode, &power),
        relaxed_residuals: None,
        relaxed_modes: None,
        point: DecisionPoint {
            q_ul: se.ul.clone(),
            q_dl: se.dl.clone(),
            mode,
            power,
        },
        se,
        trace: out.trace,
        pre_polish_sum: None,
        status,
        iterations: out.iterations,
    })
}

/// DL flags from thresholding the relaxed `a` at each of its sorted values:
/// the `j` APs with the largest `a` go DL, for `j = 1..M-1`.
pub fn sweep_candidates(a: &[f64]) -> Vec<Vec<bool>> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    // stable: ties keep AP order
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
    (1..a.len())
        .map(|j| {
            let mut flags = vec![false; a.len()];
            for &m in &order[..j] {
                flags[m] = true;
            }
            flags
        })
        .collect()
}

/// Greedy single-AP flips from a converged fixed-mode result; first
/// improvement is taken, the scan restarts until a pass improves nothing.
fn flip_search(sc: &Scenario, mut best: RunResult, pen: &PenaltyConfig) -> Result<RunResult> {
    let mut iterations = best.iterations;
    for _ in 0..pen.flip_passes {
        let mut improved = false;
        for m in 0..sc.num_aps() {
            let mut flags = best.point.mode.dl_flags();
            flags[m] = !flags[m];
            let res = fixed_mode_result(sc, &flags, None, pen)?;
            iterations += res.iterations;
            if res.converged() && res.se.sum > best.se.sum + pen.epsilon_conv {
                best = res;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

/// Rounds `point`'s modes at 0.5 and polishes the powers with the modes fixed,
/// starting from the rounded powers. With [`Rounding::Sweep`] the other
/// threshold roundings of `a` are polished too and the best converged one wins.
pub fn round_and_polish(sc: &Scenario, point: &DecisionPoint, pen: &PenaltyConfig) -> Result<RunResult> {
    let (mode, power) = round_point(point);
    let pre = se::evaluate(sc, &mode, &power)?;
    let flags = mode.dl_flags();
    let mut best = fixed_mode_result(
        sc,
        &flags,
        Some((&power.theta, power.varsigma_tilde.as_slice())),
        pen,
    )?;
    if pen.rounding == Rounding::Sweep {
        let mut iterations = best.iterations;
        for cand in sweep_candidates(&point.mode.a) {
            if cand == flags {
                continue;
            }
            let res = fixed_mode_result(sc, &cand, None, pen)?;
            iterations += res.iterations;
            let better = res.converged() && (!best.converged() || res.se.sum > best.se.sum);
            if better {
                best = res;
            }
        }
        best.iterations = iterations;
    }
    if pen.flip_passes > 0 && best.converged() {
        best = flip_search(sc, best, pen)?;
    }
    best.relaxed_residuals = Some(scaled_residuals(sc, point));
    best.relaxed_modes = Some(point.mode.a.clone());
    best.pre_polish_sum = Some(pre.sum);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::se::EtaTilde;

    #[test]
    fn rounding_zeroes_ul_rows_and_breaks_ties_to_dl() {
        let sc = Scenario::generate(&SystemConfig::reference(3, 1, 1), 3).unwrap();
        let theta = DMatrix::from_element(3, 1, 1e-5);
        let mode = ModeAssignment::relaxed(vec![0.5, 0.2, 0.99]);
        let power = PowerAllocation {
            eta: theta.map(|t| t * t),
            theta,
            varsigma_tilde: vec![0.4],
            varsigma: DMatrix::from_element(3, 1, 0.1),
            eta_tilde: EtaTilde::zeros(3, 1),
        };
        let p = DecisionPoint { mode, power, q_ul: vec![0.0], q_dl: vec![0.0] };
        let (mode, power) = round_point(&p);
        assert_eq!(mode.a, vec![1.0, 0.0, 1.0]);
        assert_eq!(power.eta[(1, 0)], 0.0);
        assert_eq!(power.varsigma[(0, 0)], 0.0);
        assert!((power.varsigma[(1, 0)] - 0.4f64.sqrt()).abs() < 1e-15);
        let _ = sc;
    }

    #[test]
    fn flip_refinement_never_lowers_the_sum() {
        let sc = Scenario::generate(&SystemConfig::reference(6, 1, 1), 2).unwrap();
        let plain = crate::sca::run_sca(&sc, &PenaltyConfig::default(), 2).unwrap();
        let pen = PenaltyConfig {
            flip_passes: 2,
            ..PenaltyConfig::default()
        };
        let refined = crate::sca::run_sca(&sc, &pen, 2).unwrap();
        assert!(plain.converged() && refined.converged());
        assert!(refined.se.sum >= plain.se.sum - 1e-12);
        assert!(refined.iterations > plain.iterations);
    }
}
