//! Outer loop shared by the joint and the power-only problems: an optional
//! feasibility phase followed by majorize-minimize steps on `-Σq + penalty`.

use log::{debug, warn};

use super::penalty::Residuals;
use super::problem::{ConstraintTag, ConvexSubproblem, LinForm};
use super::surrogate::SeBlock;
use super::{solver, PenaltyConfig, Phase, RunStatus, TraceRow};
use crate::error::{Error, Result};

/// Slack in the feasibility phase is floored here so the phase stays bounded.
const SLACK_FLOOR: f64 = -1.0;
/// Exact SEs this close below the target still count as meeting it.
const TARGET_SLACK: f64 = 1e-9;
/// The feasibility phase gives up once its slack improves by less than this.
const STALL: f64 = 1e-7;

pub(crate) trait SeModel {
    const PHASE: Phase;

    /// Number of variables, slack excluded.
    fn num_vars(&self) -> usize;
    fn prelog(&self) -> f64;
    fn dl_blocks(&self) -> &[SeBlock];
    fn ul_blocks(&self) -> &[SeBlock];
    fn q_dl(&self, k: usize) -> usize;
    fn q_ul(&self, l: usize) -> usize;
    fn dl_target(&self) -> f64;
    fn ul_target(&self) -> f64;
    /// Adds every constraint except the SE ones and, when `penalize`, the
    /// penalty majorizer linearized at `anchor` to the objective.
    fn structure(&self, sp: &mut ConvexSubproblem, anchor: &[f64], penalize: bool);
    /// Pulls a solver point back into the exact box/power constraints.
    fn project(&self, x: &mut [f64]);
    fn residuals(&self, x: &[f64]) -> Residuals;
    fn penalty(&self, r: &Residuals) -> f64;
}

pub(crate) struct LoopOutcome {
    pub x: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub status: RunStatus,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Goal {
    MaxSum,
    Feasibility,
}

fn blocks<M: SeModel>(model: &M) -> impl Iterator<Item = (&SeBlock, usize, f64, ConstraintTag)> {
    let dl = model
        .dl_blocks()
        .iter()
        .enumerate()
        .map(|(k, b)| (b, model.q_dl(k), model.dl_target(), ConstraintTag::DlSe));
    let ul = model
        .ul_blocks()
        .iter()
        .enumerate()
        .map(|(l, b)| (b, model.q_ul(l), model.ul_target(), ConstraintTag::UlSe));
    dl.chain(ul)
}

/// Worst `SE - target` over all UEs at `x`.
pub(crate) fn qos_margin<M: SeModel>(model: &M, x: &[f64]) -> f64 {
    let prelog = model.prelog();
    blocks(model)
        .map(|(b, _, target, _)| b.se(prelog, x) - target)
        .fold(f64::INFINITY, f64::min)
}

/// Sets every `q` to the exact SE at `x` (or caps it there when `cap_only`).
pub(crate) fn sync_q<M: SeModel>(model: &M, x: &mut [f64], cap_only: bool) {
    let prelog = model.prelog();
    let updates: Vec<(usize, f64)> = blocks(model).map(|(b, q, _, _)| (q, b.se(prelog, x))).collect();
    for (q, se) in updates {
        x[q] = if cap_only { x[q].min(se) } else { se };
    }
}

pub(crate) fn objective<M: SeModel>(model: &M, x: &[f64]) -> (f64, Residuals) {
    let r = model.residuals(x);
    let sum_q: f64 = blocks(model).map(|(_, q, _, _)| x[q]).sum();
    (-sum_q + model.penalty(&r), r)
}

pub(crate) fn build<M: SeModel>(model: &M, anchor: &[f64], goal: Goal) -> Result<ConvexSubproblem> {
    let n = model.num_vars();
    let slack = (goal == Goal::Feasibility).then_some(n);
    let mut sp = ConvexSubproblem::new(n + slack.map_or(0, |_| 1));
    model.structure(&mut sp, anchor, goal == Goal::MaxSum);
    let prelog = model.prelog();
    for (block, q, target, tag) in blocks(model) {
        sp.quad(block.constraint(tag, prelog, anchor, q)?);
        // q ≥ target (- slack)
        let mut form = LinForm::var(q, -1.0);
        if let Some(s) = slack {
            form.add(s, -1.0);
        }
        sp.le(ConstraintTag::SeTarget, form, -target);
        if goal == Goal::MaxSum {
            sp.objective.linear.add(q, -1.0);
        }
    }
    if let Some(s) = slack {
        sp.bounds(s, SLACK_FLOOR, f64::INFINITY);
        sp.objective.linear.add(s, 1.0);
    }
    Ok(sp)
}

/// Runs the feasibility phase (if needed) and the main loop from `x0`.
pub(crate) fn run<M: SeModel>(model: &M, mut x: Vec<f64>, cfg: &PenaltyConfig) -> Result<LoopOutcome> {
    let mut trace = Vec::new();
    let mut iterations = 0;
    model.project(&mut x);
    sync_q(model, &mut x, false);

    // A UE with no serving AP cannot reach a positive target.
    if blocks(model).any(|(b, _, target, _)| b.signal.terms.is_empty() && target > 0.0) {
        return Ok(LoopOutcome { x, trace, status: RunStatus::Infeasible, iterations });
    }

    if qos_margin(model, &x) < -TARGET_SLACK {
        let mut reached = false;
        let mut best_slack = f64::INFINITY;
        for it in 0..cfg.feasibility_iters {
            let sp = build(model, &x, Goal::Feasibility)?;
            let sol = match solver::solve_subproblem(&sp, cfg.solver_tol) {
                Ok(s) => s,
                Err(Error::Infeasible) | Err(Error::NumericalFailure(_)) => break,
                Err(e) => return Err(e),
            };
            iterations += 1;
            let slack = sol.x[model.num_vars()];
            x.copy_from_slice(&sol.x[..model.num_vars()]);
            model.project(&mut x);
            sync_q(model, &mut x, false);
            let (_, r) = objective(model, &x);
            trace.push(TraceRow {
                iteration: it,
                phase: Phase::Feasibility,
                objective: slack,
                c1: r.c1,
                c2: r.c2,
                c3: r.c3,
            });
            if qos_margin(model, &x) >= -TARGET_SLACK {
                reached = true;
                break;
            }
            if best_slack - slack <= STALL {
                break;
            }
            best_slack = best_slack.min(slack);
        }
        if !reached {
            debug!("feasibility phase failed after {iterations} iterations");
            return Ok(LoopOutcome { x, trace, status: RunStatus::Infeasible, iterations });
        }
    }

    let (mut prev, r) = objective(model, &x);
    trace.push(TraceRow {
        iteration: 0,
        phase: M::PHASE,
        objective: prev,
        c1: r.c1,
        c2: r.c2,
        c3: r.c3,
    });
    let mut status = RunStatus::MaxIters;
    for it in 1..=cfg.max_iters {
        let sp = build(model, &x, Goal::MaxSum)?;
        let sol = match solver::solve_subproblem(&sp, cfg.solver_tol) {
            Ok(s) => s,
            Err(e @ (Error::Infeasible | Error::NumericalFailure(_))) => {
                warn!("subproblem solve failed at iteration {it} ({e}); keeping the last iterate");
                status = RunStatus::NumericalFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        x.copy_from_slice(&sol.x[..model.num_vars()]);
        model.project(&mut x);
        sync_q(model, &mut x, true);
        let (obj, r) = objective(model, &x);
        trace.push(TraceRow {
            iteration: it,
            phase: M::PHASE,
            objective: obj,
            c1: r.c1,
            c2: r.c2,
            c3: r.c3,
        });
        let delta = (obj - prev).abs();
        prev = obj;
        if delta <= cfg.epsilon_conv {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(LoopOutcome { x, trace, status, iterations })
}
