//! Penalty-based successive convex approximation.
//!
//! The binary modes and the nonconvex equalities `η = θ²`, `ς² = b ς̃` are
//! relaxed into penalties; each outer iteration minimizes a convex majorizer
//! of the penalized objective around the previous iterate. With the modes
//! fixed, [`power`] runs the same machinery on the powers alone.

mod driver;
pub mod enumerate;
pub mod joint;
pub mod penalty;
pub mod polish;
pub mod power;
pub mod problem;
pub mod solver;
pub mod surrogate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se::{ModeAssignment, PowerAllocation, SeVector};

pub use joint::{assemble_subproblem, initialize, run_sca, JointLayout};
pub use penalty::{penalty_c1, penalty_c2, penalty_c3, surrogate_penalties, Residuals};
pub use polish::round_and_polish;
pub use problem::ConvexSubproblem;
pub use solver::{solve_subproblem, Solution};

/// How the relaxed modes are drawn for the first anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModeInit {
    /// `a_m ~ U[lo, hi]`
    Uniform { lo: f64, hi: f64 },
    /// `a_m = 0.5`: the first step is driven by the SE gradient alone.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// Accepted residual level for `C1..C3`.
    pub epsilon_penalty: f64,
    /// Outer loop stops once the objective moves by less than this.
    pub epsilon_conv: f64,
    pub max_iters: usize,
    pub feasibility_iters: usize,
    pub mode_init: ModeInit,
    pub rounding: Rounding,
    /// Passes of single-AP mode flips after rounding, each flip re-polished
    /// and kept if it raises the sum SE. 0 disables the refinement.
    pub flip_passes: usize,
    pub solver_tol: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda: 1.0,
            mu1: 0.1,
            mu2: 0.1,
            mu3: 100.0,
            epsilon_penalty: 1e-3,
            epsilon_conv: 1e-3,
            max_iters: 200,
            feasibility_iters: 20,
            mode_init: ModeInit::Midpoint,
            rounding: Rounding::Sweep,
            flip_passes: 0,
            solver_tol: solver::DEFAULT_TOLERANCE,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("lambda", self.lambda),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("epsilon_penalty", self.epsilon_penalty),
            ("epsilon_conv", self.epsilon_conv),
            ("solver_tol", self.solver_tol),
        ];
        if let Some((name, v)) = pos.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if let ModeInit::Uniform { lo, hi } = self.mode_init {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::InvalidConfig(format!("mode_init range [{lo}, {hi}] outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub(crate) fn mu(&self) -> [f64; 3] {
        [self.mu1, self.mu2, self.mu3]
    }
}

/// How the relaxed modes become binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// `a ≥ 0.5` goes DL.
    Threshold,
    /// The 0.5 threshold plus every threshold between sorted `a` values;
    /// the best polished result wins.
    Sweep,
}

/// A (possibly relaxed) operating point with the SE epigraph variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub mode: ModeAssignment,
    pub power: PowerAllocation,
    pub q_ul: Vec<f64>,
    pub q_dl: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Feasibility,
    Joint,
    Power,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Feasibility => "feasibility",
            Phase::Joint => "joint",
            Phase::Power => "power",
        }
    }
}

/// One outer iteration. The residuals are those of the solver variables;
/// in the power-only phase they vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: Phase,
    pub objective: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Infeasible,
    MaxIters,
    NumericalFailure,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::Infeasible => "infeasible",
            RunStatus::MaxIters => "max_iters",
            RunStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Final point; binary modes whenever the run reached rounding.
    pub point: DecisionPoint,
    /// Exact SEs at `point`.
    pub se: SeVector,
    pub trace: Vec<TraceRow>,
    /// Penalty residuals at `point`.
    pub residuals: Residuals,
    /// Residuals of the relaxed iterate just before rounding.
    pub relaxed_residuals: Option<Residuals>,
    /// Relaxed DL indicators `a` just before rounding.
    pub relaxed_modes: Option<Vec<f64>>,
    /// Exact sum SE of the rounded point before the power-only polish.
    pub pre_polish_sum: Option<f64>,
    pub status: RunStatus,
    pub iterations: usize,
}

impl RunResult {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }
}
