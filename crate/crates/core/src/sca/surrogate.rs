//! Concave minorant of `log(1 + x²/y)` around `(x0, y0)`:
//!
//! ```text
//! log(1 + x0²/y0) - x0²/y0 + 2 x0 x / y0 - x0² (x² + y) / (y0 (x0² + y0))
//! ```
//!
//! It is exact at the anchor and lower-bounds the SE everywhere for `y > 0`.
//! As the log term is a constant, constraints `q ≤ bound` are convex quadratic.

use super::problem::{ConstraintTag, LinForm, QuadConstraint};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::se::{self, ModeAssignment, PowerAllocation};

/// Linearization data at an anchor with signal amplitude `x0` and interference `y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioAnchor {
    pub x0: f64,
    pub y0: f64,
}

impl RatioAnchor {
    pub fn new(x0: f64, y0: f64) -> Result<Self> {
        if !(y0 > 0.0) || !y0.is_finite() || !x0.is_finite() {
            return Err(Error::DegenerateAnchor(format!(
                "interference term must be positive, got {y0:e}"
            )));
        }
        Ok(RatioAnchor { x0, y0 })
    }

    fn ratio(&self) -> f64 {
        self.x0 * self.x0 / self.y0
    }

    /// Coefficient of `x²` (and of `y`) in the minorant.
    fn curvature(&self) -> f64 {
        let r = self.x0 * self.x0;
        r / (self.y0 * (r + self.y0))
    }

    /// Constant part `log(1 + r0) - r0`.
    fn offset(&self) -> f64 {
        let r = self.ratio();
        r.ln_1p() - r
    }

    /// Minorant in nats.
    pub fn bound_nats(&self, x: f64, y: f64) -> f64 {
        self.offset() + 2.0 * self.x0 * x / self.y0 - self.curvature() * (x * x + y)
    }

    /// Minorant of `prelog · log2(1 + x²/y)`.
    pub fn bound_bits(&self, prelog: f64, x: f64, y: f64) -> f64 {
        prelog / std::f64::consts::LN_2 * self.bound_nats(x, y)
    }
}

/// `y` as a sum of squares of linear forms plus a linear part and a constant.
#[derive(Debug, Clone, Default)]
pub struct QuadExpr {
    pub squares: Vec<LinForm>,
    pub linear: LinForm,
    pub constant: f64,
}

impl QuadExpr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.squares.iter().map(|f| f.eval(x).powi(2)).sum::<f64>() + self.linear.eval(x) + self.constant
    }
}

/// Emits `q ≤ prelog · minorant(signal(x), interference(x))` as a convex
/// quadratic constraint, after dividing through by `prelog / ln 2`.
pub fn se_constraint(
    tag: ConstraintTag,
    prelog: f64,
    anchor: RatioAnchor,
    signal: &LinForm,
    interference: &QuadExpr,
    q_idx: usize,
) -> QuadConstraint {
    let kappa = prelog / std::f64::consts::LN_2;
    if kappa <= 0.0 {
        // zero prelog: q ≤ 0
        return QuadConstraint {
            tag,
            squares: Vec::new(),
            linear: LinForm::var(q_idx, 1.0),
            constant: 0.0,
        };
    }
    let c = anchor.curvature();
    let root = c.sqrt();
    let mut squares = Vec::with_capacity(interference.squares.len() + 1);
    if c > 0.0 {
        squares.push(signal.scaled(root));
        squares.extend(interference.squares.iter().map(|f| f.scaled(root)));
    }
    let mut linear = LinForm::var(q_idx, 1.0 / kappa);
    if c > 0.0 {
        linear.extend_scaled(&interference.linear, c);
    }
    linear.extend_scaled(signal, -2.0 * anchor.x0 / anchor.y0);
    QuadConstraint {
        tag,
        squares,
        linear,
        constant: c * interference.constant - anchor.offset(),
    }
}

/// One SINR written as `signal(x)² / interference(x)`, both in solver variables.
#[derive(Debug, Clone, Default)]
pub struct SeBlock {
    pub signal: LinForm,
    pub interference: QuadExpr,
}

impl SeBlock {
    /// Exact SE at `x` (zero when the signal vanishes).
    pub fn se(&self, prelog: f64, x: &[f64]) -> f64 {
        se::se_from_ratio(prelog, self.signal.eval(x), self.interference.eval(x))
    }

    pub fn anchor(&self, x: &[f64]) -> Result<RatioAnchor> {
        RatioAnchor::new(self.signal.eval(x), self.interference.eval(x))
    }

    /// `q ≤ minorant` linearized at `anchor_x`.
    pub fn constraint(&self, tag: ConstraintTag, prelog: f64, anchor_x: &[f64], q_idx: usize) -> Result<QuadConstraint> {
        Ok(se_constraint(tag, prelog, self.anchor(anchor_x)?, &self.signal, &self.interference, q_idx))
    }
}

/// Minorant `S̃_ul` at `power`, linearized at `anchor` (both with their own modes).
pub fn surrogate_ul_se(
    sc: &Scenario,
    mode: &ModeAssignment,
    power: &PowerAllocation,
    anchor_mode: &ModeAssignment,
    anchor_power: &PowerAllocation,
) -> Result<Vec<f64>> {
    let psi = se::psi(sc, &power.varsigma)?;
    let phi = se::phi_with(sc, &mode.b, &power.varsigma, |i, m, k| power.eta_tilde.get(i, m, k))?;
    let psi0 = se::psi(sc, &anchor_power.varsigma)?;
    let phi0 = se::phi_with(sc, &anchor_mode.b, &anchor_power.varsigma, |i, m, k| {
        anchor_power.eta_tilde.get(i, m, k)
    })?;
    let prelog = sc.cfg.prelog();
    (0..sc.num_ul())
        .map(|l| Ok(RatioAnchor::new(psi0[l], phi0[l])?.bound_bits(prelog, psi[l], phi[l])))
        .collect()
}

/// Minorant `S̃_dl` at `power`, linearized at `anchor`.
pub fn surrogate_dl_se(sc: &Scenario, power: &PowerAllocation, anchor_power: &PowerAllocation) -> Result<Vec<f64>> {
    let xi = se::xi(sc, &power.theta)?;
    let om = se::omega(sc, &power.theta, &power.varsigma_tilde)?;
    let xi0 = se::xi(sc, &anchor_power.theta)?;
    let om0 = se::omega(sc, &anchor_power.theta, &anchor_power.varsigma_tilde)?;
    let prelog = sc.cfg.prelog();
    (0..sc.num_dl())
        .map(|k| Ok(RatioAnchor::new(xi0[k], om0[k])?.bound_bits(prelog, xi[k], om[k])))
        .collect()
}
