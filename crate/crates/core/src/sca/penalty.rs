//! Penalty residuals for the relaxed equalities and binary modes, and their
//! convex majorizers around an anchor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::se::{ModeAssignment, PowerAllocation};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.c1.max(self.c2).max(self.c3)
    }

    pub fn weighted(&self, lambda: f64, mu: [f64; 3]) -> f64 {
        lambda * (mu[0] * self.c1 + mu[1] * self.c2 + mu[2] * self.c3)
    }
}

/// Upper bound of `x y` for `x, y ≥ 0`, tight at `(x0, y0)`:
/// `0.25[(x + y)² - 2(x0 - y0)(x - y) + (x0 - y0)²]`.
pub fn bilinear_upper(x: f64, y: f64, x0: f64, y0: f64) -> f64 {
    0.25 * ((x + y).powi(2) - 2.0 * (x0 - y0) * (x - y) + (x0 - y0).powi(2))
}

/// Upper bound of `-x y` for `x, y ≥ 0`, tight at `(x0, y0)`:
/// `0.25[(x - y)² - 2(x0 + y0)(x + y) + (x0 + y0)²]`.
pub fn neg_bilinear_upper(x: f64, y: f64, x0: f64, y0: f64) -> f64 {
    0.25 * ((x - y).powi(2) - 2.0 * (x0 + y0) * (x + y) + (x0 + y0).powi(2))
}

/// Tangent majorizer of `-x²` at `x0`.
pub fn neg_square_upper(x: f64, x0: f64) -> f64 {
    -2.0 * x0 * x + x0 * x0
}

/// `C1 = Σ (η - θ²)`
pub fn penalty_c1(theta: &DMatrix<f64>, eta: &DMatrix<f64>) -> f64 {
    eta.iter().zip(theta.iter()).map(|(e, t)| e - t * t).sum()
}

/// `C2 = Σ_m Σ_ℓ (b_m ς̃_ℓ - ς_mℓ²)`
pub fn penalty_c2(b: &[f64], varsigma_tilde: &[f64], varsigma: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for (m, bm) in b.iter().enumerate() {
        for (l, s) in varsigma_tilde.iter().enumerate() {
            acc += bm * s - varsigma[(m, l)].powi(2);
        }
    }
    acc
}

/// `C3 = Σ (a - a²) + Σ (b - b²)`
pub fn penalty_c3(a: &[f64], b: &[f64]) -> f64 {
    a.iter().chain(b.iter()).map(|v| v - v * v).sum()
}

pub fn residuals(mode: &ModeAssignment, power: &PowerAllocation) -> Residuals {
    Residuals {
        c1: penalty_c1(&power.theta, &power.eta),
        c2: penalty_c2(&mode.b, &power.varsigma_tilde, &power.varsigma),
        c3: penalty_c3(&mode.a, &mode.b),
    }
}

/// Majorizers `(C̃1, C̃2, C̃3)` of the penalties at `point`, linearized at `anchor`.
pub fn surrogate_penalties(
    mode: &ModeAssignment,
    power: &PowerAllocation,
    anchor_mode: &ModeAssignment,
    anchor_power: &PowerAllocation,
) -> Residuals {
    let c1 = power
        .eta
        .iter()
        .zip(power.theta.iter().zip(anchor_power.theta.iter()))
        .map(|(e, (t, t0))| e + neg_square_upper(*t, *t0))
        .sum();
    let mut c2 = 0.0;
    for m in 0..mode.len() {
        for l in 0..power.varsigma_tilde.len() {
            c2 += bilinear_upper(
                mode.b[m],
                power.varsigma_tilde[l],
                anchor_mode.b[m],
                anchor_power.varsigma_tilde[l],
            ) + neg_square_upper(power.varsigma[(m, l)], anchor_power.varsigma[(m, l)]);
        }
    }
    let c3 = mode
        .a
        .iter()
        .zip(&anchor_mode.a)
        .chain(mode.b.iter().zip(&anchor_mode.b))
        .map(|(x, x0)| x + neg_square_upper(*x, *x0))
        .sum();
    Residuals { c1, c2, c3 }
}
