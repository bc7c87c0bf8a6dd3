//! Clarabel backend for [`ConvexSubproblem`].
//!
//! Equalities map to the zero cone, linear inequalities to the nonnegative
//! orthant, and each quadratic constraint `‖F x‖² ≤ t` with `t = -(g·x + h)`
//! to the rotated form `‖(F x, (t - 1)/2)‖ ≤ (t + 1)/2`.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::problem::{ConvexSubproblem, LinForm};
use crate::error::{Error, Result};

/// Largest accepted constraint violation of a returned point.
pub const DEFAULT_TOLERANCE: f64 = 1e-7;
/// Stalled solves (max iterations, insufficient progress) are still returned
/// when their violation stays within this multiple of the tolerance.
pub const INACCURATE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub max_violation: f64,
    /// Solver reported optimality and the violation is within tolerance.
    pub accurate: bool,
}

#[derive(Default)]
struct Triplets {
    entries: BTreeMap<(usize, usize), f64>,
}

impl Triplets {
    fn add(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            *self.entries.entry((row, col)).or_insert(0.0) += v;
        }
    }

    fn add_form(&mut self, row: usize, form: &LinForm, scale: f64) {
        for &(j, c) in &form.terms {
            self.add(row, j, c * scale);
        }
    }

    fn into_csc(self, m: usize, n: usize) -> CscMatrix<f64> {
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals = Vec::with_capacity(self.entries.len());
        for ((r, c), v) in self.entries {
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        CscMatrix::new_from_triplets(m, n, rows, cols, vals)
    }
}

fn settings() -> DefaultSettings<f64> {
    DefaultSettings {
        verbose: false,
        max_iter: 300,
        presolve_enable: false,
        ..DefaultSettings::default()
    }
}

pub fn solve_subproblem(sp: &ConvexSubproblem, tol: f64) -> Result<Solution> {
    debug_assert!(sp.check_curvature(), "subproblem failed the curvature check");
    let n = sp.num_vars;

    // objective: ½ xᵀ P x + qᵀ x with P = 2 Σ f fᵀ (upper triangle)
    let mut p = Triplets::default();
    for f in &sp.objective.squares {
        for &(i, ci) in &f.terms {
            for &(j, cj) in &f.terms {
                if i <= j {
                    p.add(i, j, 2.0 * ci * cj);
                }
            }
        }
    }
    let mut q = vec![0.0; n];
    for &(i, c) in &sp.objective.linear.terms {
        q[i] += c;
    }

    let mut a = Triplets::default();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0;
    if !sp.equalities.is_empty() {
        for c in &sp.equalities {
            a.add_form(row, &c.form, 1.0);
            b.push(c.rhs);
            row += 1;
        }
        cones.push(SupportedConeT::ZeroConeT(sp.equalities.len()));
    }
    if !sp.inequalities.is_empty() {
        for c in &sp.inequalities {
            a.add_form(row, &c.form, 1.0);
            b.push(c.rhs);
            row += 1;
        }
        cones.push(SupportedConeT::NonnegativeConeT(sp.inequalities.len()));
    }
    for c in &sp.quadratics {
        // s0 = (t + 1)/2 = (1 - h - g·x)/2
        a.add_form(row, &c.linear, 0.5);
        b.push(0.5 * (1.0 - c.constant));
        row += 1;
        for f in &c.squares {
            a.add_form(row, f, -1.0);
            b.push(0.0);
            row += 1;
        }
        // s_last = (t - 1)/2 = (-1 - h - g·x)/2
        a.add_form(row, &c.linear, 0.5);
        b.push(0.5 * (-1.0 - c.constant));
        row += 1;
        cones.push(SupportedConeT::SecondOrderConeT(c.squares.len() + 2));
    }

    let pm = p.into_csc(n, n);
    let am = a.into_csc(row, n);
    let mut solver = DefaultSolver::new(&pm, &q, &am, &b, &cones, settings())
        .map_err(|e| Error::NumericalFailure(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let x = sol.x.clone();
    let violation = sp.max_violation(&x);
    let finite = x.iter().all(|v| v.is_finite());
    let accept = |x: Vec<f64>, accurate: bool| {
        Ok(Solution {
            objective: sp.objective_value(&x),
            x,
            iterations: sol.iterations,
            max_violation: violation,
            accurate,
        })
    };
    match sol.status {
        SolverStatus::Solved if finite => accept(x, violation <= tol),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Err(Error::Infeasible),
        SolverStatus::AlmostSolved
        | SolverStatus::MaxIterations
        | SolverStatus::InsufficientProgress
        | SolverStatus::NumericalError
            if finite && violation <= INACCURATE_FACTOR * tol =>
        {
            log::debug!("accepting {:?} iterate with violation {violation:e}", sol.status);
            accept(x, false)
        }
        SolverStatus::MaxIterations => Err(Error::Infeasible),
        other => Err(Error::NumericalFailure(format!("{other:?} (violation {violation:e})"))),
    }
}

#[cfg(test)]
mod tests {
    use super::super::problem::{ConstraintTag, QuadConstraint};
    use super::*;

    #[test]
    fn solves_small_qcqp() {
        // max x + y  s.t.  x² + y² ≤ 1  →  x = y = 1/√2
        let mut p = ConvexSubproblem::new(2);
        p.objective.linear = LinForm::var(0, -1.0).with(1, -1.0);
        p.quad(QuadConstraint {
            tag: ConstraintTag::Box,
            squares: vec![LinForm::var(0, 1.0), LinForm::var(1, 1.0)],
            linear: LinForm::new(),
            constant: -1.0,
        });
        let s = solve_subproblem(&p, 1e-7).unwrap();
        let r = 0.5f64.sqrt();
        assert!((s.x[0] - r).abs() < 1e-6 && (s.x[1] - r).abs() < 1e-6);
        assert!((s.objective + 2.0 * r).abs() < 1e-6);
    }

    #[test]
    fn quadratic_objective_and_equality() {
        // min x² + y² - 2x  s.t. x + y = 1
        let mut p = ConvexSubproblem::new(2);
        p.objective.squares = vec![LinForm::var(0, 1.0), LinForm::var(1, 1.0)];
        p.objective.linear = LinForm::var(0, -2.0);
        p.equality(ConstraintTag::ModeSum, LinForm::var(0, 1.0).with(1, 1.0), 1.0);
        let s = solve_subproblem(&p, 1e-7).unwrap();
        // stationarity 2x - 2 = 2y = λ with x + y = 1 → x = 1, y = 0
        assert!((s.x[0] - 1.0).abs() < 1e-6 && s.x[1].abs() < 1e-6, "{:?}", s.x);
    }

    #[test]
    fn bilinear_square_objective() {
        // min (x + y)² - x - y  → x + y = 1/2 (any split), x, y ≥ 0
        let mut p = ConvexSubproblem::new(2);
        p.objective.squares = vec![LinForm::var(0, 1.0).with(1, 1.0)];
        p.objective.linear = LinForm::var(0, -1.0).with(1, -1.0);
        p.bounds(0, 0.0, 1.0);
        p.bounds(1, 0.0, 1.0);
        let s = solve_subproblem(&p, 1e-7).unwrap();
        assert!((s.x[0] + s.x[1] - 0.5).abs() < 1e-6);
        assert!((s.objective + 0.25).abs() < 1e-7);
    }

    #[test]
    fn reports_infeasibility() {
        let mut p = ConvexSubproblem::new(1);
        p.bounds(0, 1.0, f64::INFINITY);
        p.quad(QuadConstraint {
            tag: ConstraintTag::Box,
            squares: vec![LinForm::var(0, 1.0)],
            linear: LinForm::new(),
            constant: -0.25,
        });
        assert!(matches!(solve_subproblem(&p, 1e-7), Err(Error::Infeasible)));
    }
}
