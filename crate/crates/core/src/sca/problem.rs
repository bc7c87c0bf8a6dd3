//! Solver-agnostic description of a convex subproblem.
//!
//! Every nonlinear piece is stored as a sum of squares of linear forms, so
//! convexity holds by construction: the objective is
//! `Σ_j (f_j·x)² + c·x + c0` and each quadratic constraint reads
//! `Σ_j (f_j·x)² + g·x + h ≤ 0`.

use serde::{Deserialize, Serialize};

/// Sparse linear form `Σ coef · x[idx]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinForm {
    pub terms: Vec<(usize, f64)>,
}

impl LinForm {
    pub fn new() -> Self {
        LinForm { terms: Vec::new() }
    }

    pub fn var(idx: usize, coef: f64) -> Self {
        LinForm {
            terms: vec![(idx, coef)],
        }
    }

    pub fn add(&mut self, idx: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
        self
    }

    pub fn with(mut self, idx: usize, coef: f64) -> Self {
        self.add(idx, coef);
        self
    }

    pub fn extend_scaled(&mut self, other: &LinForm, scale: f64) {
        for &(i, c) in &other.terms {
            self.add(i, c * scale);
        }
    }

    pub fn scaled(&self, scale: f64) -> LinForm {
        let mut out = LinForm::new();
        out.extend_scaled(self, scale);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|(_, c)| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintTag {
    ModeSum,
    Box,
    ApPower,
    DlModeCoupling,
    EtaTildeUpper,
    EtaTildeLower,
    ThetaSquare,
    VarsigmaSquare,
    UlSe,
    DlSe,
    SeTarget,
}

/// `Σ_j (f_j·x)² + g·x + h ≤ 0`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadConstraint {
    pub tag: ConstraintTag,
    pub squares: Vec<LinForm>,
    pub linear: LinForm,
    pub constant: f64,
}

impl QuadConstraint {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.squares.iter().map(|f| f.eval(x).powi(2)).sum::<f64>() + self.linear.eval(x) + self.constant
    }
}

/// `f·x ≤ rhs` (or `= rhs` for equalities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinConstraint {
    pub tag: ConstraintTag,
    pub form: LinForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub squares: Vec<LinForm>,
    pub linear: LinForm,
    pub constant: f64,
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.squares.iter().map(|f| f.eval(x).powi(2)).sum::<f64>() + self.linear.eval(x) + self.constant
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexSubproblem {
    pub num_vars: usize,
    pub objective: Objective,
    pub equalities: Vec<LinConstraint>,
    pub inequalities: Vec<LinConstraint>,
    pub quadratics: Vec<QuadConstraint>,
}

impl ConvexSubproblem {
    pub fn new(num_vars: usize) -> Self {
        ConvexSubproblem {
            num_vars,
            ..Default::default()
        }
    }

    pub fn equality(&mut self, tag: ConstraintTag, form: LinForm, rhs: f64) {
        self.equalities.push(LinConstraint { tag, form, rhs });
    }

    pub fn le(&mut self, tag: ConstraintTag, form: LinForm, rhs: f64) {
        self.inequalities.push(LinConstraint { tag, form, rhs });
    }

    /// `lo ≤ x[idx] ≤ hi`; either side may be infinite.
    pub fn bounds(&mut self, idx: usize, lo: f64, hi: f64) {
        if lo.is_finite() {
            self.le(ConstraintTag::Box, LinForm::var(idx, -1.0), -lo);
        }
        if hi.is_finite() {
            self.le(ConstraintTag::Box, LinForm::var(idx, 1.0), hi);
        }
    }

    pub fn quad(&mut self, c: QuadConstraint) {
        self.quadratics.push(c);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|c| (c.form.eval(x) - c.rhs).abs());
        let le = self.inequalities.iter().map(|c| c.form.eval(x) - c.rhs);
        let q = self.quadratics.iter().map(|c| c.eval(x));
        eq.chain(le).chain(q).fold(0.0, f64::max)
    }

    /// Structural curvature check: every quadratic term is a sum of squares
    /// with finite coefficients and every index is in range.
    pub fn check_curvature(&self) -> bool {
        let n = self.num_vars;
        let form_ok = |f: &LinForm| f.is_finite() && f.terms.iter().all(|&(i, _)| i < n);
        self.objective.squares.iter().all(form_ok)
            && form_ok(&self.objective.linear)
            && self.equalities.iter().chain(&self.inequalities).all(|c| form_ok(&c.form) && c.rhs.is_finite())
            && self.quadratics.iter().all(|c| {
                c.squares.iter().all(form_ok) && form_ok(&c.linear) && c.constant.is_finite()
            })
    }
}
