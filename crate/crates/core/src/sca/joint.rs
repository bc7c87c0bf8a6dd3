//! The joint mode/power problem in solver variables.
//!
//! Raw DL coefficients span ten orders of magnitude, so the solver works with
//! `e_mk = N γ_mk η_mk` (the AP power share, in `[0, a_m]`),
//! `t_mk = θ_mk √(N γ_mk)` and `h_imk = N γ_ik η̃_imk`. The UL SINR terms are
//! divided by `Σ_m γ_mℓ`, which leaves the ratio unchanged.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::driver::{self, SeModel};
use super::penalty::{self, Residuals};
use super::polish;
use super::problem::{ConstraintTag, ConvexSubproblem, LinForm, QuadConstraint};
use super::surrogate::{QuadExpr, SeBlock};
use super::{DecisionPoint, ModeInit, PenaltyConfig, Phase, RunResult, RunStatus};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::se::{self, EtaTilde, ModeAssignment, PowerAllocation};

/// Index map of the flattened joint variables:
/// `a[M] b[M] e[M·K_d] t[M·K_d] ς[M·K_u] ς̃[K_u] h[M²·K_d] q_ul[K_u] q_dl[K_d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointLayout {
    pub num_aps: usize,
    pub num_dl: usize,
    pub num_ul: usize,
}

impl JointLayout {
    pub fn new(sc: &Scenario) -> Self {
        JointLayout {
            num_aps: sc.num_aps(),
            num_dl: sc.num_dl(),
            num_ul: sc.num_ul(),
        }
    }

    pub fn a(&self, m: usize) -> usize {
        m
    }
    pub fn b(&self, m: usize) -> usize {
        self.num_aps + m
    }
    pub fn e(&self, m: usize, k: usize) -> usize {
        2 * self.num_aps + m * self.num_dl + k
    }
    pub fn t(&self, m: usize, k: usize) -> usize {
        self.e(0, 0) + self.num_aps * self.num_dl + m * self.num_dl + k
    }
    pub fn s(&self, m: usize, l: usize) -> usize {
        self.t(0, 0) + self.num_aps * self.num_dl + m * self.num_ul + l
    }
    pub fn st(&self, l: usize) -> usize {
        self.s(0, 0) + self.num_aps * self.num_ul + l
    }
    pub fn h(&self, i: usize, m: usize, k: usize) -> usize {
        self.st(0) + self.num_ul + (i * self.num_aps + m) * self.num_dl + k
    }
    pub fn q_ul(&self, l: usize) -> usize {
        self.h(0, 0, 0) + self.num_aps * self.num_aps * self.num_dl + l
    }
    pub fn q_dl(&self, k: usize) -> usize {
        self.q_ul(0) + self.num_ul + k
    }
    pub fn num_vars(&self) -> usize {
        self.q_dl(0) + self.num_dl
    }
}

fn ngamma(sc: &Scenario, m: usize, k: usize) -> f64 {
    sc.antennas() * sc.stats.gamma_dl[(m, k)]
}

fn unscale(v: f64, ng: f64) -> f64 {
    if ng > 0.0 {
        v / ng
    } else {
        0.0
    }
}

/// Flattens a raw decision point into solver variables.
pub fn to_solver(sc: &Scenario, p: &DecisionPoint) -> Vec<f64> {
    let l = JointLayout::new(sc);
    let mut x = vec![0.0; l.num_vars()];
    for m in 0..l.num_aps {
        x[l.a(m)] = p.mode.a[m];
        x[l.b(m)] = p.mode.b[m];
        for k in 0..l.num_dl {
            let ng = ngamma(sc, m, k);
            x[l.e(m, k)] = ng * p.power.eta[(m, k)];
            x[l.t(m, k)] = ng.sqrt() * p.power.theta[(m, k)];
        }
        for u in 0..l.num_ul {
            x[l.s(m, u)] = p.power.varsigma[(m, u)];
        }
    }
    for u in 0..l.num_ul {
        x[l.st(u)] = p.power.varsigma_tilde[u];
        x[l.q_ul(u)] = p.q_ul[u];
    }
    for i in 0..l.num_aps {
        for m in 0..l.num_aps {
            for k in 0..l.num_dl {
                x[l.h(i, m, k)] = ngamma(sc, i, k) * p.power.eta_tilde.get(i, m, k);
            }
        }
    }
    for k in 0..l.num_dl {
        x[l.q_dl(k)] = p.q_dl[k];
    }
    x
}

/// Inverse of [`to_solver`].
pub fn from_solver(sc: &Scenario, x: &[f64]) -> DecisionPoint {
    let l = JointLayout::new(sc);
    let (m_aps, kd, ku) = (l.num_aps, l.num_dl, l.num_ul);
    let a: Vec<f64> = (0..m_aps).map(|m| x[l.a(m)]).collect();
    let b: Vec<f64> = (0..m_aps).map(|m| x[l.b(m)]).collect();
    let is_binary = a.iter().all(|&v| v == 0.0 || v == 1.0);
    let eta = DMatrix::from_fn(m_aps, kd, |m, k| unscale(x[l.e(m, k)], ngamma(sc, m, k)));
    let theta = DMatrix::from_fn(m_aps, kd, |m, k| unscale(x[l.t(m, k)], ngamma(sc, m, k).sqrt()));
    let varsigma = DMatrix::from_fn(m_aps, ku, |m, u| x[l.s(m, u)]);
    let mut eta_tilde = EtaTilde::zeros(m_aps, kd);
    for i in 0..m_aps {
        for m in 0..m_aps {
            for k in 0..kd {
                *eta_tilde.get_mut(i, m, k) = unscale(x[l.h(i, m, k)], ngamma(sc, i, k));
            }
        }
    }
    DecisionPoint {
        mode: ModeAssignment { a, b, is_binary },
        power: PowerAllocation {
            eta,
            theta,
            varsigma_tilde: (0..ku).map(|u| x[l.st(u)]).collect(),
            varsigma,
            eta_tilde,
        },
        q_ul: (0..ku).map(|u| x[l.q_ul(u)]).collect(),
        q_dl: (0..kd).map(|k| x[l.q_dl(k)]).collect(),
    }
}

/// Penalty residuals with `C1` measured in AP power shares, `Σ N γ (η - θ²)`,
/// the scale the optimizer penalizes.
pub fn scaled_residuals(sc: &Scenario, p: &DecisionPoint) -> Residuals {
    let mut r = penalty::residuals(&p.mode, &p.power);
    r.c1 = (0..sc.num_aps())
        .flat_map(|m| (0..sc.num_dl()).map(move |k| (m, k)))
        .map(|(m, k)| ngamma(sc, m, k) * (p.power.eta[(m, k)] - p.power.theta[(m, k)].powi(2)))
        .sum();
    r
}

/// Convex restrictions of `b_m η_ik ≤ η̃_imk` and `ς_mℓ² ≤ b_m ς̃_ℓ` at `anchor`
/// (both in solver variables). Each bilinear term is replaced by its tight
/// quadratic upper bound, so feasibility of the restriction implies the original.
pub fn convexify_coupling(layout: &JointLayout, anchor: &[f64]) -> Vec<QuadConstraint> {
    let l = layout;
    let mut out = Vec::new();
    for i in 0..l.num_aps {
        for m in 0..l.num_aps {
            for k in 0..l.num_dl {
                let (bi, ei, hi) = (l.b(m), l.e(i, k), l.h(i, m, k));
                let d0 = anchor[bi] - anchor[ei];
                // ¼(b + e)² - ½ d0 (b - e) + ¼ d0² - h ≤ 0
                out.push(QuadConstraint {
                    tag: ConstraintTag::EtaTildeLower,
                    squares: vec![LinForm::var(bi, 0.5).with(ei, 0.5)],
                    linear: LinForm::var(bi, -0.5 * d0).with(ei, 0.5 * d0).with(hi, -1.0),
                    constant: 0.25 * d0 * d0,
                });
            }
        }
    }
    for m in 0..l.num_aps {
        for u in 0..l.num_ul {
            let (bi, si, sti) = (l.b(m), l.s(m, u), l.st(u));
            let p0 = anchor[bi] + anchor[sti];
            // ς² + ¼(b - ς̃)² - ½ p0 (b + ς̃) + ¼ p0² ≤ 0
            out.push(QuadConstraint {
                tag: ConstraintTag::VarsigmaSquare,
                squares: vec![LinForm::var(si, 1.0), LinForm::var(bi, 0.5).with(sti, -0.5)],
                linear: LinForm::var(bi, -0.5 * p0).with(sti, -0.5 * p0),
                constant: 0.25 * p0 * p0,
            });
        }
    }
    out
}

pub(crate) struct JointModel<'a> {
    sc: &'a Scenario,
    layout: JointLayout,
    pen: &'a PenaltyConfig,
    dl: Vec<SeBlock>,
    ul: Vec<SeBlock>,
}

impl<'a> JointModel<'a> {
    pub(crate) fn new(sc: &'a Scenario, pen: &'a PenaltyConfig) -> Self {
        let layout = JointLayout::new(sc);
        let dl = (0..layout.num_dl).map(|k| dl_block(sc, &layout, k)).collect();
        let ul = (0..layout.num_ul).map(|u| ul_block(sc, &layout, u)).collect();
        JointModel { sc, layout, pen, dl, ul }
    }
}

fn dl_block(sc: &Scenario, l: &JointLayout, k: usize) -> SeBlock {
    let (n, rho_d, rho_u) = (sc.antennas(), sc.cfg.rho_d, sc.cfg.rho_u);
    let mut signal = LinForm::new();
    let mut squares = Vec::new();
    for m in 0..l.num_aps {
        signal.add(l.t(m, k), (n * rho_d * sc.stats.gamma_dl[(m, k)]).sqrt());
        let c = (rho_d * sc.net.beta_dl[(m, k)]).sqrt();
        for kp in 0..l.num_dl {
            squares.push(LinForm::var(l.t(m, kp), c));
        }
    }
    let mut linear = LinForm::new();
    for u in 0..l.num_ul {
        linear.add(l.st(u), rho_u * sc.net.beta_du[(k, u)]);
    }
    SeBlock {
        signal,
        interference: QuadExpr {
            squares,
            linear,
            constant: 1.0,
        },
    }
}

fn ul_block(sc: &Scenario, l: &JointLayout, u: usize) -> SeBlock {
    let (n, rho_d, rho_u) = (sc.antennas(), sc.cfg.rho_d, sc.cfg.rho_u);
    let gu = &sc.stats.gamma_ul;
    let g: f64 = (0..l.num_aps).map(|m| gu[(m, u)]).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut signal = LinForm::new();
    let mut squares = Vec::new();
    let mut linear = LinForm::new();
    for m in 0..l.num_aps {
        signal.add(l.s(m, u), (n * rho_u).sqrt() * gu[(m, u)] / g.sqrt());
        for q in 0..l.num_ul {
            let w = rho_u * sc.net.beta_ul[(m, u)] * gu[(m, q)] / g;
            if w > 0.0 {
                squares.push(LinForm::var(l.s(m, q), w.sqrt()));
            }
        }
        for i in 0..l.num_aps {
            let w = rho_d * sc.net.beta_ap[(m, i)] * gu[(m, u)] / g;
            for k in 0..l.num_dl {
                linear.add(l.h(i, m, k), w);
            }
        }
        linear.add(l.b(m), gu[(m, u)] / g);
    }
    SeBlock {
        signal,
        interference: QuadExpr {
            squares,
            linear,
            constant: 0.0,
        },
    }
}

impl SeModel for JointModel<'_> {
    const PHASE: Phase = Phase::Joint;

    fn num_vars(&self) -> usize {
        self.layout.num_vars()
    }

    fn prelog(&self) -> f64 {
        self.sc.cfg.prelog()
    }

    fn dl_blocks(&self) -> &[SeBlock] {
        &self.dl
    }

    fn ul_blocks(&self) -> &[SeBlock] {
        &self.ul
    }

    fn q_dl(&self, k: usize) -> usize {
        self.layout.q_dl(k)
    }

    fn q_ul(&self, l: usize) -> usize {
        self.layout.q_ul(l)
    }

    fn dl_target(&self) -> f64 {
        self.sc.cfg.se_target_dl
    }

    fn ul_target(&self) -> f64 {
        self.sc.cfg.se_target_ul
    }

    fn structure(&self, sp: &mut ConvexSubproblem, x0: &[f64], penalize: bool) {
        let l = &self.layout;
        let (m_aps, kd, ku) = (l.num_aps, l.num_dl, l.num_ul);
        for m in 0..m_aps {
            sp.equality(ConstraintTag::ModeSum, LinForm::var(l.a(m), 1.0).with(l.b(m), 1.0), 1.0);
            sp.bounds(l.a(m), 0.0, 1.0);
            sp.bounds(l.b(m), 0.0, 1.0);
            let mut load = LinForm::new();
            for k in 0..kd {
                load.add(l.e(m, k), 1.0);
                sp.bounds(l.e(m, k), 0.0, f64::INFINITY);
                sp.bounds(l.t(m, k), 0.0, f64::INFINITY);
                sp.le(ConstraintTag::DlModeCoupling, LinForm::var(l.e(m, k), 1.0).with(l.a(m), -1.0), 0.0);
                sp.quad(QuadConstraint {
                    tag: ConstraintTag::ThetaSquare,
                    squares: vec![LinForm::var(l.t(m, k), 1.0)],
                    linear: LinForm::var(l.e(m, k), -1.0),
                    constant: 0.0,
                });
            }
            if kd > 0 {
                sp.le(ConstraintTag::ApPower, load, 1.0);
            }
            for u in 0..ku {
                sp.bounds(l.s(m, u), 0.0, f64::INFINITY);
            }
        }
        for u in 0..ku {
            sp.bounds(l.st(u), 0.0, 1.0);
        }
        for i in 0..m_aps {
            for m in 0..m_aps {
                for k in 0..kd {
                    let h = l.h(i, m, k);
                    sp.bounds(h, 0.0, f64::INFINITY);
                    sp.le(ConstraintTag::EtaTildeUpper, LinForm::var(h, 1.0).with(l.e(i, k), -1.0), 0.0);
                }
            }
        }
        for c in convexify_coupling(l, x0) {
            sp.quad(c);
        }
        if penalize {
            add_penalty_objective(sp, l, self.pen, x0);
        }
    }

    fn project(&self, x: &mut [f64]) {
        let l = &self.layout;
        for m in 0..l.num_aps {
            let a = x[l.a(m)].clamp(0.0, 1.0);
            x[l.a(m)] = a;
            x[l.b(m)] = 1.0 - a;
        }
        for i in l.e(0, 0)..l.q_ul(0) {
            x[i] = x[i].max(0.0);
        }
        for u in 0..l.num_ul {
            x[l.st(u)] = x[l.st(u)].min(1.0);
        }
    }

    fn residuals(&self, x: &[f64]) -> Residuals {
        let l = &self.layout;
        let mut r = Residuals::default();
        for m in 0..l.num_aps {
            let (a, b) = (x[l.a(m)], x[l.b(m)]);
            r.c3 += a - a * a + b - b * b;
            for k in 0..l.num_dl {
                r.c1 += x[l.e(m, k)] - x[l.t(m, k)].powi(2);
            }
            for u in 0..l.num_ul {
                r.c2 += b * x[l.st(u)] - x[l.s(m, u)].powi(2);
            }
        }
        r
    }

    fn penalty(&self, r: &Residuals) -> f64 {
        r.weighted(self.pen.lambda, self.pen.mu())
    }
}

/// Adds `λ(μ1 C̃1 + μ2 C̃2 + μ3 C̃3)` linearized at `x0` to the objective.
fn add_penalty_objective(sp: &mut ConvexSubproblem, l: &JointLayout, pen: &PenaltyConfig, x0: &[f64]) {
    let w1 = pen.lambda * pen.mu1;
    let w2 = pen.lambda * pen.mu2;
    let w3 = pen.lambda * pen.mu3;
    let obj = &mut sp.objective;
    for m in 0..l.num_aps {
        for k in 0..l.num_dl {
            let t0 = x0[l.t(m, k)];
            obj.linear.add(l.e(m, k), w1).add(l.t(m, k), -2.0 * w1 * t0);
            obj.constant += w1 * t0 * t0;
        }
        for u in 0..l.num_ul {
            let (b, st, s) = (l.b(m), l.st(u), l.s(m, u));
            let (b0, st0, s0) = (x0[b], x0[st], x0[s]);
            let d0 = b0 - st0;
            obj.squares.push(LinForm::var(b, 0.5 * w2.sqrt()).with(st, 0.5 * w2.sqrt()));
            obj.linear.add(b, -0.5 * w2 * d0).add(st, 0.5 * w2 * d0).add(s, -2.0 * w2 * s0);
            obj.constant += w2 * (0.25 * d0 * d0 + s0 * s0);
        }
        for idx in [l.a(m), l.b(m)] {
            let v0 = x0[idx];
            obj.linear.add(idx, w3 * (1.0 - 2.0 * v0));
            obj.constant += w3 * v0 * v0;
        }
    }
}

/// The convex subproblem around `anchor` (raw units), with its variable layout.
pub fn assemble_subproblem(
    sc: &Scenario,
    anchor: &DecisionPoint,
    pen: &PenaltyConfig,
) -> Result<(JointLayout, ConvexSubproblem)> {
    let model = JointModel::new(sc, pen);
    let x0 = to_solver(sc, anchor);
    let sp = driver::build(&model, &x0, driver::Goal::MaxSum)?;
    Ok((model.layout, sp))
}

fn initial_solver_point(sc: &Scenario, pen: &PenaltyConfig, rng: &mut impl Rng) -> Vec<f64> {
    let l = JointLayout::new(sc);
    let (m_aps, kd, ku) = (l.num_aps, l.num_dl, l.num_ul);
    let mut x = vec![0.0; l.num_vars()];
    for m in 0..m_aps {
        let a = match pen.mode_init {
            ModeInit::Uniform { lo, hi } if hi > lo => rng.random_range(lo..hi),
            ModeInit::Uniform { lo, .. } => lo,
            ModeInit::Midpoint => 0.5,
        };
        x[l.a(m)] = a;
        x[l.b(m)] = 1.0 - a;
        for k in 0..kd {
            // half of the mode-scaled budget
            let e = 0.5 * a / kd as f64;
            x[l.e(m, k)] = e;
            x[l.t(m, k)] = e.sqrt();
        }
    }
    for u in 0..ku {
        x[l.st(u)] = 0.5;
        for m in 0..m_aps {
            x[l.s(m, u)] = (x[l.b(m)] * 0.5).sqrt();
        }
    }
    for i in 0..m_aps {
        for m in 0..m_aps {
            for k in 0..kd {
                x[l.h(i, m, k)] = x[l.b(m)] * x[l.e(i, k)];
            }
        }
    }
    let model = JointModel::new(sc, pen);
    driver::sync_q(&model, &mut x, false);
    x
}

/// Random starting point: relaxed modes, half the power budget, tight auxiliaries,
/// and `q` at the achieved SE bound. QoS may still be violated here; [`run_sca`]
/// repairs that with its feasibility phase.
pub fn initialize<R: Rng>(sc: &Scenario, pen: &PenaltyConfig, rng: &mut R) -> DecisionPoint {
    from_solver(sc, &initial_solver_point(sc, pen, rng))
}

/// Penalized SCA over modes and powers, followed by rounding and a power-only polish.
pub fn run_sca(sc: &Scenario, pen: &PenaltyConfig, init_seed: u64) -> Result<RunResult> {
    pen.validate()?;
    sc.cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let model = JointModel::new(sc, pen);
    let x0 = initial_solver_point(sc, pen, &mut rng);
    let out = match driver::run(&model, x0, pen) {
        Err(Error::DegenerateAnchor(msg)) => {
            log::warn!("degenerate anchor: {msg}");
            return Err(Error::DegenerateAnchor(msg));
        }
        other => other?,
    };
    let relaxed = from_solver(sc, &out.x);
    if out.status == RunStatus::Infeasible {
        let se = se::evaluate(sc, &relaxed.mode, &relaxed.power)?;
        return Ok(RunResult {
            residuals: penalty::residuals(&relaxed.mode, &relaxed.power),
            relaxed_residuals: Some(scaled_residuals(sc, &relaxed)),
            relaxed_modes: Some(relaxed.mode.a.clone()),
            point: relaxed,
            se,
            trace: out.trace,
            pre_polish_sum: None,
            status: RunStatus::Infeasible,
            iterations: out.iterations,
        });
    }
    let mut res = polish::round_and_polish(sc, &relaxed, pen)?;
    let mut trace = out.trace;
    trace.append(&mut res.trace);
    res.trace = trace;
    res.iterations += out.iterations;
    if res.status == RunStatus::Converged && out.status != RunStatus::Converged {
        res.status = out.status;
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;

    fn scenario() -> Scenario {
        Scenario::generate(&SystemConfig::reference(3, 2, 2), 5).unwrap()
    }

    #[test]
    fn layout_count_matches_formula() {
        let sc = scenario();
        let l = JointLayout::new(&sc);
        let (m, kd, ku) = (3, 2, 2);
        assert_eq!(l.num_vars(), 2 * m + m * kd * 2 + m * ku + ku + m * m * kd + ku + kd);
    }

    #[test]
    fn solver_round_trip() {
        let sc = scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = initialize(&sc, &PenaltyConfig::default(), &mut rng);
        let x = to_solver(&sc, &p);
        let back = from_solver(&sc, &x);
        assert_eq!(back.mode, p.mode);
        for (a, b) in back.power.eta.iter().zip(p.power.eta.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn blocks_reproduce_closed_forms() {
        let sc = scenario();
        let pen = PenaltyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = initial_solver_point(&sc, &pen, &mut rng);
        let p = from_solver(&sc, &x);
        let model = JointModel::new(&sc, &pen);
        let prelog = sc.cfg.prelog();
        let dl = se::dl_se(&sc, &p.power.theta, &p.power.varsigma_tilde).unwrap();
        let ul = se::ul_se_lower(&sc, &p.mode.b, &p.power.varsigma, &p.power.eta_tilde).unwrap();
        for (b, want) in model.dl.iter().zip(&dl).chain(model.ul.iter().zip(&ul)) {
            let got = b.se(prelog, &x);
            assert!((got - want).abs() <= 1e-10 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn initial_point_is_structurally_feasible() {
        let sc = scenario();
        let pen = PenaltyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = initial_solver_point(&sc, &pen, &mut rng);
        let model = JointModel::new(&sc, &pen);
        let mut sp = ConvexSubproblem::new(model.num_vars());
        model.structure(&mut sp, &x, true);
        assert!(sp.max_violation(&x) <= 1e-12);
        let r = model.residuals(&x);
        assert!(r.c1.abs() < 1e-12 && r.c2.abs() < 1e-12);
    }

    #[test]
    fn initialization_is_deterministic() {
        let sc = scenario();
        let pen = PenaltyConfig {
            mode_init: ModeInit::Uniform { lo: 0.3, hi: 0.7 },
            ..PenaltyConfig::default()
        };
        let a = initialize(&sc, &pen, &mut ChaCha8Rng::seed_from_u64(9));
        let b = initialize(&sc, &pen, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.mode.a.iter().all(|&v| (0.3..=0.7).contains(&v)));
        let c = initialize(&sc, &pen, &mut ChaCha8Rng::seed_from_u64(10));
        assert_ne!(a.mode.a, c.mode.a);
    }

    #[test]
    fn coupling_is_tight_at_tight_anchor() {
        let sc = scenario();
        let pen = PenaltyConfig::default();
        let x = initial_solver_point(&sc, &pen, &mut ChaCha8Rng::seed_from_u64(4));
        for c in convexify_coupling(&JointLayout::new(&sc), &x) {
            assert!(c.eval(&x).abs() < 1e-12, "{:?} {}", c.tag, c.eval(&x));
        }
    }
}
