//! Power control with the AP modes held fixed.
//!
//! With binary modes, `η = θ²`, `ς_mℓ = u_ℓ` on UL APs and `ς̃ = u²`
//! eliminate the coupling constraints, so only the SE constraints need
//! convexifying. Variables are `t_mk = θ_mk √(N γ_mk)` on DL APs (so the
//! per-AP power budget reads `Σ_k t_mk² ≤ 1`) and `u_ℓ ∈ [0, 1]`.

use nalgebra::DMatrix;

use super::driver::{self, SeModel};
use super::penalty::Residuals;
use super::problem::{ConstraintTag, ConvexSubproblem, LinForm, QuadConstraint};
use super::surrogate::{QuadExpr, SeBlock};
use super::{PenaltyConfig, Phase, RunStatus, TraceRow};
use crate::error::Result;
use crate::scenario::Scenario;

/// Which APs transmit/receive and which UEs are served in one power problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpec {
    pub dl_aps: Vec<usize>,
    pub ul_aps: Vec<usize>,
    pub serve_dl: bool,
    pub serve_ul: bool,
    /// Fraction of the data symbols used (0.5 per half-duplex phase).
    pub time_fraction: f64,
    pub dl_target: f64,
    pub ul_target: f64,
}

impl PowerSpec {
    /// Concurrent DL/UL service with AP `m` in DL iff `dl[m]`.
    pub fn vfd(sc: &Scenario, dl: &[bool]) -> Self {
        PowerSpec {
            dl_aps: (0..dl.len()).filter(|&m| dl[m]).collect(),
            ul_aps: (0..dl.len()).filter(|&m| !dl[m]).collect(),
            serve_dl: sc.num_dl() > 0,
            serve_ul: sc.num_ul() > 0,
            time_fraction: 1.0,
            dl_target: sc.cfg.se_target_dl,
            ul_target: sc.cfg.se_target_ul,
        }
    }

    /// DL half of the half-duplex frame: every AP transmits, UL UEs are silent.
    pub fn hd_dl(sc: &Scenario) -> Self {
        PowerSpec {
            dl_aps: (0..sc.num_aps()).collect(),
            ul_aps: Vec::new(),
            serve_dl: sc.num_dl() > 0,
            serve_ul: false,
            time_fraction: 0.5,
            dl_target: sc.cfg.se_target_dl * sc.cfg.hd_target_scale,
            ul_target: 0.0,
        }
    }

    /// UL half of the half-duplex frame: every AP receives, no DL transmission.
    pub fn hd_ul(sc: &Scenario) -> Self {
        PowerSpec {
            dl_aps: Vec::new(),
            ul_aps: (0..sc.num_aps()).collect(),
            serve_dl: false,
            serve_ul: sc.num_ul() > 0,
            time_fraction: 0.5,
            dl_target: 0.0,
            ul_target: sc.cfg.se_target_ul * sc.cfg.hd_target_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    /// Raw `θ`, `M × K_d`, zero on rows outside `dl_aps`.
    pub theta: DMatrix<f64>,
    /// Raw `ς̃`, length `K_u` (zeros when the UL is not served).
    pub varsigma_tilde: Vec<f64>,
    pub dl_se: Vec<f64>,
    pub ul_se: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub status: RunStatus,
    pub iterations: usize,
}

pub(crate) struct PowerModel<'a> {
    sc: &'a Scenario,
    spec: &'a PowerSpec,
    kd: usize,
    nt: usize,
    nu: usize,
    dl: Vec<SeBlock>,
    ul: Vec<SeBlock>,
}

impl<'a> PowerModel<'a> {
    pub(crate) fn new(sc: &'a Scenario, spec: &'a PowerSpec) -> Self {
        let kd = if spec.serve_dl { sc.num_dl() } else { 0 };
        let ku = if spec.serve_ul { sc.num_ul() } else { 0 };
        let mut model = PowerModel {
            sc,
            spec,
            kd,
            nt: spec.dl_aps.len() * kd,
            nu: ku,
            dl: Vec::new(),
            ul: Vec::new(),
        };
        model.dl = (0..kd).map(|k| model.dl_block(k)).collect();
        model.ul = (0..ku).map(|l| model.ul_block(l)).collect();
        model
    }

    fn t(&self, j: usize, k: usize) -> usize {
        j * self.kd + k
    }

    fn u(&self, l: usize) -> usize {
        self.nt + l
    }

    fn dl_block(&self, k: usize) -> SeBlock {
        let sc = self.sc;
        let (n, rho_d, rho_u) = (sc.antennas(), sc.cfg.rho_d, sc.cfg.rho_u);
        let mut signal = LinForm::new();
        let mut squares = Vec::new();
        for (j, &m) in self.spec.dl_aps.iter().enumerate() {
            signal.add(self.t(j, k), (n * rho_d * sc.stats.gamma_dl[(m, k)]).sqrt());
            let c = (rho_d * sc.net.beta_dl[(m, k)]).sqrt();
            for kp in 0..self.kd {
                squares.push(LinForm::var(self.t(j, kp), c));
            }
        }
        for l in 0..self.nu {
            squares.push(LinForm::var(self.u(l), (rho_u * sc.net.beta_du[(k, l)]).sqrt()));
        }
        SeBlock {
            signal,
            interference: QuadExpr {
                squares,
                linear: LinForm::new(),
                constant: 1.0,
            },
        }
    }

    fn ul_block(&self, l: usize) -> SeBlock {
        let sc = self.sc;
        let (n, rho_d, rho_u) = (sc.antennas(), sc.cfg.rho_d, sc.cfg.rho_u);
        let gu = &sc.stats.gamma_ul;
        let g: f64 = self.spec.ul_aps.iter().map(|&m| gu[(m, l)]).sum();
        if g <= 0.0 {
            return SeBlock {
                signal: LinForm::new(),
                interference: QuadExpr {
                    constant: 1.0,
                    ..Default::default()
                },
            };
        }
        let signal = LinForm::var(self.u(l), (n * rho_u * g).sqrt());
        let mut squares = Vec::new();
        for q in 0..self.nu {
            let w: f64 = self
                .spec
                .ul_aps
                .iter()
                .map(|&m| sc.net.beta_ul[(m, l)] * gu[(m, q)])
                .sum();
            squares.push(LinForm::var(self.u(q), (rho_u * w / g).sqrt()));
        }
        for (j, &i) in self.spec.dl_aps.iter().enumerate() {
            let w: f64 = self
                .spec
                .ul_aps
                .iter()
                .map(|&m| sc.net.beta_ap[(m, i)] * gu[(m, l)])
                .sum();
            let c = (rho_d * w / g).sqrt();
            for k in 0..self.kd {
                squares.push(LinForm::var(self.t(j, k), c));
            }
        }
        SeBlock {
            signal,
            interference: QuadExpr {
                squares,
                linear: LinForm::new(),
                constant: 1.0,
            },
        }
    }

    pub(crate) fn start(&self, theta: Option<&DMatrix<f64>>, varsigma_tilde: Option<&[f64]>) -> Vec<f64> {
        let mut x = vec![0.0; self.num_vars()];
        let ngamma = |m: usize, k: usize| self.sc.antennas() * self.sc.stats.gamma_dl[(m, k)];
        for (j, &m) in self.spec.dl_aps.iter().enumerate() {
            for k in 0..self.kd {
                x[self.t(j, k)] = match theta {
                    Some(th) => th[(m, k)] * ngamma(m, k).sqrt(),
                    None => (0.5 / self.kd as f64).sqrt(),
                };
            }
        }
        for l in 0..self.nu {
            x[self.u(l)] = match varsigma_tilde {
                Some(v) => v[l].max(0.0).sqrt(),
                None => 0.5f64.sqrt(),
            };
        }
        x
    }

    fn outcome(&self, x: &[f64], trace: Vec<TraceRow>, status: RunStatus, iterations: usize) -> PowerOutcome {
        let sc = self.sc;
        let mut theta = DMatrix::zeros(sc.num_aps(), sc.num_dl());
        for (j, &m) in self.spec.dl_aps.iter().enumerate() {
            for k in 0..self.kd {
                let ng = sc.antennas() * sc.stats.gamma_dl[(m, k)];
                theta[(m, k)] = if ng > 0.0 { x[self.t(j, k)] / ng.sqrt() } else { 0.0 };
            }
        }
        let mut varsigma_tilde = vec![0.0; sc.num_ul()];
        for (l, v) in varsigma_tilde.iter_mut().enumerate().take(self.nu) {
            *v = x[self.u(l)].powi(2);
        }
        let prelog = self.prelog();
        PowerOutcome {
            theta,
            varsigma_tilde,
            dl_se: self.dl.iter().map(|b| b.se(prelog, x)).collect(),
            ul_se: self.ul.iter().map(|b| b.se(prelog, x)).collect(),
            trace,
            status,
            iterations,
        }
    }
}

impl SeModel for PowerModel<'_> {
    const PHASE: Phase = Phase::Power;

    fn num_vars(&self) -> usize {
        self.nt + self.nu + self.dl.len() + self.ul.len()
    }

    fn prelog(&self) -> f64 {
        self.spec.time_fraction * self.sc.cfg.prelog()
    }

    fn dl_blocks(&self) -> &[SeBlock] {
        &self.dl
    }

    fn ul_blocks(&self) -> &[SeBlock] {
        &self.ul
    }

    fn q_dl(&self, k: usize) -> usize {
        self.nt + self.nu + k
    }

    fn q_ul(&self, l: usize) -> usize {
        self.nt + self.nu + self.dl.len() + l
    }

    fn dl_target(&self) -> f64 {
        self.spec.dl_target
    }

    fn ul_target(&self) -> f64 {
        self.spec.ul_target
    }

    fn structure(&self, sp: &mut ConvexSubproblem, _anchor: &[f64], _penalize: bool) {
        for j in 0..self.spec.dl_aps.len() {
            for k in 0..self.kd {
                sp.bounds(self.t(j, k), 0.0, f64::INFINITY);
            }
            if self.kd > 0 {
                sp.quad(QuadConstraint {
                    tag: ConstraintTag::ApPower,
                    squares: (0..self.kd).map(|k| LinForm::var(self.t(j, k), 1.0)).collect(),
                    linear: LinForm::new(),
                    constant: -1.0,
                });
            }
        }
        for l in 0..self.nu {
            sp.bounds(self.u(l), 0.0, 1.0);
        }
    }

    fn project(&self, x: &mut [f64]) {
        for j in 0..self.spec.dl_aps.len() {
            let row: Vec<usize> = (0..self.kd).map(|k| self.t(j, k)).collect();
            for &i in &row {
                x[i] = x[i].max(0.0);
            }
            let load: f64 = row.iter().map(|&i| x[i] * x[i]).sum();
            if load > 1.0 {
                let s = load.sqrt();
                for &i in &row {
                    x[i] /= s;
                }
            }
        }
        for l in 0..self.nu {
            x[self.u(l)] = x[self.u(l)].clamp(0.0, 1.0);
        }
    }

    fn residuals(&self, _x: &[f64]) -> Residuals {
        Residuals::default()
    }

    fn penalty(&self, _r: &Residuals) -> f64 {
        0.0
    }
}

/// Maximizes the sum SE of `spec` subject to its QoS targets and power budgets.
/// Starts from the given raw powers, or a uniform split when absent.
pub fn optimize_powers(
    sc: &Scenario,
    spec: &PowerSpec,
    start: Option<(&DMatrix<f64>, &[f64])>,
    cfg: &PenaltyConfig,
) -> Result<PowerOutcome> {
    let model = PowerModel::new(sc, spec);
    let x0 = model.start(start.map(|s| s.0), start.map(|s| s.1));
    let out = driver::run(&model, x0, cfg)?;
    Ok(model.outcome(&out.x, out.trace, out.status, out.iterations))
}
