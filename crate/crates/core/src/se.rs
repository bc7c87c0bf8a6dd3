//! Closed-form spectral efficiencies under MR processing with MMSE estimates.
//!
//! The SINRs are written as `Ξ_k² / Ω_k` (DL UE k) and `Ψ_ℓ² / Φ_ℓ` (UL UE ℓ);
//! the optimizer linearizes exactly these building blocks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Per-AP mode indicators: `a_m = 1` for DL, `b_m = 1` for UL, `a_m + b_m = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAssignment {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub is_binary: bool,
}

impl ModeAssignment {
    /// Binary assignment from a DL flag per AP.
    pub fn from_dl_flags(dl: &[bool]) -> Self {
        let a: Vec<f64> = dl.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect();
        let b = a.iter().map(|v| 1.0 - v).collect();
        ModeAssignment { a, b, is_binary: true }
    }

    /// Fractional assignment with `b = 1 - a`.
    pub fn relaxed(a: Vec<f64>) -> Self {
        let b = a.iter().map(|v| 1.0 - v).collect();
        let is_binary = a.iter().all(|&v| v == 0.0 || v == 1.0);
        ModeAssignment { a, b, is_binary }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `a_m >= 0.5` counts as DL.
    pub fn dl_flags(&self) -> Vec<bool> {
        self.a.iter().map(|&v| v >= 0.5).collect()
    }
}

/// Auxiliary `η̃_imk`, stored densely in `(i, m, k)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaTilde {
    pub num_aps: usize,
    pub num_dl: usize,
    pub values: Vec<f64>,
}

impl EtaTilde {
    pub fn zeros(num_aps: usize, num_dl: usize) -> Self {
        EtaTilde {
            num_aps,
            num_dl,
            values: vec![0.0; num_aps * num_aps * num_dl],
        }
    }

    /// `η̃_imk = b_m η_ik`, the tight choice.
    pub fn tight(b: &[f64], eta: &DMatrix<f64>) -> Self {
        let (m, kd) = eta.shape();
        let mut out = Self::zeros(m, kd);
        for i in 0..m {
            for ap in 0..m {
                for k in 0..kd {
                    *out.get_mut(i, ap, k) = b[ap] * eta[(i, k)];
                }
            }
        }
        out
    }

    #[inline]
    pub fn index(&self, i: usize, m: usize, k: usize) -> usize {
        (i * self.num_aps + m) * self.num_dl + k
    }

    #[inline]
    pub fn get(&self, i: usize, m: usize, k: usize) -> f64 {
        self.values[self.index(i, m, k)]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, m: usize, k: usize) -> &mut f64 {
        let idx = self.index(i, m, k);
        &mut self.values[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    /// DL power coefficients `η_mk`, `M × K_d`.
    pub eta: DMatrix<f64>,
    /// `θ_mk`, with `θ² = η` at a consistent point.
    pub theta: DMatrix<f64>,
    /// UL UE power coefficients `ς̃_ℓ ∈ [0, 1]`.
    pub varsigma_tilde: Vec<f64>,
    /// Effective UL coefficients `ς_mℓ`, `M × K_u`, with `ς² = b ς̃` at a consistent point.
    pub varsigma: DMatrix<f64>,
    pub eta_tilde: EtaTilde,
}

impl PowerAllocation {
    /// Consistent allocation from θ and ς̃: `η = θ²`, `ς_mℓ = √(b_m ς̃_ℓ)`, `η̃ = b η`.
    pub fn consistent(theta: DMatrix<f64>, varsigma_tilde: Vec<f64>, b: &[f64]) -> Self {
        let eta = theta.map(|t| t * t);
        let varsigma = DMatrix::from_fn(b.len(), varsigma_tilde.len(), |m, l| {
            (b[m] * varsigma_tilde[l]).max(0.0).sqrt()
        });
        let eta_tilde = EtaTilde::tight(b, &eta);
        PowerAllocation {
            eta,
            theta,
            varsigma_tilde,
            varsigma,
            eta_tilde,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeVector {
    pub dl: Vec<f64>,
    pub ul: Vec<f64>,
    pub sum: f64,
}

impl SeVector {
    pub fn new(dl: Vec<f64>, ul: Vec<f64>) -> Self {
        let sum = dl.iter().sum::<f64>() + ul.iter().sum::<f64>();
        SeVector { dl, ul, sum }
    }

    pub fn min(&self) -> f64 {
        self.dl.iter().chain(self.ul.iter()).copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_shape(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch(format!(
            "{what}: got {}x{}, expected {}x{}",
            got.0, got.1, want.0, want.1
        )));
    }
    Ok(())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    check_shape(what, (got, 1), (want, 1))
}

/// `prelog · log2(1 + num² / den)`, zero when the desired signal vanishes.
pub fn se_from_ratio(prelog: f64, num: f64, den: f64) -> f64 {
    if num == 0.0 {
        return 0.0;
    }
    prelog * (1.0 + num * num / den).log2()
}

/// `Ξ_k = N √ρ_d Σ_m θ_mk γ_mk`
pub fn xi(sc: &Scenario, theta: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_shape("theta", theta.shape(), (sc.num_aps(), sc.num_dl()))?;
    let scale = sc.antennas() * sc.cfg.rho_d.sqrt();
    Ok((0..sc.num_dl())
        .map(|k| scale * theta.column(k).dot(&sc.stats.gamma_dl.column(k)))
        .collect())
}

/// `Ω_k = ρ_d N Σ_k' Σ_m θ_mk'² β_mk γ_mk' + ρ_u Σ_ℓ ς̃_ℓ β_kℓ + 1`
pub fn omega(sc: &Scenario, theta: &DMatrix<f64>, varsigma_tilde: &[f64]) -> Result<Vec<f64>> {
    check_shape("theta", theta.shape(), (sc.num_aps(), sc.num_dl()))?;
    check_len("varsigma_tilde", varsigma_tilde.len(), sc.num_ul())?;
    let (m_aps, kd) = (sc.num_aps(), sc.num_dl());
    let n = sc.antennas();
    let g = &sc.stats.gamma_dl;
    let beta = &sc.net.beta_dl;
    Ok((0..kd)
        .map(|k| {
            let mut beam = 0.0;
            for kp in 0..kd {
                for m in 0..m_aps {
                    beam += theta[(m, kp)].powi(2) * beta[(m, k)] * g[(m, kp)];
                }
            }
            let ue: f64 = varsigma_tilde
                .iter()
                .enumerate()
                .map(|(l, s)| s * sc.net.beta_du[(k, l)])
                .sum();
            sc.cfg.rho_d * n * beam + sc.cfg.rho_u * ue + 1.0
        })
        .collect())
}

/// `Ψ_ℓ = √(N ρ_u) Σ_m ς_mℓ γ_mℓ`
pub fn psi(sc: &Scenario, varsigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_shape("varsigma", varsigma.shape(), (sc.num_aps(), sc.num_ul()))?;
    let scale = (sc.antennas() * sc.cfg.rho_u).sqrt();
    Ok((0..sc.num_ul())
        .map(|l| scale * varsigma.column(l).dot(&sc.stats.gamma_ul.column(l)))
        .collect())
}

/// `Φ_ℓ` with the AP–AP cross-link weight of (DL AP i, UL AP m, DL UE k) given by `cross`.
/// `cross = b_m η_ik` gives the exact UL SE, `cross = η̃_imk` its lower bound.
pub fn phi_with<F>(sc: &Scenario, b: &[f64], varsigma: &DMatrix<f64>, cross: F) -> Result<Vec<f64>>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let (m_aps, kd, ku) = (sc.num_aps(), sc.num_dl(), sc.num_ul());
    check_len("b", b.len(), m_aps)?;
    check_shape("varsigma", varsigma.shape(), (m_aps, ku))?;
    let n = sc.antennas();
    let gu = &sc.stats.gamma_ul;
    let gd = &sc.stats.gamma_dl;
    let bu = &sc.net.beta_ul;
    let bap = &sc.net.beta_ap;

    // Σ_i Σ_k cross(i,m,k) β_mi γ_ik per UL AP m, shared by every UL UE.
    let cross_at: Vec<f64> = (0..m_aps)
        .map(|m| {
            let mut acc = 0.0;
            for i in 0..m_aps {
                if bap[(m, i)] == 0.0 {
                    continue;
                }
                for k in 0..kd {
                    acc += cross(i, m, k) * bap[(m, i)] * gd[(i, k)];
                }
            }
            acc
        })
        .collect();

    Ok((0..ku)
        .map(|l| {
            let mut ul = 0.0;
            let mut cl = 0.0;
            let mut noise = 0.0;
            for m in 0..m_aps {
                for q in 0..ku {
                    ul += varsigma[(m, q)].powi(2) * bu[(m, l)] * gu[(m, q)];
                }
                cl += cross_at[m] * gu[(m, l)];
                noise += b[m] * gu[(m, l)];
            }
            sc.cfg.rho_u * ul + sc.cfg.rho_d * n * cl + noise
        })
        .collect())
}

/// DL SE per DL UE.
pub fn dl_se(sc: &Scenario, theta: &DMatrix<f64>, varsigma_tilde: &[f64]) -> Result<Vec<f64>> {
    let x = xi(sc, theta)?;
    let o = omega(sc, theta, varsigma_tilde)?;
    let prelog = sc.cfg.prelog();
    Ok(x.iter().zip(&o).map(|(&x, &o)| se_from_ratio(prelog, x, o)).collect())
}

/// UL SE per UL UE with the cross-link interference driven by `b_m η_ik`.
pub fn ul_se(sc: &Scenario, b: &[f64], varsigma: &DMatrix<f64>, eta: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_shape("eta", eta.shape(), (sc.num_aps(), sc.num_dl()))?;
    let p = psi(sc, varsigma)?;
    let f = phi_with(sc, b, varsigma, |i, m, k| b[m] * eta[(i, k)])?;
    let prelog = sc.cfg.prelog();
    Ok(p.iter().zip(&f).map(|(&p, &f)| se_from_ratio(prelog, p, f)).collect())
}

/// UL SE bound `Ŝ_ul` with `η̃_imk` in place of `b_m η_ik`.
pub fn ul_se_lower(sc: &Scenario, b: &[f64], varsigma: &DMatrix<f64>, eta_tilde: &EtaTilde) -> Result<Vec<f64>> {
    check_shape(
        "eta_tilde",
        (eta_tilde.num_aps, eta_tilde.num_dl),
        (sc.num_aps(), sc.num_dl()),
    )?;
    check_len("eta_tilde values", eta_tilde.values.len(), sc.num_aps().pow(2) * sc.num_dl())?;
    let p = psi(sc, varsigma)?;
    let f = phi_with(sc, b, varsigma, |i, m, k| eta_tilde.get(i, m, k))?;
    let prelog = sc.cfg.prelog();
    Ok(p.iter().zip(&f).map(|(&p, &f)| se_from_ratio(prelog, p, f)).collect())
}

/// Exact SEs of a power allocation under the given modes.
pub fn evaluate(sc: &Scenario, mode: &ModeAssignment, power: &PowerAllocation) -> Result<SeVector> {
    let dl = dl_se(sc, &power.theta, &power.varsigma_tilde)?;
    let ul = ul_se(sc, &mode.b, &power.varsigma, &power.eta)?;
    Ok(SeVector::new(dl, ul))
}

/// Half-duplex DL SE: half the data symbols, no concurrent UL transmission.
pub fn hd_dl_se(sc: &Scenario, theta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let silent = vec![0.0; sc.num_ul()];
    Ok(dl_se(sc, theta, &silent)?.into_iter().map(|s| 0.5 * s).collect())
}

/// Half-duplex UL SE: half the data symbols, every AP receiving, no DL interference.
pub fn hd_ul_se(sc: &Scenario, varsigma_tilde: &[f64]) -> Result<Vec<f64>> {
    check_len("varsigma_tilde", varsigma_tilde.len(), sc.num_ul())?;
    let b = vec![1.0; sc.num_aps()];
    let varsigma = DMatrix::from_fn(sc.num_aps(), sc.num_ul(), |_, l| varsigma_tilde[l].max(0.0).sqrt());
    let p = psi(sc, &varsigma)?;
    let f = phi_with(sc, &b, &varsigma, |_, _, _| 0.0)?;
    let prelog = 0.5 * sc.cfg.prelog();
    Ok(p.iter().zip(&f).map(|(&p, &f)| se_from_ratio(prelog, p, f)).collect())
}
