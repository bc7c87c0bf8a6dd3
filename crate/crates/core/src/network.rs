//! Random deployments and large-scale propagation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Rejection budget per AP when enforcing the minimum spacing.
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Distances below this are clamped before evaluating the path loss.
pub const MIN_LINK_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Euclidean distance on the torus `[0, side)²`.
pub fn wrap_distance(p: Point, q: Point, side: f64) -> f64 {
    let wrap = |d: f64| {
        let d = d.abs() % side;
        d.min(side - d)
    };
    wrap(p.x - q.x).hypot(wrap(p.y - q.y))
}

/// `-30.5 - 36.7 log10(d / 1 m)` in dB, with `d` clamped to at least 1 m.
pub fn path_loss_db(distance: f64) -> f64 {
    -30.5 - 36.7 * distance.max(MIN_LINK_DISTANCE).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub aps: Vec<Point>,
    pub dl_ues: Vec<Point>,
    pub ul_ues: Vec<Point>,
}

impl Positions {
    /// All UEs, DL first, then UL. This is the column order of the shadowing matrix.
    pub fn ues(&self) -> impl Iterator<Item = Point> + '_ {
        self.dl_ues.iter().chain(self.ul_ues.iter()).copied()
    }
}

fn uniform_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Point {
    Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Draws AP and UE positions uniformly in the square. Each AP is re-drawn until
/// it keeps the minimum wrap-around spacing to every AP placed before it.
pub fn place_nodes<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Positions> {
    let side = cfg.area_side;
    let mut aps: Vec<Point> = Vec::with_capacity(cfg.num_aps);
    for ap in 0..cfg.num_aps {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p = uniform_point(side, rng);
            if aps
                .iter()
                .all(|&q| wrap_distance(p, q, side) >= cfg.min_ap_spacing)
            {
                aps.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementFailed {
                ap,
                attempts: PLACEMENT_ATTEMPTS,
            });
        }
    }
    let dl_ues = (0..cfg.num_dl_ues).map(|_| uniform_point(side, rng)).collect();
    let ul_ues = (0..cfg.num_ul_ues).map(|_| uniform_point(side, rng)).collect();
    Ok(Positions { aps, dl_ues, ul_ues })
}

/// Covariance of the shadowing seen by one AP across all UEs:
/// `σ² 2^(-δ_kℓ / d_corr)` with δ the wrap-around UE separation.
pub fn shadowing_covariance(cfg: &SystemConfig, positions: &Positions) -> DMatrix<f64> {
    let ues: Vec<Point> = positions.ues().collect();
    let var = cfg.shadow_std_db * cfg.shadow_std_db;
    DMatrix::from_fn(ues.len(), ues.len(), |k, l| {
        let d = wrap_distance(ues[k], ues[l], cfg.area_side);
        var * 2f64.powf(-d / cfg.shadow_decorrelation)
    })
}

/// Symmetric square root `V diag(√λ) Vᵀ`. Retries once with a 1e-10 jitter on
/// the diagonal when an eigenvalue is meaningfully negative.
pub fn symmetric_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let attempt = |c: DMatrix<f64>| {
        let scale = c.diagonal().amax().max(f64::MIN_POSITIVE);
        let eig = SymmetricEigen::new(c);
        let min = eig.eigenvalues.min();
        (eig, min, -1e-12 * scale)
    };
    let (mut eig, mut min, mut tol) = attempt(cov.clone());
    if min < tol {
        let jittered = cov + DMatrix::identity(n, n) * 1e-10;
        (eig, min, tol) = attempt(jittered);
        if min < tol {
            return Err(Error::CovarianceNotPsd { min_eigenvalue: min });
        }
    }
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&sqrt_vals) * v.transpose())
}

/// Correlated log-normal shadowing in dB for every AP–UE link, `M × (K_d + K_u)`
/// with DL UEs in the leading columns. Rows (APs) are independent.
pub fn correlated_shadowing<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    positions: &Positions,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let root = symmetric_sqrt(&shadowing_covariance(cfg, positions))?;
    let k = root.nrows();
    let m = positions.aps.len();
    let mut out = DMatrix::zeros(m, k);
    for ap in 0..m {
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let row = &root * z;
        out.row_mut(ap).copy_from(&row.transpose());
    }
    Ok(out)
}

/// Positions plus every large-scale coefficient of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub positions: Positions,
    /// `M × K_d`
    pub beta_dl: DMatrix<f64>,
    /// `M × K_u`
    pub beta_ul: DMatrix<f64>,
    /// `K_d × K_u`, UL UE to DL UE.
    pub beta_du: DMatrix<f64>,
    /// `M × M`, symmetric with zero diagonal.
    pub beta_ap: DMatrix<f64>,
    /// AP–UE shadowing in dB, `M × (K_d + K_u)`.
    pub shadow_db: DMatrix<f64>,
}

impl NetworkRealization {
    pub fn num_aps(&self) -> usize {
        self.beta_dl.nrows()
    }
}

fn link_gain(distance: f64, shadow_db: f64) -> f64 {
    db_to_linear(path_loss_db(distance) + shadow_db)
}

pub fn realize_network<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<NetworkRealization> {
    cfg.validate()?;
    let positions = place_nodes(cfg, rng)?;
    let shadow_db = correlated_shadowing(cfg, &positions, rng)?;
    let side = cfg.area_side;
    let (m, kd, ku) = (cfg.num_aps, cfg.num_dl_ues, cfg.num_ul_ues);

    let beta_dl = DMatrix::from_fn(m, kd, |ap, k| {
        link_gain(wrap_distance(positions.aps[ap], positions.dl_ues[k], side), shadow_db[(ap, k)])
    });
    let beta_ul = DMatrix::from_fn(m, ku, |ap, l| {
        link_gain(
            wrap_distance(positions.aps[ap], positions.ul_ues[l], side),
            shadow_db[(ap, kd + l)],
        )
    });

    // UE–UE and AP–AP links get i.i.d. shadowing.
    let std = cfg.shadow_std_db;
    let mut beta_du = DMatrix::zeros(kd, ku);
    for k in 0..kd {
        for l in 0..ku {
            let f = std * rng.sample::<f64, _>(StandardNormal);
            let d = wrap_distance(positions.dl_ues[k], positions.ul_ues[l], side);
            beta_du[(k, l)] = link_gain(d, f);
        }
    }
    let mut beta_ap = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let f = std * rng.sample::<f64, _>(StandardNormal);
            let g = link_gain(wrap_distance(positions.aps[i], positions.aps[j], side), f);
            beta_ap[(i, j)] = g;
            beta_ap[(j, i)] = g;
        }
    }

    Ok(NetworkRealization {
        positions,
        beta_dl,
        beta_ul,
        beta_du,
        beta_ap,
        shadow_db,
    })
}

/// MMSE estimate variances of every AP–UE channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    /// `M × K_d`
    pub gamma_dl: DMatrix<f64>,
    /// `M × K_u`
    pub gamma_ul: DMatrix<f64>,
}

/// `γ = τ_t ρ_t β² / (τ_t ρ_t β + 1)`
pub fn mmse_variance(pilot_snr: f64, beta: f64) -> f64 {
    pilot_snr * beta * beta / (pilot_snr * beta + 1.0)
}

pub fn channel_stats(cfg: &SystemConfig, net: &NetworkRealization) -> ChannelStats {
    let pilot_snr = cfg.pilot_len as f64 * cfg.rho_t;
    ChannelStats {
        gamma_dl: net.beta_dl.map(|b| mmse_variance(pilot_snr, b)),
        gamma_ul: net.beta_ul.map(|b| mmse_variance(pilot_snr, b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wrap_distance_examples() {
        let o = Point::new(0.0, 0.0);
        assert!((wrap_distance(o, Point::new(900.0, 0.0), 1000.0) - 100.0).abs() < 1e-9);
        assert_eq!(wrap_distance(o, o, 1000.0), 0.0);
        assert!((wrap_distance(o, Point::new(500.0, 500.0), 1000.0) - 707.1068).abs() < 1e-4);
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(1.0) - -30.5).abs() < 1e-12);
        assert!((path_loss_db(10.0) - -67.2).abs() < 1e-12);
        assert!((path_loss_db(100.0) - -103.9).abs() < 1e-12);
        // clamped below 1 m
        assert_eq!(path_loss_db(0.1), path_loss_db(1.0));
    }

    #[test]
    fn gain_formula_plug() {
        let expected = 10f64.powf(-9.2);
        assert!((db_to_linear(-92.0 + 0.0) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_ap_needs_no_spacing_check() {
        let mut cfg = SystemConfig::reference(1, 1, 1);
        cfg.min_ap_spacing = 1e9;
        let pos = place_nodes(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(pos.aps.len(), 1);
    }

    #[test]
    fn spacing_is_enforced() {
        let cfg = SystemConfig::reference(30, 5, 5);
        for seed in 0..5 {
            let pos = place_nodes(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for i in 0..pos.aps.len() {
                for j in (i + 1)..pos.aps.len() {
                    assert!(wrap_distance(pos.aps[i], pos.aps[j], 1000.0) >= 50.0);
                }
            }
        }
    }

    #[test]
    fn placement_fails_loudly_when_area_is_too_small() {
        let mut cfg = SystemConfig::reference(4, 1, 1);
        cfg.area_side = 10.0;
        cfg.min_ap_spacing = 50.0;
        let err = place_nodes(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::PlacementFailed { ap: 1, .. }));
    }

    #[test]
    fn placement_is_deterministic() {
        let cfg = SystemConfig::reference(30, 5, 5);
        let a = place_nodes(&cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = place_nodes(&cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn realization_is_deterministic_and_well_formed() {
        let cfg = SystemConfig::reference(10, 3, 2);
        let a = realize_network(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = realize_network(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        for i in 0..10 {
            assert_eq!(a.beta_ap[(i, i)], 0.0);
            for j in 0..10 {
                assert_eq!(a.beta_ap[(i, j)], a.beta_ap[(j, i)]);
                if i != j {
                    assert!(a.beta_ap[(i, j)] > 0.0);
                }
            }
        }
        for v in a.beta_dl.iter().chain(a.beta_ul.iter()).chain(a.beta_du.iter()) {
            assert!(v.is_finite() && *v > 0.0);
        }
    }

    #[test]
    fn co_located_ues_share_shadowing() {
        let cfg = SystemConfig::reference(3, 1, 1);
        let pos = Positions {
            aps: vec![Point::new(0.0, 0.0), Point::new(300.0, 0.0), Point::new(0.0, 300.0)],
            dl_ues: vec![Point::new(100.0, 100.0)],
            ul_ues: vec![Point::new(100.0, 100.0)],
        };
        let f = correlated_shadowing(&cfg, &pos, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for ap in 0..3 {
            assert!((f[(ap, 0)] - f[(ap, 1)]).abs() < 1e-9);
        }
    }

    #[test]
    fn shadowing_marginals_and_correlation() {
        // Two UEs 9 m apart: correlation 2^-1.
        let cfg = SystemConfig::reference(1, 1, 1);
        let pos = Positions {
            aps: vec![Point::new(0.0, 0.0)],
            dl_ues: vec![Point::new(100.0, 100.0)],
            ul_ues: vec![Point::new(109.0, 100.0)],
        };
        let root = symmetric_sqrt(&shadowing_covariance(&cfg, &pos)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let (mut s0, mut s1, mut s00, mut s11, mut s01) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..draws {
            let z = nalgebra::DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let f = &root * z;
            s0 += f[0];
            s1 += f[1];
            s00 += f[0] * f[0];
            s11 += f[1] * f[1];
            s01 += f[0] * f[1];
        }
        let n = draws as f64;
        let (m0, m1) = (s0 / n, s1 / n);
        let v0 = s00 / n - m0 * m0;
        let v1 = s11 / n - m1 * m1;
        let corr = (s01 / n - m0 * m1) / (v0 * v1).sqrt();
        assert!(m0.abs() < 0.1 && m1.abs() < 0.1);
        assert!((v0.sqrt() / 4.0 - 1.0).abs() < 0.02, "std {}", v0.sqrt());
        assert!((v1.sqrt() / 4.0 - 1.0).abs() < 0.02);
        assert!((corr - 0.5).abs() < 0.02, "corr {corr}");
    }

    #[test]
    fn single_ue_shadowing_has_std_four() {
        let cfg = SystemConfig::reference(1, 1, 0);
        let pos = Positions {
            aps: vec![Point::new(0.0, 0.0)],
            dl_ues: vec![Point::new(1.0, 1.0)],
            ul_ues: vec![],
        };
        let root = symmetric_sqrt(&shadowing_covariance(&cfg, &pos)).unwrap();
        assert!((root[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(symmetric_sqrt(&bad), Err(Error::CovarianceNotPsd { .. })));
    }

    #[test]
    fn mmse_variance_examples() {
        assert_eq!(mmse_variance(1e6, 0.0), 0.0);
        // τρβ = 1 → β/2
        assert!((mmse_variance(1.0 / 0.25, 0.25) - 0.125).abs() < 1e-15);
        let g = mmse_variance(20.0 * 1e6, 1e-8);
        let expected = (20.0 * 1e6 * 1e-16) / (20.0 * 1e6 * 1e-8 + 1.0);
        assert!((g - expected).abs() < 1e-24);
        assert!((g - 1.6667e-9).abs() < 1e-13);
    }

    #[test]
    fn estimate_variance_approaches_gain_at_high_pilot_snr() {
        for &beta in &[1e-12, 1e-9, 1e-6] {
            let snr = 100.0 / beta;
            let g = mmse_variance(snr, beta);
            assert!(g < beta && g / beta > 0.99);
        }
    }

    proptest! {
        #[test]
        fn wrap_distance_is_a_metric(
            ax in 0.0..1000.0f64, ay in 0.0..1000.0f64,
            bx in 0.0..1000.0f64, by in 0.0..1000.0f64,
            cx in 0.0..1000.0f64, cy in 0.0..1000.0f64,
        ) {
            let side = 1000.0;
            let (a, b, c) = (Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy));
            let ab = wrap_distance(a, b, side);
            prop_assert!((ab - wrap_distance(b, a, side)).abs() < 1e-9);
            prop_assert!(ab <= side / 2f64.sqrt() + 1e-9);
            prop_assert!(ab <= wrap_distance(a, c, side) + wrap_distance(c, b, side) + 1e-9);
            prop_assert_eq!(wrap_distance(a, a, side), 0.0);
            if a != b { prop_assert!(ab > 0.0); }
        }

        #[test]
        fn gamma_is_increasing_in_pilot_power(beta in 1e-12..1e-6f64, p in 1e6..1e12f64) {
            let lo = mmse_variance(p, beta);
            let hi = mmse_variance(2.0 * p, beta);
            prop_assert!(lo > 0.0 && lo < hi && hi <= beta);
        }
    }
}
