#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

use vfdcf_core::sca::penalty::{residuals, surrogate_penalties};
use vfdcf_core::sca::surrogate::{surrogate_dl_se, surrogate_ul_se};
use vfdcf_core::se::{dl_se, ul_se, ul_se_lower, EtaTilde, ModeAssignment, PowerAllocation};
use vfdcf_core::Scenario;

/// A random point of the relaxed feasible set: `a + b = 1`, per-AP power
/// `Σ_k Nγ η ≤ a`, `θ² ≤ η`, `ς² ≤ b ς̃`, `b η ≤ η̃ ≤ η`.
pub fn random_point<R: Rng>(sc: &Scenario, rng: &mut R) -> (ModeAssignment, PowerAllocation) {
    let (m, kd, ku) = (sc.num_aps(), sc.num_dl(), sc.num_ul());
    let n = sc.antennas();
    let a: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let mode = ModeAssignment::relaxed(a);
    let eta = DMatrix::from_fn(m, kd, |i, k| {
        mode.a[i] * rng.random::<f64>() / kd as f64 / (n * sc.stats.gamma_dl[(i, k)])
    });
    let theta = eta.map(|e| (e * rng.random::<f64>()).sqrt());
    let varsigma_tilde: Vec<f64> = (0..ku).map(|_| rng.random::<f64>()).collect();
    let varsigma = DMatrix::from_fn(m, ku, |i, l| (mode.b[i] * varsigma_tilde[l] * rng.random::<f64>()).sqrt());
    let mut eta_tilde = EtaTilde::zeros(m, kd);
    for i in 0..m {
        for ap in 0..m {
            for k in 0..kd {
                let lo = mode.b[ap] * eta[(i, k)];
                *eta_tilde.get_mut(i, ap, k) = lo + rng.random::<f64>() * (eta[(i, k)] - lo);
            }
        }
    }
    let power = PowerAllocation {
        eta,
        theta,
        varsigma_tilde,
        varsigma,
        eta_tilde,
    };
    (mode, power)
}

#[derive(Debug, Default)]
pub struct SandwichReport {
    pub points: usize,
    /// Largest `lower - upper` over every inequality in the chain (≤ 0 passes).
    pub worst_violation: f64,
    /// Largest relative gap between surrogate and exact value at the anchor.
    pub worst_anchor_gap: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Checks `S̃_ul ≤ Ŝ_ul ≤ S_ul`, `S̃_dl ≤ S_dl`, `C̃_j ≥ C_j` at `points`
/// random points against one random anchor, and tightness at the anchor.
pub fn sandwich<R: Rng>(sc: &Scenario, points: usize, rng: &mut R) -> SandwichReport {
    let (am, ap) = random_point(sc, rng);
    let mut rep = SandwichReport {
        points,
        ..Default::default()
    };
    let mut bump = |v: f64| rep.worst_violation = rep.worst_violation.max(v);

    let h_ul0 = ul_se_lower(sc, &am.b, &ap.varsigma, &ap.eta_tilde).unwrap();
    let t_ul0 = surrogate_ul_se(sc, &am, &ap, &am, &ap).unwrap();
    let t_dl0 = surrogate_dl_se(sc, &ap, &ap).unwrap();
    let s_dl0 = dl_se(sc, &ap.theta, &ap.varsigma_tilde).unwrap();
    let c0 = residuals(&am, &ap);
    let ct0 = surrogate_penalties(&am, &ap, &am, &ap);
    let mut gap = 0.0f64;
    for (t, h) in t_ul0.iter().zip(&h_ul0) {
        gap = gap.max(rel(*t, *h));
    }
    for (t, s) in t_dl0.iter().zip(&s_dl0) {
        gap = gap.max(rel(*t, *s));
    }
    gap = gap.max(rel(ct0.c1, c0.c1)).max(rel(ct0.c2, c0.c2)).max(rel(ct0.c3, c0.c3));

    for _ in 0..points {
        let (mode, power) = random_point(sc, rng);
        let s_ul = ul_se(sc, &mode.b, &power.varsigma, &power.eta).unwrap();
        let h_ul = ul_se_lower(sc, &mode.b, &power.varsigma, &power.eta_tilde).unwrap();
        let t_ul = surrogate_ul_se(sc, &mode, &power, &am, &ap).unwrap();
        for l in 0..sc.num_ul() {
            bump(t_ul[l] - h_ul[l]);
            bump(h_ul[l] - s_ul[l]);
        }
        let s_dl = dl_se(sc, &power.theta, &power.varsigma_tilde).unwrap();
        let t_dl = surrogate_dl_se(sc, &power, &ap).unwrap();
        for k in 0..sc.num_dl() {
            bump(t_dl[k] - s_dl[k]);
        }
        let c = residuals(&mode, &power);
        let ct = surrogate_penalties(&mode, &power, &am, &ap);
        bump(c.c1 - ct.c1);
        bump(c.c2 - ct.c2);
        bump(c.c3 - ct.c3);
    }
    rep.worst_anchor_gap = gap;
    rep
}
