//! Monte Carlo check of the channel moments behind the closed-form SEs.
//!
//! Small-scale fading is drawn explicitly: `g = √β z`, the MMSE estimate is
//! formed from an orthogonal-pilot observation, and AP–AP channels are
//! `N × N` matrices with i.i.d. `CN(0, β_mi)` entries. Sample means are then
//! compared against the expectations the closed forms are built from.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::exec::{map_indexed, Execution};
use crate::scenario::Scenario;

type C64 = Complex<f64>;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentKind {
    /// `E{g_mkᵀ ĝ_mk*} = N γ_mk` (DL) and `E{ĝ_mℓ† g_mℓ} = N γ_mℓ` (UL).
    DesiredMean,
    /// `E{|g_mkᵀ ĝ_mk'*|²} = N β_mk γ_mk' + [k = k'] N² γ_mk²`
    DlInterference,
    /// `E{|ĝ_mℓ† g_mq|²} = N γ_mℓ β_mq + [q = ℓ] N² γ_mℓ²`
    UlInterference,
    /// `E{|ĝ_mℓ† Z_mi ĝ_ik*|²} = N² β_mi γ_mℓ γ_ik`
    CrossLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub kind: MomentKind,
    pub uplink: bool,
    /// Link indices, meaning depends on `kind` (see [`MomentKind`]).
    pub indices: Vec<usize>,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
}

impl MomentCheck {
    pub fn rel_error(&self) -> f64 {
        if self.closed_form == 0.0 {
            return self.estimate.abs();
        }
        ((self.estimate - self.closed_form) / self.closed_form).abs()
    }

    /// Deviation in units of the standard error.
    pub fn z_score(&self) -> f64 {
        let d = (self.estimate - self.closed_form).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub num_draws: usize,
    pub checks: Vec<MomentCheck>,
}

impl MomentReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(MomentCheck::rel_error).fold(0.0, f64::max)
    }

    pub fn max_z_score(&self) -> f64 {
        self.checks.iter().map(MomentCheck::z_score).fold(0.0, f64::max)
    }

    pub fn all_within(&self, sigmas: f64, rel: f64) -> bool {
        self.checks
            .iter()
            .all(|c| c.z_score() <= sigmas && c.rel_error() <= rel)
    }
}

struct Layout {
    m: usize,
    kd: usize,
    ku: usize,
}

impl Layout {
    fn count(&self) -> usize {
        let (m, kd, ku) = (self.m, self.kd, self.ku);
        m * kd + m * ku + m * kd * kd + m * ku * ku + m * m.saturating_sub(1) * ku * kd
    }
}

#[derive(Clone)]
struct Acc {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Acc {
    fn new(n: usize) -> Self {
        Acc {
            sum: vec![0.0; n],
            sumsq: vec![0.0; n],
        }
    }

    #[inline]
    fn push(&mut self, idx: usize, v: f64) {
        self.sum[idx] += v;
        self.sumsq[idx] += v * v;
    }

    fn merge(&mut self, other: &Acc) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
    }
}

fn cn<R: Rng>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    C64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
}

/// True channel and its MMSE estimate from one orthogonal pilot observation.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub g: Vec<C64>,
    pub g_hat: Vec<C64>,
}

pub fn draw_channel<R: Rng>(rng: &mut R, n: usize, beta: f64, pilot_snr: f64) -> ChannelDraw {
    let amp = pilot_snr.sqrt();
    let coeff = amp * beta / (pilot_snr * beta + 1.0);
    let mut g = Vec::with_capacity(n);
    let mut g_hat = Vec::with_capacity(n);
    for _ in 0..n {
        let gi = cn(rng, beta);
        let y = gi * amp + cn(rng, 1.0);
        g.push(gi);
        g_hat.push(y * coeff);
    }
    ChannelDraw { g, g_hat }
}

/// `xᵀ y*`
fn dot_conj(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn run_chunk(sc: &Scenario, lay: &Layout, draws: usize, rng: &mut ChaCha8Rng) -> Acc {
    let (m, kd, ku) = (lay.m, lay.kd, lay.ku);
    let n = sc.cfg.antennas_per_ap;
    let pilot_snr = sc.cfg.pilot_len as f64 * sc.cfg.rho_t;
    let mut acc = Acc::new(lay.count());
    let mut dl: Vec<ChannelDraw> = Vec::with_capacity(m * kd);
    let mut ul: Vec<ChannelDraw> = Vec::with_capacity(m * ku);
    let mut z: Vec<C64> = vec![C64::new(0.0, 0.0); m * m * n * n];
    for _ in 0..draws {
        dl.clear();
        ul.clear();
        for ap in 0..m {
            for k in 0..kd {
                dl.push(draw_channel(rng, n, sc.net.beta_dl[(ap, k)], pilot_snr));
            }
            for l in 0..ku {
                ul.push(draw_channel(rng, n, sc.net.beta_ul[(ap, l)], pilot_snr));
            }
        }
        for ap in 0..m {
            for i in 0..m {
                if i == ap {
                    continue;
                }
                let b = sc.net.beta_ap[(ap, i)];
                for e in 0..n * n {
                    z[(ap * m + i) * n * n + e] = cn(rng, b);
                }
            }
        }

        let mut idx = 0;
        for ap in 0..m {
            for k in 0..kd {
                let d = &dl[ap * kd + k];
                acc.push(idx, dot_conj(&d.g, &d.g_hat).re);
                idx += 1;
            }
        }
        for ap in 0..m {
            for l in 0..ku {
                let u = &ul[ap * ku + l];
                acc.push(idx, dot_conj(&u.g, &u.g_hat).re);
                idx += 1;
            }
        }
        for ap in 0..m {
            for k in 0..kd {
                for kp in 0..kd {
                    let v = dot_conj(&dl[ap * kd + k].g, &dl[ap * kd + kp].g_hat).norm_sqr();
                    acc.push(idx, v);
                    idx += 1;
                }
            }
        }
        for ap in 0..m {
            for l in 0..ku {
                for q in 0..ku {
                    let v = dot_conj(&ul[ap * ku + q].g, &ul[ap * ku + l].g_hat).norm_sqr();
                    acc.push(idx, v);
                    idx += 1;
                }
            }
        }
        let mut zv = vec![C64::new(0.0, 0.0); n];
        for ap in 0..m {
            for i in 0..m {
                if i == ap {
                    continue;
                }
                let zmat = &z[(ap * m + i) * n * n..(ap * m + i + 1) * n * n];
                for k in 0..kd {
                    // Z_mi ĝ_ik*
                    let gh = &dl[i * kd + k].g_hat;
                    for (r, out) in zv.iter_mut().enumerate() {
                        *out = (0..n).map(|c| zmat[r * n + c] * gh[c].conj()).sum();
                    }
                    for l in 0..ku {
                        // ĝ_mℓ† (Z ĝ*) = (Z ĝ*)ᵀ ĝ_mℓ*
                        let v = dot_conj(&zv, &ul[ap * ku + l].g_hat).norm_sqr();
                        acc.push(idx, v);
                        idx += 1;
                    }
                }
            }
        }
        debug_assert_eq!(idx, lay.count());
    }
    acc
}

/// Estimates every moment with `num_draws` samples. Draws are split into fixed
/// chunks with their own ChaCha stream, so the report depends only on `seed`.
pub fn mc_moment_oracle(sc: &Scenario, num_draws: usize, seed: u64, exec: Execution) -> MomentReport {
    let lay = Layout {
        m: sc.num_aps(),
        kd: sc.num_dl(),
        ku: sc.num_ul(),
    };
    let chunks = num_draws.div_ceil(CHUNK);
    let parts = map_indexed(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let len = CHUNK.min(num_draws - c * CHUNK);
        run_chunk(sc, &lay, len, &mut rng)
    });
    let mut acc = Acc::new(lay.count());
    for p in &parts {
        acc.merge(p);
    }

    let nd = num_draws as f64;
    let n = sc.antennas();
    let gd = &sc.stats.gamma_dl;
    let gu = &sc.stats.gamma_ul;
    let mut checks = Vec::with_capacity(lay.count());
    let mut idx = 0;
    let mut push = |kind, uplink, indices: Vec<usize>, closed: f64| {
        let mean = acc.sum[idx] / nd;
        let var = (acc.sumsq[idx] / nd - mean * mean).max(0.0) * nd / (nd - 1.0).max(1.0);
        checks.push(MomentCheck {
            kind,
            uplink,
            indices,
            closed_form: closed,
            estimate: mean,
            std_error: (var / nd).sqrt(),
        });
        idx += 1;
    };
    let (m, kd, ku) = (lay.m, lay.kd, lay.ku);
    for ap in 0..m {
        for k in 0..kd {
            push(MomentKind::DesiredMean, false, vec![ap, k], n * gd[(ap, k)]);
        }
    }
    for ap in 0..m {
        for l in 0..ku {
            push(MomentKind::DesiredMean, true, vec![ap, l], n * gu[(ap, l)]);
        }
    }
    for ap in 0..m {
        for k in 0..kd {
            for kp in 0..kd {
                let mut v = n * sc.net.beta_dl[(ap, k)] * gd[(ap, kp)];
                if k == kp {
                    v += n * n * gd[(ap, k)].powi(2);
                }
                push(MomentKind::DlInterference, false, vec![ap, k, kp], v);
            }
        }
    }
    for ap in 0..m {
        for l in 0..ku {
            for q in 0..ku {
                let mut v = n * gu[(ap, l)] * sc.net.beta_ul[(ap, q)];
                if l == q {
                    v += n * n * gu[(ap, l)].powi(2);
                }
                push(MomentKind::UlInterference, true, vec![ap, l, q], v);
            }
        }
    }
    for ap in 0..m {
        for i in 0..m {
            if i == ap {
                continue;
            }
            for k in 0..kd {
                for l in 0..ku {
                    let v = n * n * sc.net.beta_ap[(ap, i)] * gu[(ap, l)] * gd[(i, k)];
                    push(MomentKind::CrossLink, true, vec![ap, i, k, l], v);
                }
            }
        }
    }
    MomentReport { num_draws, checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;

    fn small() -> Scenario {
        Scenario::generate(&SystemConfig::reference(2, 1, 1), 3).unwrap()
    }

    #[test]
    fn zero_gain_link_has_zero_moments() {
        let mut sc = small();
        sc.net.beta_dl[(0, 0)] = 0.0;
        sc.stats = crate::network::channel_stats(&sc.cfg, &sc.net);
        let rep = mc_moment_oracle(&sc, 2_000, 1, Execution::Serial);
        let c = rep
            .checks
            .iter()
            .find(|c| c.kind == MomentKind::DesiredMean && !c.uplink && c.indices == vec![0, 0])
            .unwrap();
        assert_eq!(c.closed_form, 0.0);
        assert_eq!(c.estimate, 0.0);
    }

    #[test]
    fn estimate_variance_matches_gamma() {
        let sc = small();
        let pilot_snr = sc.cfg.pilot_len as f64 * sc.cfg.rho_t;
        let beta = sc.net.beta_dl[(0, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 50_000;
        let (mut vhat, mut cross) = (0.0, C64::new(0.0, 0.0));
        for _ in 0..draws {
            let d = draw_channel(&mut rng, 1, beta, pilot_snr);
            vhat += d.g_hat[0].norm_sqr();
            // estimate vs error
            cross += d.g_hat[0] * (d.g[0] - d.g_hat[0]).conj();
        }
        let nd = draws as f64;
        let gamma = sc.stats.gamma_dl[(0, 0)];
        assert!((vhat / nd / gamma - 1.0).abs() < 0.03);
        assert!((cross / nd).norm() / gamma < 0.03);
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let sc = small();
        let a = mc_moment_oracle(&sc, 5_000, 4, Execution::Serial);
        let b = mc_moment_oracle(&sc, 5_000, 4, Execution::Parallel { workers: 3 });
        assert_eq!(a, b);
    }

    #[test]
    fn errors_shrink_with_draws() {
        let sc = small();
        let lo = mc_moment_oracle(&sc, 10_000, 5, Execution::Auto);
        let hi = mc_moment_oracle(&sc, 40_000, 5, Execution::Auto);
        for (a, b) in lo.checks.iter().zip(&hi.checks) {
            if a.closed_form == 0.0 {
                continue;
            }
            let ratio = (b.std_error / b.closed_form) / (a.std_error / a.closed_form);
            // ideal 1/2; allow a factor-2 band
            assert!((0.25..=1.0).contains(&ratio), "{ratio}");
        }
    }
}
