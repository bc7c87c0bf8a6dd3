//! Scalar system parameters.
//!
//! Powers are stored already normalized by the receiver noise power, so a
//! value of `rho_d = 1e12` means the AP budget is 10^12 times the noise floor.
//! Large-scale coefficients are plain power gains and are used as-is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.381e-23;
/// Noise temperature in K.
pub const NOISE_TEMPERATURE: f64 = 290.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Thermal noise power `k_B T_0 B F` in dBm for a bandwidth in Hz and a noise figure in dB.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let watts = BOLTZMANN * NOISE_TEMPERATURE * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0);
    watts_to_dbm(watts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// M
    pub num_aps: usize,
    /// N
    pub antennas_per_ap: usize,
    /// K_d
    pub num_dl_ues: usize,
    /// K_u
    pub num_ul_ues: usize,
    /// Coherence block length in symbols.
    pub coherence_len: usize,
    /// Pilot length in symbols.
    pub pilot_len: usize,
    /// Normalized pilot power.
    pub rho_t: f64,
    /// Normalized maximum AP transmit power.
    pub rho_d: f64,
    /// Normalized maximum UL UE transmit power.
    pub rho_u: f64,
    /// Per-UE DL SE target in bit/s/Hz.
    pub se_target_dl: f64,
    /// Per-UE UL SE target in bit/s/Hz.
    pub se_target_ul: f64,
    /// Side of the square (torus) deployment area in meters.
    pub area_side: f64,
    /// Minimum wrap-around distance between any two APs in meters.
    pub min_ap_spacing: f64,
    pub shadow_std_db: f64,
    /// Distance at which the shadowing correlation halves, in meters.
    pub shadow_decorrelation: f64,
    pub noise_power_dbm: f64,
    /// Scale applied to the SE targets of the half-duplex baseline (1.0 applies
    /// the same target to the half-rate SE).
    #[serde(default = "one")]
    pub hd_target_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SystemConfig {
    /// Default deployment: 1 km² torus, N = 2, 1 W APs, 0.2 W UEs and pilots,
    /// -92 dBm noise, S° = 0.2 bit/s/Hz and τ_t = K_d + K_u.
    pub fn reference(num_aps: usize, num_dl_ues: usize, num_ul_ues: usize) -> Self {
        let noise_dbm = -92.0;
        let noise_w = dbm_to_watts(noise_dbm);
        SystemConfig {
            num_aps,
            antennas_per_ap: 2,
            num_dl_ues,
            num_ul_ues,
            coherence_len: 200,
            pilot_len: num_dl_ues + num_ul_ues,
            rho_t: 0.2 / noise_w,
            rho_d: 1.0 / noise_w,
            rho_u: 0.2 / noise_w,
            se_target_dl: 0.2,
            se_target_ul: 0.2,
            area_side: 1000.0,
            min_ap_spacing: 50.0,
            shadow_std_db: 4.0,
            shadow_decorrelation: 9.0,
            noise_power_dbm: noise_dbm,
            hd_target_scale: 1.0,
        }
    }

    /// Desk-scale profile: M = 10, K_d = K_u = 2.
    pub fn desk() -> Self {
        Self::reference(10, 2, 2)
    }

    /// Full-scale profile: K_d = K_u = 5 with the given number of APs.
    pub fn full_scale(num_aps: usize) -> Self {
        Self::reference(num_aps, 5, 5)
    }

    pub fn num_ues(&self) -> usize {
        self.num_dl_ues + self.num_ul_ues
    }

    /// `(τ_c - τ_t) / τ_c`
    pub fn prelog(&self) -> f64 {
        (self.coherence_len as f64 - self.pilot_len as f64) / self.coherence_len as f64
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.num_aps == 0 {
            return err("num_aps must be at least 1");
        }
        if self.antennas_per_ap == 0 {
            return err("antennas_per_ap must be at least 1");
        }
        if self.pilot_len < self.num_ues() {
            return err("pilot_len must be at least K_u + K_d for orthogonal pilots");
        }
        if self.pilot_len > self.coherence_len {
            return err("pilot_len cannot exceed coherence_len");
        }
        if self.coherence_len == 0 {
            return err("coherence_len must be positive");
        }
        for (name, v) in [("rho_t", self.rho_t), ("rho_d", self.rho_d), ("rho_u", self.rho_u)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        if !(self.area_side > 0.0) {
            return err("area_side must be positive");
        }
        if self.min_ap_spacing < 0.0 || self.shadow_std_db < 0.0 {
            return err("min_ap_spacing and shadow_std_db must be nonnegative");
        }
        if !(self.shadow_decorrelation > 0.0) {
            return err("shadow_decorrelation must be positive");
        }
        if self.se_target_dl < 0.0 || self.se_target_ul < 0.0 || self.hd_target_scale < 0.0 {
            return err("SE targets must be nonnegative");
        }
        Ok(())
    }
}
