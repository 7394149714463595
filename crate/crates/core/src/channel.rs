//! Path loss and noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{dbm_to_watts, SystemParams, THERMAL_NOISE_DBM_PER_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Control,
    Data,
}

/// ℓ(r) = (c / 4π r f_c)^α with α picked by the LOS state.
pub fn path_loss(r: f64, is_los: bool, params: &SystemParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::SingularDistance(r));
    }
    let alpha = if is_los { params.alpha_los } else { params.alpha_nlos };
    Ok(path_loss_exp(r, alpha, params.reference_distance()))
}

/// Path loss for an explicit exponent; an infinite exponent yields zero.
#[inline]
pub(crate) fn path_loss_exp(r: f64, alpha: f64, reference_distance: f64) -> f64 {
    if alpha.is_infinite() {
        0.0
    } else {
        (reference_distance / r).powf(alpha)
    }
}

/// −174 dBm/Hz + 10 log10(Δ) + NF, in watts.
pub fn thermal_noise_watts(bandwidth: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth.log10() + noise_figure_db)
}

/// How the noise power is normalized relative to the received signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseNormalization {
    /// Also divide by the LOS free-space constant (c/4πf_c)^α_L so the
    /// signal can be written as h·r^{−α}.
    pub path_normalized: bool,
    /// Also divide by the serving BS mainlobe gain.
    pub include_bs_gain: bool,
}

impl NoiseNormalization {
    /// σ² = W / (p G_UE).
    pub const RAW: Self = Self {
        path_normalized: false,
        include_bs_gain: false,
    };
    /// σ² = W / (p G_UE G_BS).
    pub const WITH_BS_GAIN: Self = Self {
        path_normalized: false,
        include_bs_gain: true,
    };
    /// σ² = W / (p G_UE G_BS (c/4πf_c)^α_L).
    pub const PATH_NORMALIZED: Self = Self {
        path_normalized: true,
        include_bs_gain: true,
    };
}

/// Noise power relative to transmit power and antenna gains.
///
/// The BS gain switch exists because the serving BS gain multiplies the
/// signal; dividing it into the noise makes the single-link form
/// `h ℓ / σ²` consistent with the full SINR. It is on by default.
pub fn noise_power_normalized(params: &SystemParams, plane: Plane, normalization: NoiseNormalization) -> f64 {
    let (bw, p) = match plane {
        Plane::Control => (params.bw_control, params.p_bs_control),
        Plane::Data => (params.bw_data, params.p_bs_data),
    };
    let mut sigma2 = thermal_noise_watts(bw, params.noise_figure_db) / (p * params.ue_gain());
    if normalization.include_bs_gain {
        sigma2 /= params.bs_pattern().mainlobe_gain();
    }
    if normalization.path_normalized {
        sigma2 /= params.k_los();
    }
    sigma2
}

/// Link-level quantities for one BS–UE pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub path_gain: f64,
    pub antenna_gain_bs: f64,
    pub antenna_gain_ue: f64,
    pub noise_norm: f64,
}

impl LinkBudget {
    pub fn snr(&self, fading_power: f64) -> f64 {
        self.antenna_gain_bs * self.antenna_gain_ue * fading_power * self.path_gain / self.noise_norm
    }
}

/// Wavelength-scale distance 4π·(c/4πf_c) = c/f_c; path loss is below one beyond it.
pub fn wavelength(params: &SystemParams) -> f64 {
    4.0 * PI * params.reference_distance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::watts_to_dbm;

    #[test]
    fn path_loss_examples() {
        let p = SystemParams::table1();
        let r0 = p.reference_distance();
        assert!((path_loss(r0, true, &p).unwrap() - 1.0).abs() < 1e-14);
        let blocked = p.clone().los_only();
        assert_eq!(path_loss(37.0, false, &blocked).unwrap(), 0.0);
        // Direct arithmetic: (c / (4π·100·28e9))^2.5.
        let expected = (299_792_458.0 / (4.0 * PI * 100.0 * 28e9)).powf(2.5);
        let got = path_loss(100.0, true, &p).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-14);
        assert!((got / 2.1191e-13 - 1.0).abs() < 1e-4, "{got:e}");
        assert!(matches!(path_loss(0.0, true, &p), Err(Error::SingularDistance(_))));
    }

    #[test]
    fn noise_examples() {
        let w = thermal_noise_watts(28.8e6, 7.0);
        assert!((watts_to_dbm(w) + 92.406).abs() < 1e-3);
        assert!((w / 5.74e-13 - 1.0).abs() < 2e-3);
        assert!((watts_to_dbm(thermal_noise_watts(1.0, 0.0)) + 174.0).abs() < 1e-12);
        assert!((watts_to_dbm(thermal_noise_watts(100e6, 7.0)) + 87.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_forms() {
        let p = SystemParams::table1();
        let raw = noise_power_normalized(&p, Plane::Control, NoiseNormalization::RAW);
        let with_bs = noise_power_normalized(&p, Plane::Control, NoiseNormalization::WITH_BS_GAIN);
        let norm = noise_power_normalized(&p, Plane::Control, NoiseNormalization::PATH_NORMALIZED);
        assert!((raw / with_bs - 12.0).abs() < 1e-12);
        assert!((with_bs / norm - p.k_los()).abs() < 1e-12 * p.k_los());
        let data = noise_power_normalized(&p, Plane::Data, NoiseNormalization::RAW);
        assert!(data > raw);
    }

    #[test]
    fn path_gain_at_most_one_beyond_a_wavelength() {
        let p = SystemParams::table1();
        let lambda = wavelength(&p);
        for r in [lambda, 1.0, 10.0, 1e3] {
            let g = path_loss(r, true, &p).unwrap();
            assert!(g > 0.0 && g <= 1.0);
        }
    }
}
