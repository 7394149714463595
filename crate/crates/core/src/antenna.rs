//! Sectorized beam patterns and uniform linear array beamforming.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Wrap an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Index of the sector (out of `n`, each `2π/n` wide and centered on
/// `k·2π/n`) that contains azimuth `angle`. Sectors are half-open so every
/// direction belongs to exactly one of them.
pub fn sector_index(angle: f64, n: usize) -> usize {
    let width = 2.0 * PI / n as f64;
    let k = ((angle + 0.5 * width).rem_euclid(2.0 * PI) / width).floor() as usize;
    k.min(n - 1)
}

/// Ideal sectorized gain pattern: constant mainlobe over `beamwidth`,
/// constant `epsilon` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorPattern {
    beamwidth: f64,
    epsilon: f64,
    mainlobe_gain: f64,
}

impl SectorPattern {
    pub fn new(beamwidth: f64, epsilon: f64) -> Result<Self> {
        if !(beamwidth > 0.0 && beamwidth <= 2.0 * PI) {
            return Err(invalid("beamwidth", "must lie in (0, 2π]"));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(invalid("epsilon", "must lie in [0, 1]"));
        }
        Ok(Self::unchecked(beamwidth, epsilon))
    }

    /// Pattern for a codebook of `n` equal sectors.
    pub fn from_beam_count(n: usize, epsilon: f64) -> Self {
        let n = n.max(1) as f64;
        Self {
            beamwidth: 2.0 * PI / n,
            epsilon,
            mainlobe_gain: n - (n - 1.0) * epsilon,
        }
    }

    fn unchecked(beamwidth: f64, epsilon: f64) -> Self {
        // Whatever power leaves the sidelobes is concentrated in the mainlobe.
        let mainlobe_gain = (2.0 * PI - (2.0 * PI - beamwidth) * epsilon) / beamwidth;
        Self {
            beamwidth,
            epsilon,
            mainlobe_gain,
        }
    }

    pub fn beamwidth(&self) -> f64 {
        self.beamwidth
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mainlobe_gain(&self) -> f64 {
        self.mainlobe_gain
    }

    /// Gain toward a direction `angle_offset` away from boresight.
    pub fn gain(&self, angle_offset: f64) -> f64 {
        if wrap_angle(angle_offset).abs() <= 0.5 * self.beamwidth {
            self.mainlobe_gain
        } else {
            self.epsilon
        }
    }
}

/// Free-function form of [`SectorPattern::gain`].
pub fn sbp_gain(pattern: &SectorPattern, angle_offset: f64) -> f64 {
    pattern.gain(angle_offset)
}

/// Unit-norm array response of a `k`-element half-wavelength ULA,
/// entry m = exp(−j m π sin θ)/√k.
pub fn ula_response(k: usize, theta: f64) -> Vec<Complex64> {
    let scale = 1.0 / (k as f64).sqrt();
    let phase = PI * theta.sin();
    (0..k)
        .map(|m| Complex64::from_polar(scale, -(m as f64) * phase))
        .collect()
}

/// Analog beamformer: the first `active` elements steered to `boresight`
/// with identical modulus, the rest switched off.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    coefficients: Vec<Complex64>,
    active: usize,
    boresight: f64,
}

impl BeamVector {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn active_elements(&self) -> usize {
        self.active
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn boresight(&self) -> f64 {
        self.boresight
    }

    /// |bᴴ a(K, θ)|², computed in closed form.
    ///
    /// With x = π(sin θ₀ − sin θ) the inner product is a Dirichlet kernel:
    /// |sin(k x/2) / sin(x/2)|² / (k K).
    pub fn array_factor(&self, theta: f64) -> f64 {
        array_factor(self.active, self.coefficients.len(), self.boresight, theta)
    }
}

/// Closed-form |f(k, K, θ₀)ᴴ a(K, θ)|².
pub fn array_factor(active: usize, total: usize, boresight: f64, theta: f64) -> f64 {
    array_factor_sines(active, total, boresight.sin(), theta.sin())
}

/// [`array_factor`] from the sines of the two angles.
pub fn array_factor_sines(active: usize, total: usize, sin_boresight: f64, sin_theta: f64) -> f64 {
    let k = active as f64;
    let x = PI * (sin_boresight - sin_theta);
    let half = 0.5 * x;
    let den = half.sin();
    let ratio_sq = if den.abs() < 1e-9 {
        // Near the mainlobe peak the kernel tends to k²; use the Taylor form.
        let c = (k * k - 1.0) / 6.0;
        k * k * (1.0 - c * half * half)
    } else {
        let num = (k * half).sin();
        (num / den).powi(2)
    };
    ratio_sq / (k * total as f64)
}

/// f(k, K, θ): the first k entries of a(k, θ) padded with K − k zeros.
pub fn beam_vector(k: usize, total: usize, theta: f64) -> Result<BeamVector> {
    if k == 0 {
        return Err(invalid("active_elements", "must be at least 1"));
    }
    if k > total {
        return Err(invalid(
            "active_elements",
            format!("{k} active elements exceed the array size {total}"),
        ));
    }
    let mut coefficients = ula_response(k, theta);
    coefficients.resize(total, Complex64::new(0.0, 0.0));
    Ok(BeamVector {
        coefficients,
        active: k,
        boresight: theta,
    })
}

/// A set of beams with boresights spaced uniformly over [0, 2π).
///
/// A ULA cannot tell θ from π − θ, so beams at mirrored boresights coincide;
/// the codebook still follows the sector geometry of the angular space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: Vec<BeamVector>,
}

impl Codebook {
    pub fn beams(&self) -> &[BeamVector] {
        &self.beams
    }

    pub fn boresights(&self) -> Vec<f64> {
        self.beams.iter().map(|b| b.boresight).collect()
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn array_size(&self) -> usize {
        self.beams.first().map_or(0, BeamVector::len)
    }
}

pub fn make_codebook(total: usize, n_beams: usize, k_active: usize) -> Result<Codebook> {
    if n_beams == 0 {
        return Err(invalid("n_beams", "must be at least 1"));
    }
    let step = 2.0 * PI / n_beams as f64;
    let beams = (0..n_beams)
        .map(|i| beam_vector(k_active, total, i as f64 * step))
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook { beams })
}

/// Single-path channel H = √ℓ h a(M_UE, θ) a(M_BS, φ)ᴴ, kept in factored form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathChannel {
    /// ℓ(r), linear.
    pub path_gain: f64,
    /// |h|².
    pub fading_power: f64,
    /// Angle of arrival at the UE.
    pub aoa: f64,
    /// Angle of departure at the BS.
    pub aod: f64,
    pub m_ue: usize,
    pub m_bs: usize,
}

impl PathChannel {
    /// |wᴴ a(M_UE, θ)|².
    pub fn ue_factor(&self, w: &BeamVector) -> f64 {
        w.array_factor(self.aoa)
    }

    /// |a(M_BS, φ)ᴴ v|².
    pub fn bs_factor(&self, v: &BeamVector) -> f64 {
        v.array_factor(self.aod)
    }
}

/// |wᴴ H v|² for a single-path channel, using the rank-one factorization.
pub fn effective_gain(w: &BeamVector, channel: &PathChannel, v: &BeamVector) -> Result<f64> {
    if w.len() != channel.m_ue {
        return Err(Error::DimensionMismatch {
            expected: channel.m_ue,
            got: w.len(),
        });
    }
    if v.len() != channel.m_bs {
        return Err(Error::DimensionMismatch {
            expected: channel.m_bs,
            got: v.len(),
        });
    }
    let a_ue = ula_response(channel.m_ue, channel.aoa);
    let a_bs = ula_response(channel.m_bs, channel.aod);
    let ue: Complex64 = w.coefficients.iter().zip(&a_ue).map(|(wi, ai)| wi.conj() * ai).sum();
    let bs: Complex64 = a_bs.iter().zip(&v.coefficients).map(|(ai, vi)| ai.conj() * vi).sum();
    Ok(channel.path_gain * channel.fading_power * ue.norm_sqr() * bs.norm_sqr())
}
