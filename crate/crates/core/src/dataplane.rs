//! Beam refinement after initial access and the resulting data-plane SINR
//! and rate.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::antenna::{effective_gain, make_codebook, BeamVector, Codebook, PathChannel};
use crate::channel::{path_loss_exp, thermal_noise_watts};
use crate::error::{invalid, Result};
use crate::network::NetworkRealization;
use crate::params::SystemParams;

/// Beam pair chosen by refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedBeams {
    pub bs_index: usize,
    pub ue_index: usize,
    pub v: BeamVector,
    pub w: BeamVector,
    /// |wᴴ H v|².
    pub gain: f64,
}

/// Maximize |wᴴ H v|² over the codebook product. The channel is rank one,
/// so the BS and UE factors are maximized separately; ties go to the lowest
/// index.
pub fn refine_beams(channel: &PathChannel, bs_codebook: &Codebook, ue_codebook: &Codebook) -> Result<RefinedBeams> {
    let argmax = |values: &mut dyn Iterator<Item = f64>| {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, v) in values.enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best.0
    };
    if bs_codebook.is_empty() || ue_codebook.is_empty() {
        return Err(invalid("codebook", "must not be empty"));
    }
    let bs_index = argmax(&mut bs_codebook.beams().iter().map(|v| channel.bs_factor(v)));
    let ue_index = argmax(&mut ue_codebook.beams().iter().map(|w| channel.ue_factor(w)));
    let v = bs_codebook.beams()[bs_index].clone();
    let w = ue_codebook.beams()[ue_index].clone();
    let gain = effective_gain(&w, channel, &v)?;
    Ok(RefinedBeams {
        bs_index,
        ue_index,
        v,
        w,
        gain,
    })
}

/// Data-plane codebooks: full arrays with `oversampling` beams per control
/// beam, so every control-plane boresight is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCodebooks {
    pub bs: Codebook,
    pub ue: Codebook,
}

impl DataCodebooks {
    pub fn new(params: &SystemParams, oversampling: usize) -> Result<Self> {
        if oversampling == 0 {
            return Err(invalid("oversampling", "must be at least 1"));
        }
        Ok(Self {
            bs: make_codebook(params.m_bs, oversampling * params.n_bs, params.m_bs)?,
            ue: make_codebook(params.m_ue, oversampling * params.n_ue, params.m_ue)?,
        })
    }
}

/// Channels of the serving BS and of every other BS in LOS during the data
/// phase, with fresh fading.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSnapshot {
    pub serving: PathChannel,
    pub interferers: Vec<PathChannel>,
}

/// Draw the data-phase channels for a detected BS. The serving link is LOS;
/// each other BS is LOS with probability e^{−βr}.
pub fn data_snapshot<R: Rng>(
    net: &NetworkRealization,
    serving_bs: usize,
    params: &SystemParams,
    rng: &mut R,
) -> Result<DataSnapshot> {
    let site = net
        .bs
        .get(serving_bs)
        .ok_or_else(|| invalid("serving_bs", "index out of range"))?;
    let r0 = params.reference_distance();
    let channel = |r: f64, psi: f64, rng: &mut R| PathChannel {
        path_gain: path_loss_exp(r, params.alpha_los, r0),
        fading_power: Exp1.sample(rng),
        aoa: psi,
        aod: psi + std::f64::consts::PI,
        m_ue: params.m_ue,
        m_bs: params.m_bs,
    };
    let serving = channel(site.r, site.psi, rng);
    let mut interferers = Vec::new();
    for (i, b) in net.bs.iter().enumerate() {
        if i != serving_bs && rng.random::<f64>() < (-params.beta * b.r).exp() {
            interferers.push(channel(b.r, b.psi, rng));
        }
    }
    Ok(DataSnapshot { serving, interferers })
}

/// SINR after refinement: interferers transmit on uniformly drawn codebook
/// beams, and every term carries the array gain M_BS·M_UE. Noise is
/// Δ^d N₀ / p_BS^d.
pub fn data_sinr<R: Rng>(
    snapshot: &DataSnapshot,
    refined: &RefinedBeams,
    bs_codebook: &Codebook,
    params: &SystemParams,
    rng: &mut R,
) -> Result<f64> {
    let array_gain = (params.m_bs * params.m_ue) as f64;
    let signal = array_gain * refined.gain;
    let mut interference = 0.0;
    for ch in &snapshot.interferers {
        let v = &bs_codebook.beams()[rng.random_range(0..bs_codebook.len())];
        interference += array_gain * effective_gain(&refined.w, ch, v)?;
    }
    let noise = thermal_noise_watts(params.bw_data, params.noise_figure_db) / params.p_bs_data;
    Ok(signal / (interference + noise))
}

/// Shannon rate Δ·log₂(1 + SINR) in bit/s.
pub fn achievable_rate(sinr: f64, bandwidth: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(invalid("sinr", "must be nonnegative"));
    }
    Ok(bandwidth * sinr.ln_1p() / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert_eq!(achievable_rate(0.0, 1e8).unwrap(), 0.0);
        assert!((achievable_rate(1.0, 1e8).unwrap() - 1e8).abs() < 1e-6);
        assert!((achievable_rate(3.0, 1e8).unwrap() - 2e8).abs() < 1e-6);
        assert!(achievable_rate(-1.0, 1e8).is_err());
    }
}
