//! Sampled network topologies: PPP base stations, per-slot blockage, fading
//! and random scan order.
//!
//! Only links that carry power are stored. With NLOS links disabled a blocked
//! BS contributes nothing in that slot, so the sampler skips directly from
//! one LOS slot to the next with geometric jumps and never materializes the
//! blocked ones. BSs so far away that the expected number of LOS events
//! beyond them is negligible are not generated at all.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::antenna::sector_index;
use crate::channel::{noise_power_normalized, path_loss_exp, NoiseNormalization, Plane};
use crate::error::{invalid, Error, Result};
use crate::params::{BlockageMode, SystemParams};

/// Expected number of LOS (BS, slot) events allowed beyond the truncation
/// radius.
const LOS_TAIL_EVENTS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSite {
    /// Distance to the UE at the origin, m.
    pub r: f64,
    /// Azimuth of the BS as seen from the UE, rad.
    pub psi: f64,
}

impl BsSite {
    /// Direction from the BS toward the UE.
    pub fn bearing_to_ue(&self) -> f64 {
        self.psi + PI
    }
}

/// One BS transmitting in one slot with nonzero path gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub bs: u32,
    pub los: bool,
    /// |h|², unit-mean exponential.
    pub fading: f64,
    /// ℓ(r) for the link's LOS state.
    pub path_gain: f64,
    /// Beam index from the BS's random scan order in this cycle.
    pub bs_beam: u16,
    /// Per-BS offset into deterministic sweeps (uniform in [0, n_bs)).
    pub sweep_offset: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingMode {
    /// Fresh |h|² in every slot.
    PerSlot,
    /// One |h|² per BS for the whole realization.
    PerSweep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub fading: FadingMode,
    /// Keep NLOS links when α_N is finite.
    pub include_nlos: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            fading: FadingMode::PerSlot,
            include_nlos: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub bs: Vec<BsSite>,
    /// Active links of each slot, in BS order.
    pub slots: Vec<Vec<Link>>,
    /// UE beam index for each scan cycle of `n_bs` slots.
    pub ue_boresight: Vec<usize>,
    pub n_bs: usize,
    /// Radius inside which BSs were generated.
    pub sampled_radius: f64,
    pub seed: u64,
}

impl NetworkRealization {
    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn cycle_of(&self, slot: usize) -> usize {
        slot / self.n_bs
    }

    pub fn link(&self, bs: usize, slot: usize) -> Option<&Link> {
        let links = &self.slots[slot];
        links
            .binary_search_by_key(&(bs as u32), |l| l.bs)
            .ok()
            .map(|i| &links[i])
    }

    /// LOS state of BS `bs` in `slot`.
    pub fn is_los(&self, bs: usize, slot: usize) -> bool {
        self.link(bs, slot).is_some_and(|l| l.los)
    }
}

/// Radius beyond which the expected number of LOS events over `n_slots`
/// slots is below `LOS_TAIL_EVENTS`, capped at `region_radius`.
///
/// The count beyond ρ is n λ 2π ∫_ρ^∞ e^{−βr} r dr = n λ 2π e^{−βρ}(ρ/β + 1/β²).
pub fn los_truncation_radius(params: &SystemParams, n_slots: usize) -> f64 {
    let big_r = params.region_radius;
    let beta = params.beta;
    if beta <= 0.0 {
        return big_r;
    }
    let tail = |rho: f64| {
        n_slots as f64 * params.lambda_bs * 2.0 * PI * (-beta * rho).exp() * (rho / beta + 1.0 / (beta * beta))
    };
    if tail(big_r) >= LOS_TAIL_EVENTS {
        return big_r;
    }
    let (mut lo, mut hi) = (0.0, big_r);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) < LOS_TAIL_EVENTS {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Sample a realization with default options (per-slot fading, LOS links only).
pub fn sample_network(params: &SystemParams, n_slots: usize, seed: u64) -> Result<NetworkRealization> {
    sample_network_with(params, n_slots, seed, SamplingOptions::default())
}

pub fn sample_network_with(
    params: &SystemParams,
    n_slots: usize,
    seed: u64,
    options: SamplingOptions,
) -> Result<NetworkRealization> {
    if !(params.region_radius > 0.0 && params.region_radius.is_finite()) {
        return Err(invalid("region_radius", "must be positive and finite"));
    }
    if n_slots == 0 {
        return Err(invalid("n_slots", "must be at least 1"));
    }
    if params.n_bs == 0 || params.n_bs > u16::MAX as usize {
        return Err(invalid("n_bs", "must lie in 1..=65535"));
    }
    let expected = params.expected_bs_count();
    if expected > params.max_expected_bs as f64 {
        return Err(Error::TooManyBaseStations {
            expected,
            cap: params.max_expected_bs,
        });
    }
    let nlos = options.include_nlos && params.alpha_nlos.is_finite();
    let radius = if nlos {
        params.region_radius
    } else {
        los_truncation_radius(params, n_slots)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = params.lambda_bs * PI * radius * radius;
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).map_err(|e| invalid("lambda_bs", e.to_string()))?;
        let draw: f64 = poisson.sample(&mut rng);
        draw as usize
    } else {
        0
    };

    let n_bs = params.n_bs;
    let n_cycles = n_slots.div_ceil(n_bs);
    let ue_boresight = (0..n_cycles).map(|_| rng.random_range(0..params.n_ue)).collect();

    let r0 = params.reference_distance();
    let mut bs = Vec::with_capacity(count);
    let mut slots: Vec<Vec<Link>> = vec![Vec::new(); n_slots];
    let mut active: Vec<(usize, bool)> = Vec::new();
    let mut cycles: Vec<(usize, bool)> = Vec::new();
    let mut perm: Vec<u16> = (0..n_bs as u16).collect();

    for idx in 0..count {
        let r = radius * rng.random::<f64>().sqrt();
        let psi = 2.0 * PI * rng.random::<f64>();
        bs.push(BsSite { r, psi });

        let p_los = (-params.beta * r).exp();
        active.clear();
        match params.blockage {
            BlockageMode::Frozen => {
                let los = rng.random::<f64>() < p_los;
                if los || nlos {
                    active.extend((0..n_slots).map(|t| (t, los)));
                }
            }
            BlockageMode::PerSlot if nlos => {
                active.extend((0..n_slots).map(|t| (t, rng.random::<f64>() < p_los)));
            }
            BlockageMode::PerSlot => los_slots(&mut rng, p_los, n_slots, &mut active),
            BlockageMode::PerCycle if nlos => {
                for c in 0..n_cycles {
                    let los = rng.random::<f64>() < p_los;
                    active.extend((c * n_bs..((c + 1) * n_bs).min(n_slots)).map(|t| (t, los)));
                }
            }
            BlockageMode::PerCycle => {
                los_slots(&mut rng, p_los, n_cycles, &mut cycles);
                for &(c, _) in &cycles {
                    active.extend((c * n_bs..((c + 1) * n_bs).min(n_slots)).map(|t| (t, true)));
                }
                cycles.clear();
            }
        }
        if active.is_empty() {
            continue;
        }

        let sweep_offset = rng.random_range(0..n_bs) as u16;
        let frozen_fading: f64 = match options.fading {
            FadingMode::PerSweep => Exp1.sample(&mut rng),
            FadingMode::PerSlot => 0.0,
        };
        let gain_los = path_loss_exp(r, params.alpha_los, r0);
        let gain_nlos = path_loss_exp(r, params.alpha_nlos, r0);
        let mut cycle = usize::MAX;
        let mut used = 0;
        for &(t, los) in &active {
            // Partial Fisher–Yates: distinct beams within a cycle.
            if t / n_bs != cycle {
                cycle = t / n_bs;
                used = 0;
            }
            let j = used + rng.random_range(0..n_bs - used);
            perm.swap(used, j);
            let bs_beam = perm[used];
            used += 1;
            let fading = match options.fading {
                FadingMode::PerSlot => Exp1.sample(&mut rng),
                FadingMode::PerSweep => frozen_fading,
            };
            slots[t].push(Link {
                bs: idx as u32,
                los,
                fading,
                path_gain: if los { gain_los } else { gain_nlos },
                bs_beam,
                sweep_offset,
            });
        }
    }

    Ok(NetworkRealization {
        bs,
        slots,
        ue_boresight,
        n_bs,
        sampled_radius: radius,
        seed,
    })
}

/// Indices of the LOS slots of one BS, each slot LOS with probability `p`.
fn los_slots<R: Rng>(rng: &mut R, p: f64, n_slots: usize, out: &mut Vec<(usize, bool)>) {
    if p >= 1.0 {
        out.extend((0..n_slots).map(|t| (t, true)));
        return;
    }
    if p <= 0.0 {
        return;
    }
    let log_q = (-p).ln_1p();
    let mut t = 0usize;
    loop {
        let u: f64 = rng.random();
        // Number of blocked slots before the next LOS one.
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !(skip < (n_slots - t) as f64) {
            return;
        }
        t += skip as usize;
        out.push((t, true));
        t += 1;
        if t >= n_slots {
            return;
        }
    }
}

/// SINR of one BS as seen by the UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSinr {
    pub bs: usize,
    pub sinr: f64,
}

/// Per-BS SINR in `slot` under the sectorized pattern with the realization's
/// random scan order.
///
/// The UE has no sidelobes, so a BS outside the UE's current sector delivers
/// no power at all: it is neither a candidate nor an interferer. Only BSs
/// that deliver nonzero power are listed; every other BS has SINR 0.
pub fn slot_sinr_sbp(realization: &NetworkRealization, slot: usize, params: &SystemParams) -> Result<Vec<BsSinr>> {
    if slot >= realization.n_slots() {
        return Err(invalid("slot", "outside the sampled horizon"));
    }
    let pattern = params.bs_pattern();
    let ue_beam = realization.ue_boresight[realization.cycle_of(slot)];
    let ue_gain = params.ue_gain();
    let noise = noise_power_normalized(params, Plane::Control, NoiseNormalization::RAW) * params.ue_gain();
    let mut powers = Vec::new();
    for link in &realization.slots[slot] {
        let site = realization.bs[link.bs as usize];
        if sector_index(site.psi, params.n_ue) != ue_beam {
            continue;
        }
        let aligned = sector_index(site.bearing_to_ue(), params.n_bs) == link.bs_beam as usize;
        let g_bs = if aligned {
            pattern.mainlobe_gain()
        } else {
            pattern.epsilon()
        };
        let p = g_bs * ue_gain * link.fading * link.path_gain;
        if p > 0.0 {
            powers.push((link.bs as usize, p));
        }
    }
    let total: f64 = powers.iter().map(|&(_, p)| p).sum();
    Ok(powers
        .into_iter()
        .map(|(bs, p)| BsSinr {
            bs,
            sinr: p / ((total - p).max(0.0) + noise),
        })
        .collect())
}
