//! Monte Carlo cell search: random beamforming, exhaustive search and
//! two-stage iterative search over sampled networks.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{array_factor_sines as ula_factor, sector_index};
use crate::channel::thermal_noise_watts;
use crate::dataplane::{achievable_rate, data_sinr, data_snapshot, refine_beams, DataCodebooks};
use crate::error::{invalid, Result};
use crate::network::{sample_network_with, BsSite, FadingMode, Link, NetworkRealization, SamplingOptions};
use crate::params::{BlockageMode, SystemParams};

/// z-score of a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RandomBeamforming,
    ExhaustiveSearch,
    IterativeSearch,
}

impl Scheme {
    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::RandomBeamforming => "RB",
            Scheme::ExhaustiveSearch => "ES",
            Scheme::IterativeSearch => "IS",
        }
    }

    /// SS blocks per burst so that one scan cycle fits in a frame.
    pub fn default_ss_blocks(self) -> usize {
        match self {
            Scheme::RandomBeamforming => 16,
            Scheme::ExhaustiveSearch => 64,
            Scheme::IterativeSearch => 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaModel {
    Sbp,
    Ula,
}

/// Which detections count in the second stage of iterative search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Rule {
    /// Only the BS found in stage 1, refining its own beam.
    DetectedBs,
    /// Any BS heard above the threshold through the fixed UE beam.
    AnyBs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub antenna: AntennaModel,
    pub n_ss_blocks: usize,
    /// Width of the stage-1 BS beams of iterative search.
    pub stage1_beamwidth: f64,
    pub stage2_rule: Stage2Rule,
    /// Re-draw fading every slot rather than once per sweep.
    pub fading_per_slot: bool,
    /// Keep NLOS links (needs a finite α_N).
    pub include_nlos: bool,
    pub codebook: CodebookSpacing,
    /// Overrides `SystemParams::blockage` when set.
    pub blockage: Option<BlockageMode>,
}

/// Placement of ULA codebook boresights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookSpacing {
    /// Boresights b·2π/n.
    Angle,
    /// Orthogonal beams with sin θ_b = −1 + (2b + 1)/n.
    Sine,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, antenna: AntennaModel) -> Self {
        Self {
            scheme,
            antenna,
            n_ss_blocks: scheme.default_ss_blocks(),
            stage1_beamwidth: PI / 2.0,
            stage2_rule: Stage2Rule::AnyBs,
            fading_per_slot: true,
            include_nlos: false,
            codebook: CodebookSpacing::Angle,
            blockage: None,
        }
    }

    /// Fading drawn once per trial and blockage held for a scan cycle.
    pub fn cycle_coherent(scheme: Scheme, antenna: AntennaModel) -> Self {
        Self {
            fading_per_slot: false,
            blockage: Some(BlockageMode::PerCycle),
            ..Self::new(scheme, antenna)
        }
    }

    pub fn stage1_beams(&self) -> usize {
        (2.0 * PI / self.stage1_beamwidth).round().max(1.0) as usize
    }

    /// Slots of one search: N_c for random beamforming, N_BS N_UE for
    /// exhaustive search, stage-1 pairs plus N_BS for iterative search.
    pub fn slots(&self, params: &SystemParams) -> usize {
        match self.scheme {
            Scheme::RandomBeamforming => params.n_c,
            Scheme::ExhaustiveSearch => params.n_bs * params.n_ue,
            Scheme::IterativeSearch => self.stage1_beams() * params.n_ue + params.n_bs,
        }
    }

    fn sampling(&self) -> SamplingOptions {
        SamplingOptions {
            fading: if self.fading_per_slot {
                FadingMode::PerSlot
            } else {
                FadingMode::PerSweep
            },
            include_nlos: self.include_nlos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub success: bool,
    pub winning_slot: Option<usize>,
    pub winning_bs: Option<usize>,
    /// SINR at the winning slot, or the best SINR seen when detection failed.
    pub best_sinr: f64,
}

impl DetectionOutcome {
    fn failure(best_sinr: f64) -> Self {
        Self {
            success: false,
            winning_slot: None,
            winning_bs: None,
            best_sinr,
        }
    }
}

/// Beam pointed by a BS in one slot.
#[derive(Debug, Clone, Copy)]
enum BsBeam {
    Narrow(usize),
    /// Stage-1 wide beam of iterative search.
    Wide(usize),
}

/// Antenna gains for one model, with codebook sines precomputed.
struct Gains {
    model: AntennaModel,
    n_bs: usize,
    n_ue: usize,
    n_wide: usize,
    g_main: f64,
    g_wide: f64,
    epsilon: f64,
    ue_main: f64,
    m_bs: usize,
    m_ue: usize,
    wide_active: usize,
    sin_bs: Vec<f64>,
    sin_wide: Vec<f64>,
    sin_ue: Vec<f64>,
}

impl Gains {
    fn new(params: &SystemParams, config: &SchemeConfig) -> Self {
        let n_wide = config.stage1_beams();
        let sines = |n: usize, spacing: CodebookSpacing| -> Vec<f64> {
            (0..n)
                .map(|b| match spacing {
                    CodebookSpacing::Angle => (b as f64 * 2.0 * PI / n as f64).sin(),
                    CodebookSpacing::Sine => -1.0 + (2 * b + 1) as f64 / n as f64,
                })
                .collect()
        };
        let wide = crate::antenna::SectorPattern::from_beam_count(n_wide, params.epsilon);
        let wide_active = ((PI / config.stage1_beamwidth).round() as usize).clamp(1, params.m_bs);
        Self {
            model: config.antenna,
            n_bs: params.n_bs,
            n_ue: params.n_ue,
            n_wide,
            g_main: params.bs_pattern().mainlobe_gain(),
            g_wide: wide.mainlobe_gain(),
            epsilon: params.epsilon,
            ue_main: params.ue_gain(),
            m_bs: params.m_bs,
            m_ue: params.m_ue,
            wide_active,
            sin_bs: sines(params.n_bs, config.codebook),
            sin_wide: sines(n_wide, config.codebook),
            sin_ue: sines(params.n_ue, config.codebook),
        }
    }

    fn bs(&self, site: &BsSite, beam: BsBeam) -> f64 {
        let bearing = site.bearing_to_ue();
        match (self.model, beam) {
            (AntennaModel::Sbp, BsBeam::Narrow(b)) => {
                if sector_index(bearing, self.n_bs) == b {
                    self.g_main
                } else {
                    self.epsilon
                }
            }
            (AntennaModel::Sbp, BsBeam::Wide(b)) => {
                if sector_index(bearing, self.n_wide) == b {
                    self.g_wide
                } else {
                    self.epsilon
                }
            }
            (AntennaModel::Ula, BsBeam::Narrow(b)) => {
                self.m_bs as f64 * ula_factor(self.m_bs, self.m_bs, self.sin_bs[b], bearing.sin())
            }
            (AntennaModel::Ula, BsBeam::Wide(b)) => {
                self.m_bs as f64 * ula_factor(self.wide_active, self.m_bs, self.sin_wide[b], bearing.sin())
            }
        }
    }

    fn ue(&self, site: &BsSite, beam: usize) -> f64 {
        match self.model {
            AntennaModel::Sbp => {
                if sector_index(site.psi, self.n_ue) == beam {
                    self.ue_main
                } else {
                    0.0
                }
            }
            AntennaModel::Ula => self.m_ue as f64 * ula_factor(self.m_ue, self.m_ue, self.sin_ue[beam], site.psi.sin()),
        }
    }
}

/// Strongest BS in one slot and its SINR.
#[derive(Debug, Clone, Copy)]
struct SlotResult {
    bs: Option<usize>,
    sinr: f64,
}

fn evaluate_slot(
    links: &[Link],
    sites: &[BsSite],
    noise: f64,
    mut gain: impl FnMut(&Link, &BsSite) -> f64,
) -> SlotResult {
    let mut total = 0.0;
    let mut best = 0.0;
    let mut best_bs = None;
    for link in links {
        let site = &sites[link.bs as usize];
        let p = gain(link, site) * link.fading * link.path_gain;
        total += p;
        // Strict comparison keeps the lowest index on ties.
        if p > best {
            best = p;
            best_bs = Some(link.bs as usize);
        }
    }
    let sinr = if best_bs.is_some() {
        best / ((total - best).max(0.0) + noise)
    } else {
        0.0
    };
    SlotResult { bs: best_bs, sinr }
}

/// SINR of one given BS in a slot.
fn sinr_of(
    links: &[Link],
    sites: &[BsSite],
    noise: f64,
    target: usize,
    mut gain: impl FnMut(&Link, &BsSite) -> f64,
) -> f64 {
    let mut total = 0.0;
    let mut own = 0.0;
    for link in links {
        let p = gain(link, &sites[link.bs as usize]) * link.fading * link.path_gain;
        total += p;
        if link.bs as usize == target {
            own = p;
        }
    }
    own / ((total - own).max(0.0) + noise)
}

/// Noise relative to the control transmit power.
fn control_noise(params: &SystemParams) -> f64 {
    thermal_noise_watts(params.bw_control, params.noise_figure_db) / params.p_bs_control
}

/// Run one search of `config` on a given realization.
pub fn run_search(net: &NetworkRealization, params: &SystemParams, config: &SchemeConfig) -> DetectionOutcome {
    let gains = Gains::new(params, config);
    let noise = control_noise(params);
    let threshold = params.sinr_threshold;
    let n_bs = params.n_bs;
    let sites = &net.bs;
    let mut best_seen = 0.0f64;

    match config.scheme {
        Scheme::RandomBeamforming => {
            for (t, links) in net.slots.iter().enumerate() {
                let ue_beam = net.ue_boresight[t / n_bs];
                let r = evaluate_slot(links, sites, noise, |l, s| {
                    gains.bs(s, BsBeam::Narrow(l.bs_beam as usize)) * gains.ue(s, ue_beam)
                });
                if r.sinr >= threshold {
                    return DetectionOutcome {
                        success: true,
                        winning_slot: Some(t),
                        winning_bs: r.bs,
                        best_sinr: r.sinr,
                    };
                }
                best_seen = best_seen.max(r.sinr);
            }
            DetectionOutcome::failure(best_seen)
        }
        Scheme::ExhaustiveSearch => {
            // The whole sweep runs; the UE keeps the strongest pair.
            let mut best: Option<(usize, SlotResult)> = None;
            for (t, links) in net.slots.iter().enumerate() {
                let ue_beam = (t / n_bs) % params.n_ue;
                let r = evaluate_slot(links, sites, noise, |l, s| {
                    let b = (t + l.sweep_offset as usize) % n_bs;
                    gains.bs(s, BsBeam::Narrow(b)) * gains.ue(s, ue_beam)
                });
                if r.bs.is_some() && best.is_none_or(|(_, b)| r.sinr > b.sinr) {
                    best = Some((t, r));
                }
            }
            best_outcome(best, threshold)
        }
        Scheme::IterativeSearch => {
            let n_wide = gains.n_wide;
            let stage1 = n_wide * params.n_ue;
            // Stage 1: wide BS beams against every UE beam; the UE keeps the
            // strongest pilot.
            let mut best: Option<(usize, usize, f64)> = None;
            for t in 0..stage1.min(net.n_slots()) {
                let ue_beam = (t / n_wide) % params.n_ue;
                let r = evaluate_slot(&net.slots[t], sites, noise, |l, s| {
                    let b = (t + l.sweep_offset as usize) % n_wide;
                    gains.bs(s, BsBeam::Wide(b)) * gains.ue(s, ue_beam)
                });
                best_seen = best_seen.max(r.sinr);
                if let Some(bs) = r.bs {
                    if best.is_none_or(|(_, _, s)| r.sinr > s) {
                        best = Some((bs, ue_beam, r.sinr));
                    }
                }
            }
            let Some((bs1, ue_beam, sinr1)) = best else {
                return DetectionOutcome::failure(best_seen);
            };
            if sinr1 < threshold {
                return DetectionOutcome::failure(best_seen);
            }
            // Stage 2: narrow BS beams, UE beam fixed; the strongest pilot wins.
            let mut best: Option<(usize, SlotResult)> = None;
            for t in stage1..net.n_slots() {
                let tt = t - stage1;
                let gain = |l: &Link, s: &BsSite| {
                    let b = (tt + l.sweep_offset as usize) % n_bs;
                    gains.bs(s, BsBeam::Narrow(b)) * gains.ue(s, ue_beam)
                };
                let r = match config.stage2_rule {
                    Stage2Rule::DetectedBs => SlotResult {
                        bs: Some(bs1),
                        sinr: sinr_of(&net.slots[t], sites, noise, bs1, gain),
                    },
                    Stage2Rule::AnyBs => evaluate_slot(&net.slots[t], sites, noise, gain),
                };
                if r.bs.is_some() && best.is_none_or(|(_, b)| r.sinr > b.sinr) {
                    best = Some((t, r));
                }
            }
            best_outcome(best, threshold)
        }
    }
}

fn best_outcome(best: Option<(usize, SlotResult)>, threshold: f64) -> DetectionOutcome {
    match best {
        Some((t, r)) if r.sinr >= threshold => DetectionOutcome {
            success: true,
            winning_slot: Some(t),
            winning_bs: r.bs,
            best_sinr: r.sinr,
        },
        Some((_, r)) => DetectionOutcome::failure(r.sinr),
        None => DetectionOutcome::failure(0.0),
    }
}

fn sample_for(params: &SystemParams, config: &SchemeConfig, seed: u64) -> Result<NetworkRealization> {
    match config.blockage {
        Some(mode) if mode != params.blockage => {
            let p = SystemParams {
                blockage: mode,
                ..params.clone()
            };
            sample_network_with(&p, config.slots(params), seed, config.sampling())
        }
        _ => sample_network_with(params, config.slots(params), seed, config.sampling()),
    }
}

fn run_trial(params: &SystemParams, config: &SchemeConfig, seed: u64) -> Result<DetectionOutcome> {
    let net = sample_for(params, config, seed)?;
    Ok(run_search(&net, params, config))
}

/// Data-phase draws averaged into each trial's rate.
pub const DEFAULT_DATA_DRAWS: usize = 16;

/// A search followed, on success, by beam refinement and the ergodic rate
/// of the detected BS over `data_draws` fading and interference draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub outcome: DetectionOutcome,
    pub rate_bps: Option<f64>,
}

pub fn run_trial_with_rate(
    params: &SystemParams,
    config: &SchemeConfig,
    codebooks: &DataCodebooks,
    data_draws: usize,
    seed: u64,
) -> Result<TrialRecord> {
    if data_draws == 0 {
        return Err(invalid("data_draws", "must be at least 1"));
    }
    let net = sample_for(params, config, seed)?;
    let outcome = run_search(&net, params, config);
    let rate_bps = match (outcome.success, outcome.winning_bs) {
        (true, Some(bs)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let mut total = 0.0;
            for _ in 0..data_draws {
                let snapshot = data_snapshot(&net, bs, params, &mut rng)?;
                let refined = refine_beams(&snapshot.serving, &codebooks.bs, &codebooks.ue)?;
                let sinr = data_sinr(&snapshot, &refined, &codebooks.bs, params, &mut rng)?;
                total += achievable_rate(sinr, params.bw_data)?;
            }
            Some(total / data_draws as f64)
        }
        _ => None,
    };
    Ok(TrialRecord { outcome, rate_bps })
}

/// Failure estimate together with the data rates of the successful trials,
/// in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub failure: FailureEstimate,
    pub rates_bps: Vec<f64>,
}

impl RateEstimate {
    pub fn mean_rate(&self) -> Option<f64> {
        if self.rates_bps.is_empty() {
            None
        } else {
            Some(self.rates_bps.iter().sum::<f64>() / self.rates_bps.len() as f64)
        }
    }
}

pub fn estimate_failure_and_rate(
    config: &SchemeConfig,
    params: &SystemParams,
    codebooks: &DataCodebooks,
    data_draws: usize,
    n_trials: u64,
    base_seed: u64,
) -> Result<RateEstimate> {
    if n_trials < 1 {
        return Err(invalid("n_trials", "must be positive"));
    }
    let records = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial_with_rate(params, config, codebooks, data_draws, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    let failures = records.iter().filter(|r| !r.outcome.success).count() as u64;
    Ok(RateEstimate {
        failure: FailureEstimate::from_counts(failures, n_trials),
        rates_bps: records.iter().filter_map(|r| r.rate_bps).collect(),
    })
}

/// One random-beamforming search over `params.n_c` slots.
pub fn run_trial_rb(params: &SystemParams, antenna: AntennaModel, seed: u64) -> Result<DetectionOutcome> {
    run_trial(params, &SchemeConfig::new(Scheme::RandomBeamforming, antenna), seed)
}

/// One exhaustive sweep over all N_BS N_UE beam pairs.
pub fn run_trial_es(params: &SystemParams, antenna: AntennaModel, seed: u64) -> Result<DetectionOutcome> {
    run_trial(params, &SchemeConfig::new(Scheme::ExhaustiveSearch, antenna), seed)
}

/// One two-stage iterative search.
pub fn run_trial_is(params: &SystemParams, antenna: AntennaModel, seed: u64) -> Result<DetectionOutcome> {
    run_trial(params, &SchemeConfig::new(Scheme::IterativeSearch, antenna), seed)
}

/// Failure-probability estimate with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub failures: u64,
}

impl FailureEstimate {
    pub fn from_counts(failures: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = failures as f64 / n;
        let (lo, hi) = wilson_interval(p, n, Z_95);
        Self {
            estimate: p,
            ci_low: lo,
            ci_high: hi,
            trials,
            failures,
        }
    }

    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Binomial standard error at the estimate.
    pub fn std_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

pub fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if p <= 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p >= 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Failure fraction over trials seeded `base_seed + i`. Trials run on the
/// current rayon pool; the result does not depend on its size.
pub fn estimate_failure(
    config: &SchemeConfig,
    params: &SystemParams,
    n_trials: u64,
    base_seed: u64,
) -> Result<FailureEstimate> {
    estimate_with(n_trials, base_seed, |seed| {
        run_trial(params, config, seed).map(|o| o.success)
    })
}

/// Shared driver: counts trials whose closure reports `false`.
pub fn estimate_with(
    n_trials: u64,
    base_seed: u64,
    trial: impl Fn(u64) -> Result<bool> + Sync,
) -> Result<FailureEstimate> {
    if n_trials < 1 {
        return Err(invalid("n_trials", "must be positive"));
    }
    let failures = (0..n_trials)
        .into_par_iter()
        .map(|i| trial(base_seed.wrapping_add(i)).map(|ok| u64::from(!ok)))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(FailureEstimate::from_counts(failures, n_trials))
}
