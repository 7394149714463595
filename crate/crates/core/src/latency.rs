//! Expected initial-access and packet latency, and the beam-count
//! optimizer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{failure_prob_los, failure_prob_nlos, failure_prob_sidelobe, QuadratureSpec, SidelobeOptions};
use crate::error::{invalid, Result};
use crate::params::{FrameTiming, SystemParams};
use crate::sim::{estimate_failure, SchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub p_f: f64,
    pub e_ia_ms: f64,
    pub e_total_ms: Option<f64>,
    pub rate_bps: Option<f64>,
    pub frame: FrameTiming,
    pub packet_bits: Option<f64>,
}

impl LatencyReport {
    pub fn ia_only(p_f: f64, frame: FrameTiming) -> Result<Self> {
        Ok(Self {
            p_f,
            e_ia_ms: expected_ia_latency(p_f, &frame)?,
            e_total_ms: None,
            rate_bps: None,
            frame,
            packet_bits: None,
        })
    }

    pub fn with_packet(p_f: f64, rate_bps: f64, packet_bits: f64, frame: FrameTiming) -> Result<Self> {
        Ok(Self {
            p_f,
            e_ia_ms: expected_ia_latency(p_f, &frame)?,
            e_total_ms: Some(expected_total_latency(p_f, rate_bps, packet_bits, &frame)?),
            rate_bps: Some(rate_bps),
            frame,
            packet_bits: Some(packet_bits),
        })
    }
}

fn check_pf(p_f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_f) {
        return Err(invalid("p_f", "must lie in [0, 1]"));
    }
    Ok(())
}

/// Frames lost to failed searches, in ms. Infinite at p_f = 1.
fn retry_time(p_f: f64, frame: &FrameTiming) -> f64 {
    if p_f >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 / (1.0 - p_f) - 1.0) * frame.t_frame
    }
}

/// E[D_I] = (1/(1 − p_f) − 1) T_f + T_cs + T_ra, in ms.
pub fn expected_ia_latency(p_f: f64, frame: &FrameTiming) -> Result<f64> {
    check_pf(p_f)?;
    Ok(retry_time(p_f, frame) + frame.t_cs + frame.t_ra)
}

/// E[D_T]: IA retries, one control period per frame the packet spans, and
/// the airtime L/R_T, in ms.
pub fn expected_total_latency(p_f: f64, rate_bps: f64, packet_bits: f64, frame: &FrameTiming) -> Result<f64> {
    check_pf(p_f)?;
    frame.validate()?;
    if !(rate_bps > 0.0) {
        return Err(invalid("rate_bps", "must be positive"));
    }
    if !(packet_bits > 0.0) {
        return Err(invalid("packet_bits", "must be positive"));
    }
    let bits_per_ms = rate_bps * 1e-3;
    let airtime = packet_bits / bits_per_ms;
    let frames = (airtime / frame.data_window()).ceil().max(1.0);
    Ok(retry_time(p_f, frame) + frames * (frame.t_cs + frame.t_ra) + airtime)
}

/// How a sample of data rates enters E[D_T].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// The mean rate is plugged into the latency formula.
    #[default]
    MeanRate,
    /// The latency is averaged over the rate sample.
    MeanLatency,
}

impl RateConvention {
    pub fn name(self) -> &'static str {
        match self {
            RateConvention::MeanRate => "mean_rate",
            RateConvention::MeanLatency => "mean_latency",
        }
    }
}

/// E[D_T] from a sample of per-trial rates under `convention`.
pub fn total_latency_from_rates(
    p_f: f64,
    rates_bps: &[f64],
    packet_bits: f64,
    frame: &FrameTiming,
    convention: RateConvention,
) -> Result<f64> {
    if rates_bps.is_empty() {
        return Err(invalid("rates_bps", "must not be empty"));
    }
    let n = rates_bps.len() as f64;
    match convention {
        RateConvention::MeanRate => expected_total_latency(p_f, rates_bps.iter().sum::<f64>() / n, packet_bits, frame),
        RateConvention::MeanLatency => {
            let mut sum = 0.0;
            for &r in rates_bps {
                sum += expected_total_latency(p_f, r, packet_bits, frame)?;
            }
            Ok(sum / n)
        }
    }
}

/// Source of failure probabilities for the optimizer.
pub trait FailureEvaluator: Sync {
    fn failure(&self, params: &SystemParams, n_c: usize) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    Los,
    Nlos,
    Sidelobe,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyticEvaluator {
    pub model: AnalyticModel,
    pub spec: QuadratureSpec,
    pub sidelobe: SidelobeOptions,
}

impl AnalyticEvaluator {
    pub fn new(model: AnalyticModel) -> Self {
        Self {
            model,
            spec: QuadratureSpec::default(),
            sidelobe: SidelobeOptions::default(),
        }
    }
}

impl FailureEvaluator for AnalyticEvaluator {
    fn failure(&self, params: &SystemParams, n_c: usize) -> Result<f64> {
        let r = match self.model {
            AnalyticModel::Los => failure_prob_los(params, n_c, &self.spec)?,
            AnalyticModel::Nlos => failure_prob_nlos(params, n_c, &self.spec)?,
            AnalyticModel::Sidelobe => failure_prob_sidelobe(params, n_c, &self.spec, &self.sidelobe)?,
        };
        Ok(r.value)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimEvaluator {
    pub config: SchemeConfig,
    pub trials: u64,
    pub seed: u64,
}

impl FailureEvaluator for SimEvaluator {
    fn failure(&self, params: &SystemParams, n_c: usize) -> Result<f64> {
        let p = SystemParams { n_c, ..params.clone() };
        Ok(estimate_failure(&self.config, &p, self.trials, self.seed)?.estimate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n_bs: usize,
    pub report: LatencyReport,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamwidthOptimum {
    pub points: Vec<GridPoint>,
    /// Index into `points` of the feasible minimizer of E[D_I].
    pub best: Option<usize>,
    /// Smallest failure probability on the grid, reported when nothing is
    /// feasible.
    pub smallest_p_f: f64,
}

impl BeamwidthOptimum {
    pub fn best_point(&self) -> Option<&GridPoint> {
        self.best.map(|i| &self.points[i])
    }

    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }

    /// E[D_I] decreases and then increases along the grid.
    pub fn is_unimodal(&self) -> bool {
        is_unimodal(&self.points.iter().map(|p| p.report.e_ia_ms).collect::<Vec<_>>())
    }
}

/// Nonincreasing up to the minimum and nondecreasing after it.
pub fn is_unimodal(values: &[f64]) -> bool {
    let Some(min_at) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return true;
    };
    values[..=min_at].windows(2).all(|w| w[1] <= w[0]) && values[min_at..].windows(2).all(|w| w[1] >= w[0])
}

/// Scan N_BS over `n_bs_grid` with a budget of `k_cycles` scan cycles and
/// an SS burst sized to one cycle, minimizing E[D_I] subject to
/// P_f ≤ `p_f_max`. The array size follows the beam count.
pub fn optimize_beamwidth(
    params: &SystemParams,
    k_cycles: usize,
    p_f_max: f64,
    n_bs_grid: &[usize],
    evaluator: &dyn FailureEvaluator,
) -> Result<BeamwidthOptimum> {
    if k_cycles == 0 {
        return Err(invalid("k_cycles", "must be at least 1"));
    }
    if n_bs_grid.is_empty() || n_bs_grid.contains(&0) {
        return Err(invalid("n_bs_range", "must be nonempty with positive entries"));
    }
    check_pf(p_f_max)?;
    let points = n_bs_grid
        .par_iter()
        .map(|&n_bs| {
            let mut p = params.clone().with_beams(n_bs, params.n_ue);
            p.m_bs = n_bs;
            p.n_c = k_cycles * n_bs;
            let p_f = evaluator.failure(&p, p.n_c)?;
            let report = LatencyReport::ia_only(p_f, FrameTiming::adapted_to_scan_cycle(n_bs))?;
            Ok(GridPoint {
                n_bs,
                report,
                feasible: p_f <= p_f_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.feasible)
        .min_by(|a, b| a.1.report.e_ia_ms.total_cmp(&b.1.report.e_ia_ms))
        .map(|(i, _)| i);
    let smallest_p_f = points.iter().map(|p| p.report.p_f).fold(f64::INFINITY, f64::min);
    Ok(BeamwidthOptimum {
        points,
        best,
        smallest_p_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ia_latency_examples() {
        let f = FrameTiming::default();
        assert!((expected_ia_latency(0.0, &f).unwrap() - 2.5).abs() < 1e-12);
        assert!(expected_ia_latency(1.0, &f).unwrap().is_infinite());
        assert!(expected_ia_latency(1.5, &f).is_err());
    }

    #[test]
    fn unimodal_detection() {
        assert!(is_unimodal(&[3.0, 2.0, 1.0, 1.0, 4.0]));
        assert!(is_unimodal(&[1.0, 2.0]));
        assert!(!is_unimodal(&[3.0, 1.0, 2.0, 1.5]));
        assert!(is_unimodal(&[]));
    }
}
