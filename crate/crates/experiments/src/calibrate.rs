//! Fitting the sidelobe gain ε to points of a sidelobe-model failure curve.

use mmia::analytic::{failure_prob_sidelobe, QuadratureSpec, SidelobeOptions};
use mmia::SystemParams;
use rayon::prelude::*;
use serde::Serialize;

/// (λ, P_f) on the sidelobe-model density curve at the default settings.
pub const DEFAULT_ANCHORS: [(f64, f64); 2] = [(1e-4, 0.60585), (1e-3, 0.00559)];

/// The full sidelobe-model density curve the anchors are taken from:
/// 21 log-spaced densities from 1e-5 to 1e-3.
pub const SIDELOBE_CURVE: [f64; 21] = [
    0.950778590252769,
    0.938446246109506,
    0.923155768203573,
    0.904271365346839,
    0.881063131553263,
    0.852717341490409,
    0.818365107650646,
    0.777138187647838,
    0.728262654652784,
    0.671200689414881,
    0.605845579065448,
    0.532761608121488,
    0.453435210149306,
    0.370466027989758,
    0.287585108003243,
    0.209367505112146,
    0.140550968932013,
    0.0850201642974136,
    0.0447517182819575,
    0.0192070555166395,
    0.0055885814813564,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationStatus {
    Converged,
    /// The best fit leaves an RMS residual above the threshold.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub epsilon: f64,
    pub rms_residual: f64,
    /// Model value minus target at each anchor.
    pub residuals: Vec<f64>,
    pub evaluations: usize,
    pub status: CalibrationStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationError {
    TooFewAnchors(usize),
    BadAnchor { lambda: f64, p_f: f64 },
    Model(mmia::Error),
}

impl std::fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CalibrationError::TooFewAnchors(n) => write!(f, "calibration needs at least two anchors, got {n}"),
            CalibrationError::BadAnchor { lambda, p_f } => {
                write!(f, "anchor ({lambda}, {p_f}) needs λ > 0 and P_f in [0, 1]")
            }
            CalibrationError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CalibrationError {}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub max_residual: f64,
    /// Width of the final ε bracket.
    pub tolerance: f64,
    pub coarse_points: usize,
    pub spec: QuadratureSpec,
    pub sidelobe: SidelobeOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            max_residual: 0.01,
            tolerance: 1e-5,
            coarse_points: 16,
            spec: QuadratureSpec::default(),
            sidelobe: SidelobeOptions::default(),
        }
    }
}

/// Sidelobe-model failure probability at each anchor density.
pub fn model_curve(
    params: &SystemParams,
    epsilon: f64,
    lambdas: &[f64],
    options: &CalibrationOptions,
) -> mmia::Result<Vec<f64>> {
    lambdas
        .par_iter()
        .map(|&l| {
            let p = SystemParams {
                epsilon,
                ..params.clone().with_lambda(l)
            };
            failure_prob_sidelobe(&p, p.n_c, &options.spec, &options.sidelobe).map(|r| r.value)
        })
        .collect()
}

pub fn rms(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Least-squares ε ∈ (0, 1) for the anchors: a coarse scan brackets the
/// minimum, golden-section search refines it.
pub fn calibrate_epsilon(
    anchors: &[(f64, f64)],
    params: &SystemParams,
    options: &CalibrationOptions,
) -> Result<CalibrationResult, CalibrationError> {
    if anchors.len() < 2 {
        return Err(CalibrationError::TooFewAnchors(anchors.len()));
    }
    for &(lambda, p_f) in anchors {
        if !(lambda > 0.0 && (0.0..=1.0).contains(&p_f)) {
            return Err(CalibrationError::BadAnchor { lambda, p_f });
        }
    }
    let lambdas: Vec<f64> = anchors.iter().map(|a| a.0).collect();
    let mut evaluations = 0;
    let mut cost = |eps: f64| -> f64 {
        evaluations += 1;
        match model_curve(params, eps, &lambdas, options) {
            Ok(v) => v.iter().zip(anchors).map(|(m, a)| (m - a.1).powi(2)).sum(),
            Err(_) => f64::INFINITY,
        }
    };

    let n = options.coarse_points.max(3);
    let lo = 1e-4;
    let hi = 0.999;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let costs: Vec<f64> = grid.iter().map(|&e| cost(e)).collect();
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > options.tolerance {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = cost(d);
        }
    }
    let epsilon = 0.5 * (a + b);
    let values = model_curve(params, epsilon, &lambdas, options).map_err(CalibrationError::Model)?;
    let residuals: Vec<f64> = values.iter().zip(anchors).map(|(m, a)| m - a.1).collect();
    let rms_residual = rms(&residuals);
    Ok(CalibrationResult {
        epsilon,
        rms_residual,
        residuals,
        evaluations: evaluations + 1,
        status: if rms_residual <= options.max_residual {
            CalibrationStatus::Converged
        } else {
            CalibrationStatus::Failed
        },
    })
}
