//! Closed-form detection probabilities evaluated by numerical quadrature.
//!
//! Three network models are covered:
//!
//! * [`los`]: sectorized beams without sidelobes, NLOS links removed.
//! * [`nlos`]: the same with NLOS links at exponent α_N.
//! * [`sidelobe`]: sidelobe gain ε > 0, where a BS may also be detected
//!   through its sidelobe in the slots it points elsewhere.
//!
//! Every probability comes back as an [`AnalyticResult`] carrying the
//! propagated quadrature error.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use crate::channel::{noise_power_normalized, NoiseNormalization, Plane};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::quadrature::{integrate_semi_infinite, Integral};

pub mod los;
pub mod nlos;
pub mod sidelobe;

pub use los::{failure_prob_los, laplace_los, p_success_los};
pub use nlos::{failure_prob_nlos, laplace_nlos, p_success_nlos};
pub use sidelobe::{
    failure_prob_sidelobe, laplace_two_tier, p_joint_sidelobe, p_success_mainlobe, p_success_sidelobe, q_selection,
    q_selection_with, SidelobeOptions, MAX_EXACT_SELECTION,
};

pub use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    /// Part of the value comes from a Monte Carlo estimator rather than
    /// quadrature; `error_estimate` then includes its standard error.
    pub estimator_backed: bool,
}

impl AnalyticResult {
    pub(crate) fn exact(value: f64) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            evaluations: 0,
            estimator_backed: false,
        }
    }

    /// Check that a probability lies in [0, 1] up to its error, clamping
    /// only inside that band.
    pub(crate) fn probability(mut self) -> Result<Self> {
        let slack = self.error_estimate + 8.0 * f64::EPSILON;
        if self.value < -slack || self.value > 1.0 + slack || !self.value.is_finite() {
            return Err(Error::ProbabilityOutOfRange {
                value: self.value,
                error: self.error_estimate,
            });
        }
        self.value = self.value.clamp(0.0, 1.0);
        Ok(self)
    }
}

/// 1 − (1 − p)^n with its propagated error.
pub(crate) fn complement_power(p: AnalyticResult, n: usize) -> Result<AnalyticResult> {
    let q = 1.0 - p.value;
    let value = if n == 0 { 1.0 } else { q.powi(n as i32) };
    let slope = if n == 0 { 0.0 } else { n as f64 * q.powi(n as i32 - 1) };
    AnalyticResult {
        value,
        error_estimate: slope * p.error_estimate,
        ..p
    }
    .probability()
}

/// Normalized control-plane noise W / (p G_UE (c/4πf_c)^α_L), without the
/// BS gain. Divide by the serving BS gain to get the single-link form.
pub fn normalized_noise(params: &SystemParams) -> f64 {
    noise_power_normalized(
        params,
        Plane::Control,
        NoiseNormalization {
            path_normalized: true,
            include_bs_gain: false,
        },
    )
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha <= 2.0 {
        return Err(Error::Divergent(format!(
            "interference integral diverges for path-loss exponent {alpha} ≤ 2"
        )));
    }
    Ok(())
}

/// ∫₀^∞ x e^{−βv} v / (v^α + x) dv, the interference integral of a PPP tier
/// with Rayleigh fading and LOS probability e^{−βv}.
pub(crate) fn tier_integral(
    x: f64,
    alpha: f64,
    beta: f64,
    spec: &QuadratureSpec,
    evals: &Cell<usize>,
) -> Result<Integral> {
    if x <= 0.0 {
        return Ok(Integral::default());
    }
    let inv_x = 1.0 / x;
    let knee = x.powf(1.0 / alpha);
    let scale = if beta > 0.0 { knee.min(1.0 / beta) } else { knee };
    let r = integrate_semi_infinite(
        |v: f64| (-beta * v).exp() * v / (1.0 + v.powf(alpha) * inv_x),
        0.0,
        scale,
        spec,
    )?;
    evals.set(evals.get() + r.evaluations);
    Ok(r)
}

/// First panel length for an outer r-integral: the shorter of the blockage
/// length 1/β and the distance where the noise term e^{−c r^α} decays.
pub(crate) fn outer_scale(beta: f64, noise_coeff: f64, alpha: f64) -> f64 {
    let noise_len = if noise_coeff > 0.0 {
        noise_coeff.powf(-1.0 / alpha)
    } else {
        f64::INFINITY
    };
    let block_len = if beta > 0.0 { 1.0 / beta } else { f64::INFINITY };
    let s = noise_len.min(block_len);
    if s.is_finite() {
        s
    } else {
        100.0
    }
}

/// Runs an outer integral whose integrand may fail; the first inner error
/// aborts the result.
pub(crate) struct Nested {
    pub evals: Cell<usize>,
    failure: RefCell<Option<Error>>,
}

impl Nested {
    pub fn new() -> Self {
        Self {
            evals: Cell::new(0),
            failure: RefCell::new(None),
        }
    }

    /// Unwrap an inner result, remembering the first failure.
    pub fn take(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    pub fn finish(self, outer: Result<Integral>) -> Result<Integral> {
        if let Some(e) = self.failure.into_inner() {
            return Err(e);
        }
        let mut r = outer?;
        r.evaluations += self.evals.get();
        Ok(r)
    }
}

/// Density factor 2π/(N_BS N_UE) of BSs whose beam and the UE's beam both
/// cover the link.
pub(crate) fn aligned_fraction(params: &SystemParams) -> f64 {
    2.0 * PI / (params.n_bs as f64 * params.n_ue as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_integral_closed_form_without_blockage() {
        // ∫₀^∞ x v/(v^α + x) dv = x^{2/α} (π/α)/sin(2π/α)
        let spec = QuadratureSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            ..Default::default()
        };
        let evals = Cell::new(0);
        for alpha in [2.5, 3.0, 4.0] {
            for x in [1e-6, 1.0, 3e4, 1e9] {
                let got = tier_integral(x, alpha, 0.0, &spec, &evals).unwrap().value;
                let exact = x.powf(2.0 / alpha) * (PI / alpha) / (2.0 * PI / alpha).sin();
                assert!((got / exact - 1.0).abs() < 1e-9, "α={alpha} x={x}: {got} {exact}");
            }
        }
        assert!(evals.get() > 0);
    }

    #[test]
    fn probability_check() {
        let ok = AnalyticResult {
            value: 1.0 + 1e-9,
            error_estimate: 1e-8,
            evaluations: 1,
            estimator_backed: false,
        };
        assert_eq!(ok.probability().unwrap().value, 1.0);
        let bad = AnalyticResult { value: 1.1, ..ok };
        assert!(matches!(bad.probability(), Err(Error::ProbabilityOutOfRange { .. })));
    }
}
