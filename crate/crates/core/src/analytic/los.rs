//! LOS-only model: no sidelobes, blocked links carry no power.

use std::cell::Cell;

use super::{
    aligned_fraction, check_alpha, complement_power, normalized_noise, outer_scale, tier_integral, AnalyticResult,
    Nested,
};
use crate::error::{invalid, Result};
use crate::params::SystemParams;
use crate::quadrature::{integrate_semi_infinite, QuadratureSpec};

/// Laplace transform E[e^{−sI}] of the interference from BSs whose beams
/// meet the UE's beam, in the path-normalized form (signal h r^{−α}).
pub fn laplace_los(s: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    if !(s >= 0.0) {
        return Err(invalid("s", "must be non-negative"));
    }
    check_alpha(params.alpha_los)?;
    let density = aligned_fraction(params) * params.lambda_bs;
    let evals = Cell::new(0);
    let inner = QuadratureSpec {
        abs_tol: spec.abs_tol / density,
        ..*spec
    };
    let i = tier_integral(s, params.alpha_los, params.beta, &inner, &evals)?;
    let value = (-density * i.value).exp();
    Ok(AnalyticResult {
        value,
        error_estimate: value * density * i.error,
        evaluations: evals.get(),
        estimator_backed: false,
    })
}

/// Probability that some BS is detected in one slot.
///
/// Sidelobe gain and NLOS links are ignored: the serving gain is N_BS and
/// the interferers are the LOS BSs pointing at the UE.
pub fn p_success_los(params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    params.validate()?;
    spec.validate()?;
    check_alpha(params.alpha_los)?;
    let alpha = params.alpha_los;
    let beta = params.beta;
    let t = params.sinr_threshold;
    let density = aligned_fraction(params) * params.lambda_bs;
    let sigma2 = normalized_noise(params) / params.n_bs as f64;

    let outer = QuadratureSpec {
        abs_tol: spec.abs_tol / density,
        ..*spec
    };
    let inner_spec = spec.inner();
    let inner = QuadratureSpec {
        abs_tol: inner_spec.abs_tol / density,
        ..inner_spec
    };
    let nested = Nested::new();
    let integral = integrate_semi_infinite(
        |r: f64| {
            let s = t * r.powf(alpha);
            let attenuation = (-s * sigma2 - beta * r).exp();
            if attenuation == 0.0 {
                return 0.0;
            }
            let i = nested.take(tier_integral(s, alpha, beta, &inner, &nested.evals).map(|i| i.value));
            attenuation * (-density * i).exp() * r
        },
        0.0,
        outer_scale(beta, t * sigma2, alpha),
        &outer,
    );
    let integral = nested.finish(integral)?;
    AnalyticResult {
        value: density * integral.value,
        error_estimate: density * integral.error,
        evaluations: integral.evaluations,
        estimator_backed: false,
    }
    .probability()
}

/// P_f = (1 − P_s)^{n_c}.
pub fn failure_prob_los(params: &SystemParams, n_c: usize, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    if n_c == 0 {
        return Ok(AnalyticResult::exact(1.0));
    }
    complement_power(p_success_los(params, spec)?, n_c)
}
