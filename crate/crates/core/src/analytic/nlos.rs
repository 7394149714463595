//! LOS and NLOS links with distinct path-loss exponents.
//!
//! Arguments here are in the unnormalized form: a link at distance r has
//! path gain C(r) = k r^{−α}, with k₁ = (c/4πf_c)^{α_L} and k₂ for α_N.

use std::cell::Cell;

use super::{
    aligned_fraction, check_alpha, complement_power, normalized_noise, outer_scale, tier_integral, AnalyticResult,
    Nested,
};
use crate::error::{invalid, Result};
use crate::params::SystemParams;
use crate::quadrature::{integrate_semi_infinite, Integral, QuadratureSpec};

/// ∫₀^∞ (1 − e^{−βv}) v / (1 + v^α/x) dv: blocked interferers.
fn blocked_tier_integral(
    x: f64,
    alpha: f64,
    beta: f64,
    spec: &QuadratureSpec,
    evals: &Cell<usize>,
) -> Result<Integral> {
    if x <= 0.0 || beta == 0.0 || alpha.is_infinite() {
        return Ok(Integral::default());
    }
    let inv_x = 1.0 / x;
    let scale = x.powf(1.0 / alpha).min(1.0 / beta).max(1e-300);
    let r = integrate_semi_infinite(
        |v: f64| -(-beta * v).exp_m1() * v / (1.0 + v.powf(alpha) * inv_x),
        0.0,
        scale,
        spec,
    )?;
    evals.set(evals.get() + r.evaluations);
    Ok(r)
}

/// Exponent integral of the mixed LOS/NLOS interference Laplace transform.
fn mixed_integral(s: f64, params: &SystemParams, spec: &QuadratureSpec, evals: &Cell<usize>) -> Result<Integral> {
    let mut i = tier_integral(s * params.k_los(), params.alpha_los, params.beta, spec, evals)?;
    i += blocked_tier_integral(s * params.k_nlos(), params.alpha_nlos, params.beta, spec, evals)?;
    Ok(i)
}

fn check(params: &SystemParams) -> Result<()> {
    check_alpha(params.alpha_los)?;
    if params.alpha_nlos < params.alpha_los {
        return Err(invalid("alpha_nlos", "must be at least alpha_los"));
    }
    Ok(())
}

/// E[e^{−sI}] with both LOS and NLOS interferers among the BSs whose beams
/// meet the UE's beam. An infinite α_N drops the NLOS part.
pub fn laplace_nlos(s: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    if !(s >= 0.0) {
        return Err(invalid("s", "must be non-negative"));
    }
    check(params)?;
    let density = aligned_fraction(params) * params.lambda_bs;
    let evals = Cell::new(0);
    let inner = QuadratureSpec {
        abs_tol: spec.abs_tol / density,
        ..*spec
    };
    let i = mixed_integral(s, params, &inner, &evals)?;
    let value = (-density * i.value).exp();
    Ok(AnalyticResult {
        value,
        error_estimate: value * density * i.error,
        evaluations: evals.get(),
        estimator_backed: false,
    })
}

/// One-slot detection probability with the serving BS either LOS (κ_L) or
/// NLOS (κ_N).
pub fn p_success_nlos(params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    params.validate()?;
    spec.validate()?;
    check(params)?;
    let t = params.sinr_threshold;
    let beta = params.beta;
    let density = aligned_fraction(params) * params.lambda_bs;
    // W / (p G_UE G_BS), the noise against which C(r) is compared.
    let sigma2 = normalized_noise(params) * params.k_los() / params.n_bs as f64;

    let outer = QuadratureSpec {
        abs_tol: 0.5 * spec.abs_tol / density,
        ..*spec
    };
    let inner_spec = spec.inner();
    let inner = QuadratureSpec {
        abs_tol: inner_spec.abs_tol / density,
        ..inner_spec
    };

    let kappa = |alpha: f64, k: f64, los: bool| -> Result<Integral> {
        let nested = Nested::new();
        let coeff = t * sigma2 / k;
        let integral = integrate_semi_infinite(
            |r: f64| {
                let p_state = if los { (-beta * r).exp() } else { -(-beta * r).exp_m1() };
                let s = t * r.powf(alpha) / k;
                let weight = p_state * (-s * sigma2).exp();
                if weight == 0.0 {
                    return 0.0;
                }
                let i = nested.take(mixed_integral(s, params, &inner, &nested.evals).map(|i| i.value));
                weight * (-density * i).exp() * r
            },
            0.0,
            outer_scale(if los { beta } else { 0.0 }, coeff, alpha),
            &outer,
        );
        nested.finish(integral)
    };

    let mut total = kappa(params.alpha_los, params.k_los(), true)?;
    if params.alpha_nlos.is_finite() && beta > 0.0 {
        total += kappa(params.alpha_nlos, params.k_nlos(), false)?;
    }
    AnalyticResult {
        value: density * total.value,
        error_estimate: density * total.error,
        evaluations: total.evaluations,
        estimator_backed: false,
    }
    .probability()
}

/// P_f = (1 − P_s)^{n_c} including NLOS links.
pub fn failure_prob_nlos(params: &SystemParams, n_c: usize, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    if n_c == 0 {
        return Ok(AnalyticResult::exact(1.0));
    }
    complement_power(p_success_nlos(params, spec)?, n_c)
}
