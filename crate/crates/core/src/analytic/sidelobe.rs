//! Sectorized beams with sidelobe gain ε > 0.
//!
//! A BS pointing at the UE is heard through its mainlobe G_m; in every other
//! slot it leaks ε toward the UE. Detection through the mainlobe happens at
//! most once per scan cycle per BS, detection through sidelobes can happen in
//! any of the remaining slots, and the two are composed as
//! P_f = (1 − P_ss)(1 − P_sm)^{N_c}.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{check_alpha, complement_power, normalized_noise, outer_scale, tier_integral, AnalyticResult, Nested};
use crate::error::{invalid, Error, Result};
use crate::params::SystemParams;
use crate::quadrature::{
    integrate_semi_infinite, integrate_semi_infinite_vec, kronrod_rule, QuadratureSpec, VecFn, VecIntegral,
};

/// Default largest slot count for which Q^n is summed by
/// inclusion–exclusion.
pub const MAX_EXACT_SELECTION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidelobeOptions {
    /// Sidelobe slots per BS; `None` means N_c − 1.
    pub sidelobe_slots: Option<usize>,
    /// Slot counts above this use the estimator.
    pub exact_limit: usize,
    /// Monte Carlo samples per node on the estimator path.
    pub estimator_samples: usize,
    pub estimator_seed: u64,
}

impl Default for SidelobeOptions {
    fn default() -> Self {
        Self {
            sidelobe_slots: None,
            exact_limit: MAX_EXACT_SELECTION,
            estimator_samples: 400,
            estimator_seed: 0x5eed,
        }
    }
}

impl SidelobeOptions {
    pub fn slots_for(&self, n_c: usize) -> usize {
        self.sidelobe_slots.unwrap_or(n_c.saturating_sub(1))
    }
}

struct Tiers {
    alpha: f64,
    beta: f64,
    t: f64,
    g_main: f64,
    epsilon: f64,
    theta_ue: f64,
    /// Densities of BSs pointing at / away from the UE.
    lambda_main: f64,
    lambda_side: f64,
    lambda: f64,
    /// W / (p G_UE k₁).
    sigma2: f64,
}

impl Tiers {
    fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        check_alpha(params.alpha_los)?;
        let pattern = params.bs_pattern();
        let frac_main = 1.0 / params.n_bs as f64;
        Ok(Self {
            alpha: params.alpha_los,
            beta: params.beta,
            t: params.sinr_threshold,
            g_main: pattern.mainlobe_gain(),
            epsilon: params.epsilon,
            theta_ue: params.theta_ue(),
            lambda_main: frac_main * params.lambda_bs,
            lambda_side: (1.0 - frac_main) * params.lambda_bs,
            lambda: params.lambda_bs,
            sigma2: normalized_noise(params),
        })
    }

    /// −ln of the two-tier Laplace transform at s.
    fn two_tier_exponent(&self, s: f64, spec: &QuadratureSpec, evals: &Cell<usize>) -> Result<(f64, f64)> {
        let main = tier_integral(s * self.g_main, self.alpha, self.beta, spec, evals)?;
        let side = tier_integral(s * self.epsilon, self.alpha, self.beta, spec, evals)?;
        let a = self.theta_ue * self.lambda_main;
        let b = self.theta_ue * self.lambda_side;
        Ok((a * main.value + b * side.value, a * main.error + b * side.error))
    }
}

/// Laplace transform of the interference seen through the UE beam when BSs
/// pointing at the UE radiate G_m and the rest radiate ε.
pub fn laplace_two_tier(s: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    if !(s >= 0.0) {
        return Err(invalid("s", "must be non-negative"));
    }
    let tiers = Tiers::new(params)?;
    let evals = Cell::new(0);
    let inner = QuadratureSpec {
        abs_tol: spec.abs_tol / (tiers.theta_ue * tiers.lambda),
        ..*spec
    };
    let (x, err) = tiers.two_tier_exponent(s, &inner, &evals)?;
    let value = (-x).exp();
    Ok(AnalyticResult {
        value,
        error_estimate: value * err,
        evaluations: evals.get(),
        estimator_backed: false,
    })
}

/// Probability of detecting, in one slot, a BS whose mainlobe points at the
/// UE.
pub fn p_success_mainlobe(params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    spec.validate()?;
    let tiers = Tiers::new(params)?;
    let density = tiers.theta_ue * tiers.lambda_main;
    let noise = tiers.t * tiers.sigma2 / tiers.g_main;
    let outer = QuadratureSpec {
        abs_tol: spec.abs_tol / density,
        ..*spec
    };
    let inner_spec = spec.inner();
    let inner = QuadratureSpec {
        abs_tol: inner_spec.abs_tol / (tiers.theta_ue * tiers.lambda),
        ..inner_spec
    };
    let nested = Nested::new();
    let integral = integrate_semi_infinite(
        |r: f64| {
            let ra = r.powf(tiers.alpha);
            let attenuation = (-noise * ra - tiers.beta * r).exp();
            if attenuation == 0.0 {
                return 0.0;
            }
            let s = tiers.t * ra / tiers.g_main;
            let x = nested.take(tiers.two_tier_exponent(s, &inner, &nested.evals).map(|v| v.0));
            attenuation * (-x).exp() * r
        },
        0.0,
        outer_scale(tiers.beta, noise, tiers.alpha),
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

/// Factors of the joint sidelobe success probability at distance r:
/// P^k(r) = exp(−c ∫(1 − (1 − g(u))^k) du − k·(mainlobe + noise)).
struct JointTerms {
    /// ½ θ_UE λ r² T^{2/α}.
    c: f64,
    /// β r T^{1/α}, the blockage rate in the √u variable.
    b: f64,
    alpha: f64,
    /// Mainlobe-tier interference plus noise exponent of one slot.
    per_slot: f64,
    per_slot_err: f64,
}

impl JointTerms {
    fn new(tiers: &Tiers, r: f64, spec: &QuadratureSpec, evals: &Cell<usize>) -> Result<Self> {
        if tiers.epsilon <= 0.0 {
            return Err(invalid("epsilon", "sidelobe detection needs ε > 0"));
        }
        let ra = r.powf(tiers.alpha);
        let t_root = tiers.t.powf(1.0 / tiers.alpha);
        let g_star = tiers.g_main - tiers.epsilon;
        // Mainlobe interferers relative to the sidelobe signal:
        // ∫ T G* r^α e^{−βt} t / (ε t^α + T G* r^α) dt.
        let x = tiers.t * g_star * ra / tiers.epsilon;
        let main = tier_integral(x, tiers.alpha, tiers.beta, spec, evals)?;
        let a = tiers.theta_ue * tiers.lambda_main;
        let noise = tiers.t * ra * tiers.sigma2 / tiers.epsilon;
        Ok(Self {
            c: 0.5 * tiers.theta_ue * tiers.lambda * r * r * t_root * t_root,
            b: tiers.beta * r * t_root,
            alpha: tiers.alpha,
            per_slot: a * main.value + noise,
            per_slot_err: a * main.error,
        })
    }

    /// ∫₀^∞ (1 − (1 − g(u))^k) du for k = 1..=n, with
    /// g(u) = e^{−b√u}/(1 + u^{α/2}).
    fn correlated_integrals(&self, n: usize, spec: &QuadratureSpec, evals: &Cell<usize>) -> Result<VecIntegral> {
        let half_alpha = 0.5 * self.alpha;
        let b = self.b;
        let scale = if b > 0.0 { (1.0 / (b * b)).min(1.0) } else { 1.0 };
        let r = integrate_semi_infinite_vec(
            VecFn {
                dim: n,
                f: |u: f64, out: &mut [f64]| {
                    let g = (-b * u.sqrt()).exp() / (1.0 + u.powf(half_alpha));
                    let l = (-g).ln_1p();
                    for (k, y) in out.iter_mut().enumerate() {
                        *y = -((k + 1) as f64 * l).exp_m1();
                    }
                },
            },
            0.0,
            scale,
            spec,
        )?;
        evals.set(evals.get() + r.evaluations);
        Ok(r)
    }

    /// P^k for k = 1..=n with the error of each from the correlated
    /// integral alone.
    fn joint_all(&self, n: usize, spec: &QuadratureSpec, evals: &Cell<usize>) -> Result<Vec<(f64, f64)>> {
        let j = self.correlated_integrals(n, spec, evals)?;
        Ok((0..n)
            .map(|i| {
                let k = (i + 1) as f64;
                let p = (-self.c * j.values[i] - k * self.per_slot).exp();
                (p, p * self.c * j.errors[i])
            })
            .collect())
    }
}

/// P^n(r): probability that a BS at distance r, pointing elsewhere, is
/// detected through its sidelobe in each of n given slots.
pub fn p_joint_sidelobe(n: usize, r: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    let tiers = Tiers::new(params)?;
    let evals = Cell::new(0);
    let terms = JointTerms::new(&tiers, r, spec, &evals)?;
    let (value, err) = terms.joint_all(n, spec, &evals)?[n - 1];
    let err = err + value * n as f64 * terms.per_slot_err;
    AnalyticResult {
        value,
        error_estimate: err,
        evaluations: evals.get(),
        estimator_backed: false,
    }
    .probability()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Inner tolerances tight enough that the alternating sum keeps the outer
/// accuracy despite coefficients up to C(n, n/2).
fn selection_spec(n: usize, spec: &QuadratureSpec) -> QuadratureSpec {
    let amplification = 2f64.powi(n as i32);
    QuadratureSpec {
        abs_tol: (spec.abs_tol * 0.1 / amplification).max(1e-300),
        rel_tol: (spec.rel_tol * 0.1 / amplification).max(1e-12),
        ..*spec
    }
}

fn q_exact(n: usize, terms: &JointTerms, spec: &QuadratureSpec, evals: &Cell<usize>) -> Result<(f64, f64)> {
    let joint = terms.joint_all(n, &selection_spec(n, spec), evals)?;
    let mut signed = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    let mut err = 0.0;
    let mut magnitude = 0.0;
    for (i, &(p, e)) in joint.iter().enumerate() {
        let k = i + 1;
        let c = binomial(n, k);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        signed.push(sign * c * p);
        slope.push(sign * c * k as f64 * p);
        err += c * e;
        magnitude += c * p;
    }
    let q = compensated_sum(signed.into_iter());
    // An error in the per-slot exponent moves every P^k coherently; its
    // effect is the derivative of the sum, not the sum of magnitudes.
    let err = err + compensated_sum(slope.into_iter()).abs() * terms.per_slot_err + 4.0 * f64::EPSILON * magnitude;
    let tolerance = 10.0 * spec.abs_tol.max(spec.rel_tol * q.abs());
    if err > tolerance {
        return Err(Error::LossOfPrecision { error: err, tolerance });
    }
    Ok((q, err))
}

const NEAR_FIELD_CUT: f64 = 1e-4;

/// Smallest u with g(u) ≤ 1/inv_cut, to relative precision 1e-3.
fn near_field_limit(g: &impl Fn(f64) -> f64, inv_cut: f64, half_alpha: f64) -> f64 {
    let cut = 1.0 / inv_cut;
    let mut hi = inv_cut.powf(1.0 / half_alpha);
    let mut lo = 0.0;
    if g(hi) > cut {
        return hi;
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > cut {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Q^n(r) = 1 − E[(1 − aY)^n] where Y is the product of (1 − g) over a PPP
/// of intensity c on (0, ∞) and a = e^{−(mainlobe + noise)}. This is the
/// probability form behind the inclusion–exclusion sum, estimated by
/// sampling Y. Returns (estimate, standard error).
fn q_estimated<R: Rng>(
    n: usize,
    terms: &JointTerms,
    samples: usize,
    rng: &mut R,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let half_alpha = 0.5 * terms.alpha;
    let g = |u: f64| (-terms.b * u.sqrt()).exp() / (1.0 + u.powf(half_alpha));
    // Points beyond U each have g < NEAR_FIELD_CUT; their product is
    // replaced by its mean-field value exp(−c ∫_U^∞ g du).
    let u_max = near_field_limit(&g, 1.0 / NEAR_FIELD_CUT, half_alpha);
    let tail = integrate_semi_infinite(g, u_max, u_max, spec)?.value;
    let tail_factor = (-terms.c * tail).exp();
    let a = (-terms.per_slot).exp();
    let mean_count = terms.c * u_max;
    let poisson = if mean_count > 0.0 {
        Some(Poisson::new(mean_count).map_err(|e| invalid("lambda_bs", e.to_string()))?)
    } else {
        None
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let count = poisson.as_ref().map_or(0.0, |p| p.sample(rng)) as usize;
        let mut log_y = 0.0;
        for _ in 0..count {
            let u = u_max * rng.random::<f64>();
            log_y += (-g(u)).ln_1p();
        }
        let y = log_y.exp() * tail_factor;
        let miss = (1.0 - a * y).powi(n as i32);
        sum += miss;
        sum_sq += miss * miss;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) / (m - 1.0).max(1.0);
    Ok((1.0 - mean, var.sqrt()))
}

/// Q^n(r): probability that a BS at distance r, pointing elsewhere, is
/// detected through its sidelobe in at least one of n slots.
///
/// Up to the exact limit (at most [`MAX_EXACT_SELECTION`]) the
/// inclusion–exclusion sum Σ (−1)^{k+1} C(n,k) P^k is evaluated directly;
/// beyond that the result is estimator-backed.
pub fn q_selection(n: usize, r: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<AnalyticResult> {
    q_selection_with(n, r, params, spec, &SidelobeOptions::default())
}

pub fn q_selection_with(
    n: usize,
    r: f64,
    params: &SystemParams,
    spec: &QuadratureSpec,
    options: &SidelobeOptions,
) -> Result<AnalyticResult> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    let tiers = Tiers::new(params)?;
    let evals = Cell::new(0);
    let terms = JointTerms::new(&tiers, r, &spec.inner(), &evals)?;
    let (value, err, backed) = if n <= options.exact_limit.min(MAX_EXACT_SELECTION) {
        let (q, e) = q_exact(n, &terms, spec, &evals)?;
        (q, e, false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(options.estimator_seed);
        let (q, se) = q_estimated(n, &terms, options.estimator_samples, &mut rng, spec)?;
        (q, 3.0 * se, true)
    };
    AnalyticResult {
        value,
        error_estimate: err,
        evaluations: evals.get(),
        estimator_backed: backed,
    }
    .probability()
}

/// Probability that some BS pointing elsewhere is detected through its
/// sidelobe within n slots. The union over BSs is evaluated as a sum, which
/// can pass 1 when T ≤ 1; the result is then capped at 1.
pub fn p_success_sidelobe(
    n: usize,
    params: &SystemParams,
    spec: &QuadratureSpec,
    options: &SidelobeOptions,
) -> Result<AnalyticResult> {
    spec.validate()?;
    let tiers = Tiers::new(params)?;
    let density = tiers.theta_ue * tiers.lambda_side;
    if n == 0 || tiers.epsilon <= 0.0 || density <= 0.0 {
        return Ok(AnalyticResult::exact(0.0));
    }
    let outer = QuadratureSpec {
        abs_tol: spec.abs_tol / density,
        ..*spec
    };
    let scale = outer_scale(tiers.beta, tiers.t * tiers.sigma2 / tiers.epsilon, tiers.alpha);
    if n > options.exact_limit.min(MAX_EXACT_SELECTION) {
        return sidelobe_estimated(n, &tiers, density, scale, spec, options);
    }
    let inner = spec.inner();
    let nested = Nested::new();
    let integral = integrate_semi_infinite(
        |r: f64| {
            let weight = (-tiers.beta * r).exp() * r;
            if weight == 0.0 || r == 0.0 {
                return 0.0;
            }
            let q = JointTerms::new(&tiers, r, &inner, &nested.evals)
                .and_then(|terms| q_exact(n, &terms, &inner, &nested.evals))
                .map(|(q, _)| q);
            weight * nested.take(q)
        },
        0.0,
        scale,
        &outer,
    );
    let integral = nested.finish(integral)?;
    AnalyticResult {
        value: (density * integral.value).min(1.0),
        error_estimate: density * integral.error,
        evaluations: integral.evaluations,
        estimator_backed: false,
    }
    .probability()
}

/// Fixed composite Gauss–Kronrod rule over r with Q^n estimated at every
/// node; the sampling noise makes adaptive refinement meaningless.
fn sidelobe_estimated(
    n: usize,
    tiers: &Tiers,
    density: f64,
    scale: f64,
    spec: &QuadratureSpec,
    options: &SidelobeOptions,
) -> Result<AnalyticResult> {
    // Q^n ≤ 1, so the e^{−βr} r weight bounds the tail; without blockage the
    // noise term e^{−T r^α σ²/ε} does.
    let r_max = 40.0 * scale;
    let panels = 32;
    let width = r_max / panels as f64;
    let inner = spec.inner();
    let evals = Cell::new(0);
    let mut total = 0.0;
    let mut variance = 0.0;
    let mut node = 0u64;
    for p in 0..panels {
        let lo = p as f64 * width;
        for (r, w) in kronrod_rule(lo, lo + width) {
            let weight = (-tiers.beta * r).exp() * r;
            if r <= 0.0 || weight == 0.0 {
                continue;
            }
            let terms = JointTerms::new(tiers, r, &inner, &evals)?;
            let mut rng = ChaCha8Rng::seed_from_u64(options.estimator_seed.wrapping_add(node));
            node += 1;
            let (q, se) = q_estimated(n, &terms, options.estimator_samples, &mut rng, &inner)?;
            total += w * weight * q;
            variance += (w * weight * se).powi(2);
        }
    }
    AnalyticResult {
        value: (density * total).min(1.0),
        error_estimate: 3.0 * density * variance.sqrt(),
        evaluations: evals.get() + node as usize * options.estimator_samples,
        estimator_backed: true,
    }
    .probability()
}

/// P_f = (1 − P_ss)(1 − P_sm)^{N_c} with n = N_c − 1 sidelobe slots unless
/// overridden.
pub fn failure_prob_sidelobe(
    params: &SystemParams,
    n_c: usize,
    spec: &QuadratureSpec,
    options: &SidelobeOptions,
) -> Result<AnalyticResult> {
    if n_c == 0 {
        return Ok(AnalyticResult::exact(1.0));
    }
    let main = complement_power(p_success_mainlobe(params, spec)?, n_c)?;
    let side = p_success_sidelobe(options.slots_for(n_c), params, spec, options)?;
    AnalyticResult {
        value: (1.0 - side.value) * main.value,
        error_estimate: main.error_estimate + side.error_estimate * main.value,
        evaluations: main.evaluations + side.evaluations,
        estimator_backed: side.estimator_backed,
    }
    .probability()
}
