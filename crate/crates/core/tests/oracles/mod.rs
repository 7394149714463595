//! Independent reference computations shared by the test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use mmia::analytic::normalized_noise;
use mmia::antenna::{BeamVector, PathChannel};
use mmia::SystemParams;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

/// E[e^{−sI}] for I = Σ h x^{−α} over LOS BSs that point at the UE inside
/// its beam, sampled out to a radius where the blockage tail is negligible.
pub fn laplace_los_mc(s: f64, p: &SystemParams, trials: usize, seed: u64) -> (f64, f64) {
    let radius = 40.0 / p.beta;
    let wedge = 2.0 * PI / p.n_ue as f64;
    let density = p.lambda_bs / p.n_bs as f64;
    let count = Poisson::new(density * 0.5 * wedge * radius * radius).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let n = count.sample(&mut rng) as usize;
        let mut i = 0.0;
        for _ in 0..n {
            let x = radius * rng.random::<f64>().sqrt();
            if rng.random::<f64>() < (-p.beta * x).exp() {
                let h: f64 = Exp1.sample(&mut rng);
                i += h * x.powf(-p.alpha_los);
            }
        }
        let v = (-s * i).exp();
        sum += v;
        sum_sq += v * v;
    }
    let m = trials as f64;
    let mean = sum / m;
    (mean, ((sum_sq / m - mean * mean) / m).sqrt())
}

/// Correlated-slot sampling of one BS at distance `r` heard through its
/// sidelobe. BS positions inside the UE beam are shared by all slots; fading,
/// blockage and the set of BSs pointing at the UE are fresh in every slot.
/// Returns, for k = 1..=n, the fractions of trials detected in at least one
/// and in all of the first k slots.
pub fn correlated_slots_mc(p: &SystemParams, r: f64, n: usize, trials: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let radius = 30.0 / p.beta;
    let theta_ue = p.theta_ue();
    let eps = p.epsilon;
    let g_extra = p.bs_pattern().mainlobe_gain() - eps;
    let sigma2 = normalized_noise(p);
    let t = p.sinr_threshold;
    let area = 0.5 * theta_ue * radius * radius;
    let shared = Poisson::new(p.lambda_bs * area).unwrap();
    let pointing = Poisson::new(p.lambda_bs / p.n_bs as f64 * area).unwrap();
    let radial = |rng: &mut ChaCha8Rng| radius * rng.random::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut any = vec![0usize; n];
    let mut all = vec![0usize; n];
    let mut sites = Vec::new();
    for _ in 0..trials {
        sites.clear();
        for _ in 0..shared.sample(&mut rng) as usize {
            sites.push(radial(&mut rng));
        }
        let (mut hit_any, mut hit_all) = (false, true);
        for k in 0..n {
            let mut interference = 0.0;
            for &x in &sites {
                if rng.random::<f64>() < (-p.beta * x).exp() {
                    let h: f64 = Exp1.sample(&mut rng);
                    interference += eps * h * x.powf(-p.alpha_los);
                }
            }
            for _ in 0..pointing.sample(&mut rng) as usize {
                let x = radial(&mut rng);
                if rng.random::<f64>() < (-p.beta * x).exp() {
                    let h: f64 = Exp1.sample(&mut rng);
                    interference += g_extra * h * x.powf(-p.alpha_los);
                }
            }
            let h: f64 = Exp1.sample(&mut rng);
            let ok = eps * h * r.powf(-p.alpha_los) >= t * (interference + sigma2);
            hit_any |= ok;
            hit_all &= ok;
            any[k] += hit_any as usize;
            all[k] += hit_all as usize;
        }
    }
    let m = trials as f64;
    (
        any.iter().map(|&c| c as f64 / m).collect(),
        all.iter().map(|&c| c as f64 / m).collect(),
    )
}

/// Unit-norm steering vector (1/√k) e^{−j m π sin θ}.
pub fn steering(k: usize, theta: f64) -> Vec<Complex64> {
    (0..k)
        .map(|m| {
            Complex64::from_polar(
                1.0 / (k as f64).sqrt(),
                -(m as f64) * std::f64::consts::PI * theta.sin(),
            )
        })
        .collect()
}

/// wᴴ H v with H = √ℓ h a_UE a_BSᴴ built as a dense matrix.
pub fn dense_gain(w: &BeamVector, ch: &PathChannel, v: &BeamVector, h_phase: f64) -> f64 {
    let h = Complex64::from_polar((ch.path_gain * ch.fading_power).sqrt(), h_phase);
    let a_ue = steering(ch.m_ue, ch.aoa);
    let a_bs = steering(ch.m_bs, ch.aod);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, wi) in w.coefficients().iter().enumerate() {
        for (j, vj) in v.coefficients().iter().enumerate() {
            let hij = h * a_ue[i] * a_bs[j].conj();
            acc += wi.conj() * hij * vj;
        }
    }
    acc.norm_sqr()
}

pub fn random_channel(rng: &mut ChaCha8Rng, m_ue: usize, m_bs: usize) -> PathChannel {
    PathChannel {
        path_gain: rng.random_range(1e-9..1e-6),
        fading_power: rng.random_range(0.1..3.0),
        aoa: rng.random_range(-3.0..3.0),
        aod: rng.random_range(-3.0..3.0),
        m_ue,
        m_bs,
    }
}
