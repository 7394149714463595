//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite ranges.
//!
//! Finite intervals use global adaptive bisection with the 7/15-point
//! Gauss–Kronrod pair and the usual QUADPACK error heuristic. A semi-infinite
//! range [a, ∞) is split into panels of doubling width starting at a
//! caller-supplied length scale; panels are added until one contributes less
//! than `truncation_cut` of the running total, and whatever remains beyond the
//! last panel is integrated after the substitution x = U/t.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Relative panel contribution below which expansion toward infinity stops.
    pub truncation_cut: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            truncation_cut: 1e-14,
            max_subdivisions: 400,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(invalid("abs_tol", "tolerances must be positive"));
        }
        if !(self.truncation_cut > 0.0) {
            return Err(invalid("truncation_cut", "must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(invalid("max_subdivisions", "must be positive"));
        }
        Ok(())
    }

    /// Tolerances one order of magnitude tighter, for integrals nested inside
    /// an outer integrand.
    pub fn inner(&self) -> Self {
        Self {
            abs_tol: self.abs_tol * 0.1,
            rel_tol: self.rel_tol * 0.1,
            ..*self
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl std::ops::AddAssign for Integral {
    fn add_assign(&mut self, rhs: Self) {
        self.value += rhs.value;
        self.error += rhs.error;
        self.evaluations += rhs.evaluations;
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Nodes and weights of the 15-point Kronrod rule mapped to [a, b].
pub(crate) fn kronrod_rule(a: f64, b: f64) -> [(f64, f64); 15] {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut rule = [(center, half * WGK[7]); 15];
    for j in 0..7 {
        rule[2 * j] = (center - half * XGK[j], half * WGK[j]);
        rule[2 * j + 1] = (center + half * XGK[j], half * WGK[j]);
    }
    rule
}

/// Integrand writing `dim` components at once into its output slice.
pub trait VectorIntegrand {
    fn dim(&self) -> usize;
    fn eval(&mut self, x: f64, out: &mut [f64]);
}

struct Scalar<F>(F);

impl<F: FnMut(f64) -> f64> VectorIntegrand for Scalar<F> {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&mut self, x: f64, out: &mut [f64]) {
        out[0] = (self.0)(x);
    }
}

/// Adapter for closures of the form `|x, out| ...`.
pub struct VecFn<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: FnMut(f64, &mut [f64])> VectorIntegrand for VecFn<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&mut self, x: f64, out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Result of a vector-valued integral.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VecIntegral {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub evaluations: usize,
}

impl VecIntegral {
    fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            errors: vec![0.0; dim],
            evaluations: 0,
        }
    }

    fn add(&mut self, other: &VecIntegral) {
        for i in 0..self.values.len() {
            self.values[i] += other.values[i];
            self.errors[i] += other.errors[i];
        }
        self.evaluations += other.evaluations;
    }

    fn converged(&self, abs_tol: f64, rel_tol: f64) -> bool {
        self.values
            .iter()
            .zip(&self.errors)
            .all(|(v, e)| *e <= abs_tol.max(rel_tol * v.abs()))
    }

    fn failure(&self) -> Error {
        let (i, _) = self.errors.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc },
        );
        Error::QuadratureFailed {
            value: self.values[i],
            error: self.errors[i],
            evaluations: self.evaluations,
        }
    }
}

struct Workspace {
    fc: Vec<f64>,
    f1: Vec<[f64; 7]>,
    f2: Vec<[f64; 7]>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            fc: vec![0.0; dim],
            f1: vec![[0.0; 7]; dim],
            f2: vec![[0.0; 7]; dim],
            tmp: vec![0.0; dim],
        }
    }
}

fn eval_into<F: VectorIntegrand>(f: &mut F, x: f64, out: &mut [f64]) -> Result<()> {
    f.eval(x, out);
    if out.iter().all(|y| y.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteIntegrand(x))
    }
}

/// One 15-point Kronrod rule on [a, b], componentwise, with the QUADPACK
/// error heuristic.
fn gk15<F: VectorIntegrand>(
    f: &mut F,
    a: f64,
    b: f64,
    ws: &mut Workspace,
    value: &mut [f64],
    error: &mut [f64],
) -> Result<()> {
    let dim = value.len();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    eval_into(f, center, &mut ws.fc)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        eval_into(f, center - dx, &mut ws.tmp)?;
        for i in 0..dim {
            ws.f1[i][j] = ws.tmp[i];
        }
        eval_into(f, center + dx, &mut ws.tmp)?;
        for i in 0..dim {
            ws.f2[i][j] = ws.tmp[i];
        }
    }
    for i in 0..dim {
        let fc = ws.fc[i];
        let (f1, f2) = (&ws.f1[i], &ws.f2[i]);
        let mut res_k = fc * WGK[7];
        let mut res_g = fc * WG[3];
        let mut res_abs = res_k.abs();
        for j in 0..7 {
            res_k += WGK[j] * (f1[j] + f2[j]);
            res_abs += WGK[j] * (f1[j].abs() + f2[j].abs());
            if j % 2 == 1 {
                res_g += WG[j / 2] * (f1[j] + f2[j]);
            }
        }
        let mean = 0.5 * res_k;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
        }
        res_abs *= half.abs();
        res_asc *= half.abs();
        let mut err = ((res_k - res_g) * half).abs();
        if res_asc != 0.0 && err != 0.0 {
            err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
        }
        if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * res_abs);
        }
        value[i] = res_k * half;
        error[i] = err;
    }
    Ok(())
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    priority: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn priority(error: &[f64]) -> f64 {
    error.iter().fold(0.0, |m, &e| m.max(e))
}

/// Integrate `f` over the finite interval [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let r = integrate_vec(Scalar(f), a, b, spec)?;
    Ok(scalar_of(r))
}

fn scalar_of(r: VecIntegral) -> Integral {
    Integral {
        value: r.values[0],
        error: r.errors[0],
        evaluations: r.evaluations,
    }
}

/// Componentwise adaptive integration of a vector-valued integrand; every
/// component must meet the tolerance.
pub fn integrate_vec<F: VectorIntegrand>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<VecIntegral> {
    let dim = f.dim();
    let mut ws = Workspace::new(dim);
    let r = integrate_finite(&mut f, a, b, spec, &mut ws)?;
    if !r.converged(spec.abs_tol, spec.rel_tol) {
        return Err(r.failure());
    }
    Ok(r)
}

/// Adaptive bisection on [a, b]. Returns the best estimate even when the
/// tolerance was not met; callers decide whether that is a failure.
fn integrate_finite<F: VectorIntegrand>(
    f: &mut F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    ws: &mut Workspace,
) -> Result<VecIntegral> {
    let dim = f.dim();
    let mut total = VecIntegral::zeros(dim);
    if a == b {
        return Ok(total);
    }
    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    gk15(f, a, b, ws, &mut value, &mut error)?;
    total.evaluations = 15;
    total.values.copy_from_slice(&value);
    total.errors.copy_from_slice(&error);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        priority: priority(&error),
        value,
        error,
    });
    let mut frozen = VecIntegral::zeros(dim);
    let mut subdivisions = 1;
    while !total.converged(spec.abs_tol, spec.rel_tol) && subdivisions < spec.max_subdivisions {
        let Some(seg) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) < 1e-14 * mid.abs() {
            // Too narrow to split; its error is final.
            for i in 0..dim {
                frozen.values[i] += seg.value[i];
                frozen.errors[i] += seg.error[i];
            }
            continue;
        }
        let mut v1 = vec![0.0; dim];
        let mut e1 = vec![0.0; dim];
        let mut v2 = vec![0.0; dim];
        let mut e2 = vec![0.0; dim];
        gk15(f, seg.a, mid, ws, &mut v1, &mut e1)?;
        gk15(f, mid, seg.b, ws, &mut v2, &mut e2)?;
        total.evaluations += 30;
        subdivisions += 1;
        for i in 0..dim {
            total.values[i] += v1[i] + v2[i] - seg.value[i];
            total.errors[i] += e1[i] + e2[i] - seg.error[i];
        }
        heap.push(Segment {
            a: seg.a,
            b: mid,
            priority: priority(&e1),
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            priority: priority(&e2),
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed drift from the incremental updates.
    let evaluations = total.evaluations;
    let mut total = frozen;
    total.evaluations = evaluations;
    for seg in heap.iter() {
        for i in 0..dim {
            total.values[i] += seg.value[i];
            total.errors[i] += seg.error[i];
        }
    }
    Ok(total)
}

/// Integrate `f` over [a, ∞). `scale` is the length of the first panel and
/// should be comparable to the distance over which `f` varies near `a`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    integrate_semi_infinite_vec(Scalar(f), a, scale, spec).map(scalar_of)
}

/// Vector-valued form of [`integrate_semi_infinite`].
pub fn integrate_semi_infinite_vec<F: VectorIntegrand>(
    mut f: F,
    a: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<VecIntegral> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale", "panel scale must be positive and finite"));
    }
    const MAX_PANELS: usize = 160;
    let dim = f.dim();
    let mut ws = Workspace::new(dim);

    // A single rule on the first panel sets the magnitude the relative
    // tolerance refers to before any panel has converged.
    let mut guess = vec![0.0; dim];
    let mut guess_err = vec![0.0; dim];
    gk15(&mut f, a, a + scale, &mut ws, &mut guess, &mut guess_err)?;
    let budget = |total: &VecIntegral, i: usize| {
        spec.abs_tol
            .max(spec.rel_tol * total.values[i].abs().max(guess[i].abs()))
    };

    let mut total = VecIntegral::zeros(dim);
    total.evaluations = 15;
    let mut lo = a;
    let mut width = scale;
    let mut quiet = 0;
    let mut panel_tols = vec![0.0; dim];
    for k in 0..MAX_PANELS {
        let hi = lo + width;
        // Panel k gets a geometrically shrinking share of the budget so the
        // panel errors sum below it.
        let share = 0.5f64.powi((k as i32 + 2).min(22));
        for (i, t) in panel_tols.iter_mut().enumerate() {
            *t = budget(&total, i) * share;
        }
        let panel_spec = QuadratureSpec {
            abs_tol: panel_tols.iter().fold(f64::INFINITY, |m, &t| m.min(t)),
            rel_tol: spec.rel_tol * share,
            ..*spec
        };
        let panel = integrate_finite(&mut f, lo, hi, &panel_spec, &mut ws)?;
        total.add(&panel);
        lo = hi;
        width *= 2.0;
        let negligible = panel
            .values
            .iter()
            .zip(&total.values)
            .all(|(p, t)| p.abs() <= spec.truncation_cut * t.abs());
        if negligible {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    // Remainder on [U, ∞) via x = U/t, dx = U/t² dt.
    let upper = lo;
    let tail_spec = QuadratureSpec {
        abs_tol: (0..dim).map(|i| budget(&total, i)).fold(f64::INFINITY, f64::min) * 0.25,
        rel_tol: spec.rel_tol * 0.25,
        ..*spec
    };
    let mut tail_f = VecFn {
        dim,
        f: |t: f64, out: &mut [f64]| {
            let x = upper / t;
            if x.is_infinite() {
                out.fill(0.0);
            } else {
                f.eval(x, out);
                let jac = upper / (t * t);
                out.iter_mut().for_each(|y| *y *= jac);
            }
        },
    };
    let tail = integrate_finite(&mut tail_f, 0.0, 1.0, &tail_spec, &mut ws)?;
    total.add(&tail);
    if !total.converged(spec.abs_tol, spec.rel_tol) {
        return Err(total.failure());
    }
    Ok(total)
}
