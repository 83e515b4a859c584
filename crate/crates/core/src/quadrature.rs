//! Adaptive Gauss–Kronrod (7, 15) quadrature.
//!
//! Bisects the interval with the largest error estimate until the summed
//! estimate falls below `max(abs, rel * |value|)`. Improper integrals over
//! `[a, ∞)` are mapped to `[0, 1)` with `x = a + s / (1 - s)`. Integrals over
//! the open unit cube nest the one-dimensional rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn rescale_error(err: f64, result_abs: f64, result_asc: f64) -> f64 {
    let mut err = err.abs();
    if result_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / result_asc).powf(1.5);
        err = if scale < 1.0 { result_asc * scale } else { result_asc };
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * result_abs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

/// One 15-point Kronrod panel: `(value, error)`.
fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * half.abs(), res_asc * half.abs());
    if !value.is_finite() {
        return Err(Error::Domain(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    Ok((value, err))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// `∫_a^b f` for a fallible integrand.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = kronrod(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut value = v;
    let mut error = e;
    while error > tol.target(value) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: tol.target(value),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: tol.target(value),
            });
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        // re-sum to keep the running totals free of cancellation drift
        value = heap.iter().map(|p| p.value).sum();
        error = heap.iter().map(|p| p.error).sum();
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, tol)
}

/// `∫_a^∞ f` through `x = a + s / (1 - s)`.
pub fn try_integrate_to_infinity<F>(mut f: F, a: f64, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    try_integrate(
        |s| {
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            Ok(f(x)? / (one_minus * one_minus))
        },
        0.0,
        1.0,
        tol,
    )
}

pub fn integrate_to_infinity<F>(mut f: F, a: f64, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    try_integrate_to_infinity(|x| Ok(f(x)), a, tol)
}

/// `∫_{(0,1)^n} f` by nesting the adaptive rule, innermost coordinate last.
/// Inner integrals run at a tenth of the outer tolerance.
pub fn try_integrate_cube<F>(n: usize, mut f: F, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut point = vec![0.0; n];
    let mut evaluations = 0usize;
    let est = nested(0, &mut point, &mut f, tol, &mut evaluations)?;
    Ok(Estimate {
        evaluations,
        ..est
    })
}

fn nested<F>(
    level: usize,
    point: &mut Vec<f64>,
    f: &mut F,
    tol: &Tolerance,
    evaluations: &mut usize,
) -> Result<Estimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = point.len();
    if n == 0 {
        *evaluations += 1;
        let v = f(point)?;
        return Ok(Estimate {
            value: v,
            error: 0.0,
            evaluations: 1,
        });
    }
    if level + 1 == n {
        return try_integrate(
            |s| {
                point[level] = s;
                *evaluations += 1;
                f(point)
            },
            0.0,
            1.0,
            tol,
        );
    }
    let inner_tol = Tolerance {
        abs: tol.abs * 0.1,
        // the per-panel error estimate never drops below 50 eps relative
        rel: (tol.rel * 0.1).max(200.0 * f64::EPSILON),
        max_intervals: tol.max_intervals,
    };
    let mut inner_error = 0.0f64;
    let mut est = try_integrate(
        |s| {
            point[level] = s;
            let e = nested(level + 1, point, f, &inner_tol, evaluations)?;
            inner_error = inner_error.max(e.error);
            Ok(e.value)
        },
        0.0,
        1.0,
        tol,
    )?;
    est.error += inner_error;
    Ok(est)
}

pub fn integrate_cube<F>(n: usize, mut f: F, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(&[f64]) -> f64,
{
    try_integrate_cube(n, |p| Ok(f(p)), tol)
}
