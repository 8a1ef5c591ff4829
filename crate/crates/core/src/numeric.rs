//! Log-space arithmetic, monotone inversion and adaptive quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// `ln(e^a + e^b)` without overflow. Either argument may be `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`; `-inf` for an empty slice or when every term is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Finds `x` with `f(x) = target` for a strictly increasing `f` on `[lo, hi]`.
///
/// Requires `f(lo) <= target <= f(hi)`. Stops once the bracket is narrower than
/// `rel_tol * max(|hi|, tiny)` or after 400 halvings.
pub fn bisect_increasing<F>(f: F, target: f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts a strictly increasing `f: (0, ∞) → (0, ∞)` at `target`, growing the
/// upper bracket by doubling and shrinking the lower one by halving.
pub fn invert_increasing<F>(f: F, target: f64, start: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Domain(format!(
            "inversion target must be positive and finite, got {target}"
        )));
    }
    let start = if start > 0.0 && start.is_finite() { start } else { 1.0 };
    let mut hi = start;
    let mut guard = 0;
    while f(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 || !hi.is_finite() {
            return Err(Error::Bracket(format!("no upper bracket for target {target}")));
        }
    }
    let mut lo = hi;
    guard = 0;
    while f(lo) > target {
        lo *= 0.5;
        guard += 1;
        if guard > 2100 || lo == 0.0 {
            return Err(Error::Bracket(format!("no lower bracket for target {target}")));
        }
    }
    if lo == hi {
        if f(lo) == target {
            return Ok(lo);
        }
        hi = lo * 2.0;
    }
    Ok(bisect_increasing(f, target, lo, hi, rel_tol))
}

// Gauss–Kronrod 7/15 abscissae and weights.
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

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    let mut samples = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (lo, hi) = (f(center - dx), f(center + dx));
        samples[j] = (lo, hi);
        kronrod += WGK[j] * (lo + hi);
        abs_sum += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((samples[j].0 - mean).abs() + (samples[j].1 - mean).abs());
    }
    let asc = asc * half.abs();
    let abs_int = abs_sum * half.abs();
    // QUADPACK error scaling with a round-off floor
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_int > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_int);
    }
    (kronrod * half, err)
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss–Kronrod integration over `breakpoints[0]..breakpoints[last]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate falls below `max(abs_tol, rel_tol·|value|)`.
pub fn integrate_with_breaks<F>(f: F, breakpoints: &[f64], abs_tol: f64, rel_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    if breakpoints.len() < 2 {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let (v, e) = gk15(&f, a, b);
        evaluations += 15;
        value += v;
        error += e;
        heap.push(Segment { a, b, value: v, error: e });
    }
    let mut iterations = 0;
    while error > abs_tol.max(rel_tol * value.abs()) {
        iterations += 1;
        if iterations > 20_000 {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} above tolerance after {evaluations} evaluations"
            )));
        }
        if iterations % 256 == 0 {
            error = heap.iter().map(|s| s.error).sum();
            if error <= abs_tol.max(rel_tol * value.abs()) {
                break;
            }
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further at f64 resolution.
            heap.push(Segment { error: 0.0, ..worst });
            error -= worst.error;
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evaluations += 30;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    if !value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integral {value}")));
    }
    // Re-sum for a clean total once refinement is done.
    let value = heap.iter().map(|s| s.value).sum();
    Ok(Integral { value, error: error.max(0.0), evaluations })
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if a > b {
        let r = integrate(f, b, a, abs_tol, rel_tol)?;
        return Ok(Integral { value: -r.value, ..r });
    }
    let n = 8;
    let breaks: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    integrate_with_breaks(f, &breaks, abs_tol, rel_tol)
}

/// Evenly spaced points in log scale, `per_decade` per factor of ten, inclusive of both ends.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo * 10f64.powf(decades * i as f64 / n as f64)
            }
        })
        .collect()
}

/// Median of a non-empty slice (average of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(-800.0, -800.0) - (-800.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(3.0, f64::NEG_INFINITY), 3.0);
    }

    #[test]
    fn log1m_exp_matches_direct() {
        for x in [-1e-8, -0.1, -0.69, -0.7, -5.0, -40.0] {
            let direct = (1.0 - f64::exp(x)).ln();
            assert!((log1m_exp(x) - direct).abs() <= 1e-9 * direct.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn quadrature_polynomials_and_peaks() {
        let r = integrate(|x| x * x, 0.0, 3.0, 0.0, 1e-13).unwrap();
        assert!((r.value - 9.0).abs() < 1e-12);
        let r = integrate(|x| (-x * x).exp(), -10.0, 10.0, 0.0, 1e-13).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let r = integrate(|x| 1.0 / x, 1.0, 1e6, 0.0, 1e-12).unwrap();
        assert!((r.value - 1e6f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn inversion_round_trip() {
        let f = |x: f64| x * x * x + x;
        for target in [1e-6, 0.5, 2.0, 1e3, 1e9] {
            let x = invert_increasing(f, target, 1.0, 1e-14).unwrap();
            assert!((f(x) - target).abs() <= 1e-12 * target, "target={target}");
        }
        assert!(invert_increasing(f, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1.0, 1e3, 4);
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 1e3);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
