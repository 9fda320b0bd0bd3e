//! Adaptive Gauss–Kronrod (7/15) quadrature with global subdivision.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn relative(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }

    fn target(&self, estimate: f64) -> f64 {
        self.abs.max(self.rel * estimate.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Piece {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at `breaks` (points outside
/// the interval are ignored).
pub fn integrate_with_breaks<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut heap: BinaryHeap<Piece> = cuts.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
    let mut settled: Vec<Piece> = Vec::new();
    loop {
        let value: f64 = heap.iter().chain(settled.iter()).map(|p| p.value).sum();
        let error: f64 = heap.iter().chain(settled.iter()).map(|p| p.error).sum();
        let intervals = heap.len() + settled.len();
        if error <= tol.target(value) || heap.is_empty() {
            return Ok(Quadrature {
                value,
                error,
                intervals,
            });
        }
        if intervals >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-14 * mid.abs().max(1e-300) {
            // Interval cannot be split further in f64.
            settled.push(worst);
            continue;
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
    }
}

pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Integrates `f` over `[a, ∞)` through the substitution
/// `t = a + expm1(v / (1 - v))`, which compresses polynomially and
/// stretched-exponentially decaying tails onto `[0, 1)`.
pub fn integrate_to_infinity<F>(f: F, a: f64, tol: Tolerance) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let mapped = |v: f64| {
        let s = v / (1.0 - v);
        if !s.is_finite() || s > 700.0 {
            return 0.0;
        }
        let t = a + s.exp_m1();
        let jac = s.exp() / ((1.0 - v) * (1.0 - v));
        let y = f(t) * jac;
        if y.is_finite() {
            y
        } else {
            0.0
        }
    };
    integrate(mapped, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, Tolerance::relative(1e-14)).unwrap();
        assert_relative_eq!(q.value, 32.0 - 8.0, max_relative = 1e-13);
    }

    #[test]
    fn kink_is_handled_with_breakpoint() {
        let q = integrate_with_breaks(|x: f64| x.abs(), -1.0, 3.0, &[0.0], Tolerance::relative(1e-13)).unwrap();
        assert_relative_eq!(q.value, 5.0, max_relative = 1e-13);
        assert_eq!(q.intervals, 2);
    }

    #[test]
    fn semi_infinite_power_and_exponential() {
        let q = integrate_to_infinity(|t| t.powi(-3), 1.0, Tolerance::relative(1e-11)).unwrap();
        assert_relative_eq!(q.value, 0.5, max_relative = 1e-10);
        let q = integrate_to_infinity(|t| (-t).exp(), 0.0, Tolerance::relative(1e-11)).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-10);
        // Stretched exponential: ∫₀^∞ exp(-√t) dt = 2.
        let q = integrate_to_infinity(|t: f64| (-t.sqrt()).exp(), 0.0, Tolerance::relative(1e-11)).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn empty_interval() {
        let q = integrate(|x| x, 1.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_eq!(q.value, 0.0);
    }
}
