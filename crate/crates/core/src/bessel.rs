//! Modified Bessel function of the second kind, order one.

use crate::error::{check, Result};
use crate::quad::{self, Tolerance};

/// Above this argument the asymptotic series is used.
pub const CROSSOVER: f64 = 20.0;

/// `K₁(z)` for `z > 0`.
pub fn bessel_k1(z: f64) -> Result<f64> {
    check(z > 0.0 && z.is_finite(), "z", z, "must be positive")?;
    if z >= CROSSOVER {
        Ok(k1_asymptotic(z))
    } else {
        k1_integral(z)
    }
}

/// `e^z K₁(z)`; finite where `K₁` itself underflows.
pub fn bessel_k1_scaled(z: f64) -> Result<f64> {
    check(z > 0.0 && z.is_finite(), "z", z, "must be positive")?;
    if z >= CROSSOVER {
        Ok(k1_asymptotic_scaled(z))
    } else {
        k1_integral_scaled(z)
    }
}

/// `∫₀^∞ e^{-z cosh t} cosh t dt`, evaluated as `e^{-z}` times the
/// integral of `e^{-z (cosh t - 1)} cosh t` up to where the exponent reaches 40.
pub fn k1_integral(z: f64) -> Result<f64> {
    Ok((-z).exp() * k1_integral_scaled(z)?)
}

fn k1_integral_scaled(z: f64) -> Result<f64> {
    let upper = (1.0 + 40.0 / z).acosh();
    let f = |t: f64| (-z * (t.cosh() - 1.0)).exp() * t.cosh();
    Ok(quad::integrate(f, 0.0, upper, Tolerance { abs: 0.0, rel: 1e-13 })?.value)
}

/// Hankel expansion `√(π/2z) e^{-z} Σ_k a_k(1) / z^k`, truncated at the
/// smallest term.
pub fn k1_asymptotic(z: f64) -> f64 {
    (-z).exp() * k1_asymptotic_scaled(z)
}

fn k1_asymptotic_scaled(z: f64) -> f64 {
    let mu = 4.0;
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * z)).sqrt() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let k = bessel_k1(1.0).unwrap();
        assert!((k - 0.601_907_230_197_234_6).abs() < 1e-12, "{k}");
        let small = bessel_k1(0.001).unwrap();
        assert!((small - 999.996_238_156_085_6).abs() < 1e-8 * small, "{small}");
    }

    #[test]
    fn asymptotic_ratio_at_ten() {
        let r = bessel_k1(10.0).unwrap() / ((std::f64::consts::PI / 20.0).sqrt() * (-10.0f64).exp());
        assert!((r - 1.036_418_493_228_924_6).abs() < 1e-10, "{r}");
    }

    #[test]
    fn methods_agree_at_crossover() {
        for z in [15.0, 20.0, 25.0, 30.0] {
            let a = k1_integral(z).unwrap();
            let b = k1_asymptotic(z);
            assert!((a / b - 1.0).abs() < 1e-10, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn scaled_form_survives_large_arguments() {
        let s = bessel_k1_scaled(2000.0).unwrap();
        assert!((s / (std::f64::consts::PI / 4000.0).sqrt() - 1.0).abs() < 1e-3);
        assert_eq!(bessel_k1(2000.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(bessel_k1(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
    }
}
