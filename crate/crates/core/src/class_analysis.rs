//! Numerical checks of the tail-class properties: the `S*` convolution
//! ratio, insensitivity of `g`, and logarithmic tail ratios.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::models::{GFunction, TailLaw};
use crate::quad::{self, Tolerance};

const S_STAR_TOL: Tolerance = Tolerance { abs: 0.0, rel: 1e-10 };
const MODULUS_GRID: usize = 10_000;

/// `∫₀^x F̄(y) F̄(x-y) dy / F̄(x)` split at `x/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SStarIntegral {
    pub x: f64,
    pub lower_half: f64,
    pub upper_half: f64,
    pub ratio: f64,
    pub error: f64,
}

fn breaks_in(points: &[f64], a: f64, b: f64) -> Vec<f64> {
    points.iter().copied().filter(|&p| p > a && p < b).collect()
}

pub fn s_star_integral<T: TailLaw + ?Sized>(tail: &T, x: f64) -> Result<SStarIntegral> {
    check(x > 0.0 && x.is_finite(), "x", x, "must be positive")?;
    let log_fx = tail.log_tail(x);
    if !log_fx.is_finite() {
        return Err(Error::TailUnderflow(x));
    }
    let f = |y: f64| (tail.log_tail(y) + tail.log_tail(x - y) - log_fx).exp();
    let bp = tail.breakpoints();
    let mirrored: Vec<f64> = bp.iter().map(|b| x - b).chain(bp.iter().copied()).collect();
    let half = 0.5 * x;
    let lo = quad::integrate_with_breaks(f, 0.0, half, &breaks_in(&mirrored, 0.0, half), S_STAR_TOL)?;
    let hi = quad::integrate_with_breaks(f, half, x, &breaks_in(&mirrored, half, x), S_STAR_TOL)?;
    Ok(SStarIntegral {
        x,
        lower_half: lo.value,
        upper_half: hi.value,
        ratio: lo.value + hi.value,
        error: lo.error + hi.error,
    })
}

/// `2 ∫₀^∞ F̄(y) dy`.
pub fn s_star_limit<T: TailLaw + ?Sized>(tail: &T) -> Result<f64> {
    let f = |y: f64| tail.tail(y);
    let bp = breaks_in(&tail.breakpoints(), 0.0, f64::INFINITY);
    let split = bp.iter().copied().fold(1.0, f64::max);
    let body = quad::integrate_with_breaks(f, 0.0, split, &breaks_in(&bp, 0.0, split), S_STAR_TOL)?;
    let rest = quad::integrate_to_infinity(f, split, S_STAR_TOL)?;
    Ok(2.0 * (body.value + rest.value))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SStarReport {
    pub x_grid: Vec<f64>,
    pub ratio: Vec<f64>,
    pub limit_ref: f64,
    /// `ratio / limit_ref - 1`.
    pub rel_dev: Vec<f64>,
}

pub fn s_star_report<T: TailLaw + ?Sized>(tail: &T, x_grid: &[f64]) -> Result<SStarReport> {
    let limit_ref = s_star_limit(tail)?;
    let ratio = x_grid
        .iter()
        .map(|&x| s_star_integral(tail, x).map(|s| s.ratio))
        .collect::<Result<Vec<_>>>()?;
    let rel_dev = ratio.iter().map(|r| r / limit_ref - 1.0).collect();
    Ok(SStarReport {
        x_grid: x_grid.to_vec(),
        ratio,
        limit_ref,
        rel_dev,
    })
}

/// Grid supremum of `|g(x+y)/g(x) - 1|` over `|y| <= ρx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsensitivityReport {
    pub x: f64,
    pub rho: f64,
    /// Supremum over `0 <= y <= ρx`.
    pub modulus_upper: f64,
    /// `γ₀ ρ`, the bound for upward shifts.
    pub bound_upper: f64,
    /// Supremum over `|y| <= ρx`; `None` when `x(1-ρ)` leaves the domain of `g`.
    pub modulus_two_sided: Option<f64>,
    /// `γ₀ ρ / (1 - ρ)`.
    pub bound_two_sided: Option<f64>,
    /// Whether the supremum sits at an endpoint of the grid.
    pub attained_at_endpoint: bool,
}

pub fn insensitivity_modulus(g: &GFunction, x: f64, rho: f64) -> Result<InsensitivityReport> {
    check(x >= g.x_min && x.is_finite(), "x", x, "must lie in the domain of g")?;
    check(rho >= 0.0 && rho.is_finite(), "rho", rho, "must be nonnegative")?;
    let gx = g.eval(x);
    let dev = |y: f64| (g.eval(x + y) / gx - 1.0).abs();
    let sup = |ys: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        ys.map(|y| (dev(y), y)).fold((0.0, 0.0), |b, v| if v.0 > b.0 { v } else { b })
    };
    let span = rho * x;
    let (modulus_upper, at_up) = sup(&mut (0..=MODULUS_GRID).map(|i| span * i as f64 / MODULUS_GRID as f64));
    let two_sided_ok = rho < 1.0 && x - span >= g.x_min;
    let (modulus_two_sided, at_two) = if two_sided_ok {
        let (m, y) = sup(&mut (0..=2 * MODULUS_GRID).map(|i| span * (i as f64 / MODULUS_GRID as f64 - 1.0)));
        (Some(m), y)
    } else {
        (None, at_up)
    };
    let endpoint = |y: f64| y == 0.0 || y.abs() == span;
    Ok(InsensitivityReport {
        x,
        rho,
        modulus_upper,
        bound_upper: g.gamma0 * rho,
        modulus_two_sided,
        bound_two_sided: two_sided_ok.then(|| g.gamma0 * rho / (1.0 - rho)),
        attained_at_endpoint: endpoint(at_up) && endpoint(at_two),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRatioFlag {
    Ok,
    /// `p̂` is zero or one.
    DegenerateEstimate,
    /// `F̄(√(2ax))` is one or zero.
    SaturatedTail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRatio {
    pub x: f64,
    /// `ln p̂ / ln F̄(√(2ax))`.
    pub ratio: Option<f64>,
    /// `ln p̂ / ln(E τ F̄(√(2ax)))`.
    pub ratio_with_e_tau: Option<f64>,
    pub flag: LogRatioFlag,
}

pub fn log_ratio_check<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, p_hat_series: &[(f64, f64)]) -> Vec<LogRatio> {
    p_hat_series
        .iter()
        .map(|&(x, p)| {
            let log_tail = tail.log_tail((2.0 * tail.drift() * x).sqrt());
            let flag = if !(p > 0.0 && p < 1.0) {
                LogRatioFlag::DegenerateEstimate
            } else if !(log_tail < 0.0 && log_tail.is_finite()) {
                LogRatioFlag::SaturatedTail
            } else {
                LogRatioFlag::Ok
            };
            let ok = flag == LogRatioFlag::Ok;
            let with_e_tau = log_tail + e_tau.ln();
            LogRatio {
                x,
                ratio: ok.then(|| p.ln() / log_tail),
                ratio_with_e_tau: (ok && with_e_tau < 0.0).then(|| p.ln() / with_e_tau),
                flag,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IncrementModel, PowerTail};

    #[test]
    fn pareto_limit_is_three() {
        let t = PowerTail { alpha: 3.0, drift_a: 1.0 };
        assert!((s_star_limit(&t).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn halves_agree_by_symmetry() {
        let m = IncrementModel::weibull(0.3, 1.0).unwrap();
        for x in [10.0, 1e3, 1e5] {
            let s = s_star_integral(&m.unshifted(), x).unwrap();
            assert!((s.lower_half / s.upper_half - 1.0).abs() < 1e-8, "{s:?}");
        }
    }

    #[test]
    fn pareto_ratio_approaches_limit() {
        let t = PowerTail { alpha: 3.0, drift_a: 1.0 };
        let r = s_star_report(&t, &[1e2, 1e3, 1e4]).unwrap();
        assert!(r.rel_dev.windows(2).all(|w| w[1].abs() < w[0].abs()));
        assert!(r.rel_dev[1].abs() < 0.05);
    }

    #[test]
    fn underflow_is_reported() {
        let m = IncrementModel::lattice(0.3).unwrap();
        assert!(matches!(s_star_integral(&m, 2.0), Err(Error::TailUnderflow(_))));
    }

    #[test]
    fn modulus_reference_values() {
        let g = GFunction::power(0.3);
        let r = insensitivity_modulus(&g, 1e6, 0.0).unwrap();
        assert_eq!(r.modulus_upper, 0.0);
        let r = insensitivity_modulus(&g, 1e6, 0.01).unwrap();
        assert!(r.modulus_upper <= 0.003);
        assert!(r.modulus_two_sided.unwrap() <= r.bound_two_sided.unwrap());
        assert!(r.attained_at_endpoint);
    }

    #[test]
    fn modulus_grows_with_rho() {
        let g = GFunction::power(0.3);
        let m: Vec<f64> = [0.001, 0.01, 0.1, 0.5]
            .iter()
            .map(|&rho| insensitivity_modulus(&g, 1e4, rho).unwrap().modulus_upper)
            .collect();
        assert!(m.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn log_ratio_examples() {
        let m = IncrementModel::weibull(0.3, 1.0).unwrap();
        let x = 1e4;
        let t = m.tail((2.0f64 * x).sqrt());
        let out = log_ratio_check(&m, 2.0, &[(x, t), (x, 2.0 * t), (x, 0.0)]);
        assert!((out[0].ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!((out[1].ratio.unwrap() - (1.0 + 2f64.ln() / t.ln())).abs() < 1e-12);
        assert!((out[1].ratio_with_e_tau.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(out[2].flag, LogRatioFlag::DegenerateEstimate);
        let reference = PowerTail { alpha: 3.0, drift_a: 1.0 };
        let out = log_ratio_check(&reference, 2.0, &[(0.25, 0.5)]);
        assert_eq!(out[0].flag, LogRatioFlag::SaturatedTail);
    }
}
