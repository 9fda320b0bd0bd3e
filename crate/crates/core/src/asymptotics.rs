//! Closed-form tail predictions and explicit bounds.
//!
//! Predictions are generic over [`TailLaw`], so the same evaluator serves a
//! model's increment tail, its unshifted `Y` tail, or a reference power tail.

use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{check, Error, Result};
use crate::excursion::CompensatedSum;
use crate::models::{GFunction, IncrementModel, TailLaw};

/// `e_tau · F̄(level)` in log space.
fn scaled_tail<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, level: f64) -> f64 {
    (e_tau.ln() + tail.log_tail(level)).exp()
}

/// `E τ · F̄(√(2ax))`.
pub fn area_tail_prediction<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, x: f64) -> f64 {
    scaled_tail(tail, e_tau, (2.0 * tail.drift() * x).sqrt())
}

/// `E τ · F̄(a t)`.
pub fn tau_tail_prediction<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, t: f64) -> f64 {
    scaled_tail(tail, e_tau, tail.drift() * t)
}

/// `E τ · F̄(y)`.
pub fn max_tail_prediction<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, y: f64) -> f64 {
    scaled_tail(tail, e_tau, y)
}

/// `k · F̄(y)`, the one-jump approximation of `P(M_k > y)`.
pub fn small_k_tail_prediction<T: TailLaw + ?Sized>(tail: &T, k: u64, y: f64) -> f64 {
    scaled_tail(tail, k as f64, y)
}

/// The exit-time tail evaluated at `t = √(2x/a)`.
///
/// The level `a t` is formed as `√(2ax)`, its exact algebraic value, so the
/// result coincides bit for bit with [`area_tail_prediction`].
pub fn conjecture_rhs<T: TailLaw + ?Sized>(tail: &T, e_tau: f64, x: f64) -> f64 {
    scaled_tail(tail, e_tau, (2.0 * tail.drift() * x).sqrt())
}

/// `√(2x/a)`, the exit time matching area `x`.
pub fn conjecture_time(a: f64, x: f64) -> f64 {
    (2.0 * x / a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    AreaTail,
    TauTail,
    MaxTail,
    SmallKTail,
    ConjectureRhs,
    Lemma31,
    Theorem12Upper,
    Theorem12LowerRef,
    GeometricSeries,
    BesselForm,
}

impl FormulaId {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormulaId::AreaTail => "area_tail",
            FormulaId::TauTail => "tau_tail",
            FormulaId::MaxTail => "max_tail",
            FormulaId::SmallKTail => "small_k_tail",
            FormulaId::ConjectureRhs => "conjecture_rhs",
            FormulaId::Lemma31 => "lemma31",
            FormulaId::Theorem12Upper => "theorem12_upper",
            FormulaId::Theorem12LowerRef => "theorem12_lower_ref",
            FormulaId::GeometricSeries => "geometric_series",
            FormulaId::BesselForm => "bessel_form",
        }
    }
}

/// Inputs and derived constants of a bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `g(y) / y`
    pub lambda: f64,
    /// `a/2 - C λ`
    pub i: f64,
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub n: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub value: f64,
    pub params: BoundParams,
    pub formula_id: FormulaId,
}

/// `a² + σ² + tail_constant + e`.
pub fn lemma31_constant(a: f64, variance: f64, tail_constant: f64) -> f64 {
    a * a + variance + tail_constant + std::f64::consts::E
}

fn require_g(model: &IncrementModel) -> Result<GFunction> {
    model
        .g
        .ok_or_else(|| Error::UnsupportedModel("bound needs a hazard function g".into()))
}

/// `exp{-λx/n - λan/2 + Cλ²n}` with `λ = g(y)/y` and the model's constants.
pub fn lemma31_bound(model: &IncrementModel, n: u64, x: f64, y: f64) -> Result<BoundEvaluation> {
    let g = require_g(model)?;
    lemma31_bound_with(&g, model.drift_a, model.variance, model.tail_constant, n, x, y)
}

pub fn lemma31_bound_with(
    g: &GFunction,
    a: f64,
    variance: f64,
    tail_constant: f64,
    n: u64,
    x: f64,
    y: f64,
) -> Result<BoundEvaluation> {
    check(n >= 1, "n", n as f64, "must be at least 1")?;
    check(x > 0.0, "x", x, "must be positive")?;
    check(y >= g.x_min, "y", y, "must lie in the domain of g")?;
    let c = lemma31_constant(a, variance, tail_constant);
    let lambda = g.eval(y) / y;
    let nf = n as f64;
    let value = (-lambda * x / nf - lambda * a * nf / 2.0 + c * lambda * lambda * nf).exp();
    Ok(BoundEvaluation {
        value,
        params: BoundParams {
            lambda,
            i: a / 2.0 - c * lambda,
            c,
            x,
            y,
            n: Some(n),
        },
        formula_id: FormulaId::Lemma31,
    })
}

/// Real maximiser `√(x / I)` of the bound over `n`, when `I > 0`.
pub fn lemma31_optimal_n(params: &BoundParams) -> Option<f64> {
    (params.i > 0.0).then(|| (params.x / params.i).sqrt())
}

/// `C x^{1/4} exp{-g(v) √(1 - 2C g(v) / (a v))}` with `v = √(2ax)`;
/// `+∞` where the radicand is not positive.
pub fn theorem12_upper(model: &IncrementModel, x: f64, c_env: f64) -> Result<f64> {
    let g = require_g(model)?;
    theorem12_upper_with(&g, model.drift_a, x, c_env)
}

pub fn theorem12_upper_with(g: &GFunction, a: f64, x: f64, c_env: f64) -> Result<f64> {
    check(x > 0.0, "x", x, "must be positive")?;
    check(c_env > 0.0, "c_env", c_env, "must be positive")?;
    let v = (2.0 * a * x).sqrt();
    let gv = g.eval(v);
    let radicand = 1.0 - 2.0 * c_env * gv / (a * v);
    if radicand <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(c_env * x.powf(0.25) * (-gv * radicand.sqrt()).exp())
}

/// `F̄(√(2ax) + C x^{1/4 + eps})`.
pub fn theorem12_lower_ref<T: TailLaw + ?Sized>(tail: &T, x: f64, c_env: f64, eps: f64) -> f64 {
    tail.tail((2.0 * tail.drift() * x).sqrt() + c_env * x.powf(0.25 + eps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricSeriesBound {
    /// `Σ_{n>=1} exp{-λx/n - λIn}`.
    pub exact_sum: f64,
    /// `e^{-λI} √(4x/I) K₁(2λ√(Ix))`.
    pub bessel_form: f64,
    /// `∫₀^∞` of the summand plus its maximum; a bound for any unimodal summand.
    pub unimodal_bound: f64,
}

pub fn geometric_series_bound(lambda: f64, i: f64, x: f64) -> Result<GeometricSeriesBound> {
    check(lambda > 0.0 && lambda.is_finite(), "lambda", lambda, "must be positive")?;
    check(i > 0.0 && i.is_finite(), "I", i, "must be positive")?;
    check(x > 0.0 && x.is_finite(), "x", x, "must be positive")?;
    let mode = (x / i).sqrt();
    let mut sum = CompensatedSum::default();
    let mut n = 1u64;
    loop {
        let nf = n as f64;
        let term = (-lambda * x / nf - lambda * i * nf).exp();
        sum.add(term);
        if nf > mode && (term < 1e-20 * sum.value() || term == 0.0) {
            break;
        }
        n += 1;
    }
    let z = 2.0 * lambda * (i * x).sqrt();
    let scaled = bessel::bessel_k1_scaled(z)?;
    let root = (4.0 * x / i).sqrt();
    let bessel_form = (-lambda * i - z).exp() * root * scaled;
    let integral = (-z).exp() * root * scaled;
    Ok(GeometricSeriesBound {
        exact_sum: sum.value(),
        bessel_form,
        unimodal_bound: integral + (-z).exp(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// `y ∈ [ε√x, √(2ax)]`
    RegvarA,
    /// `y ∈ [v - R v / g(v), v]` with `v = √(2ax)`
    SemiexpB,
}

/// Range of maximum levels `y` over which the joint tail is asserted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTailWindow {
    pub kind: WindowKind,
    pub epsilon: f64,
    #[serde(alias = "R")]
    pub r: f64,
}

impl JointTailWindow {
    pub fn validate(&self) -> Result<()> {
        check(self.epsilon > 0.0, "epsilon", self.epsilon, "must be positive")?;
        check(self.r > 0.0, "R", self.r, "must be positive")
    }

    /// Lower and upper edge of the window at area level `x`.
    pub fn bounds(&self, model: &IncrementModel, x: f64) -> Option<(f64, f64)> {
        let v = (2.0 * model.drift_a * x).sqrt();
        match self.kind {
            WindowKind::RegvarA => Some((self.epsilon * x.sqrt(), v)),
            WindowKind::SemiexpB => {
                let gv = model.g?.eval(v);
                (gv > 0.0).then(|| (v - self.r * v / gv, v))
            }
        }
    }

    pub fn contains(&self, model: &IncrementModel, x: f64, y: f64) -> bool {
        self.bounds(model, x).is_some_and(|(lo, hi)| lo <= y && y <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GShape, PowerTail};

    fn pareto_ref(a: f64) -> PowerTail {
        PowerTail { alpha: 3.0, drift_a: a }
    }

    #[test]
    fn area_prediction_reference_value() {
        let v = area_tail_prediction(&pareto_ref(0.5), 2.0, 50.0);
        assert!((v - 0.005_656_854_249_492_38).abs() < 1e-16);
    }

    #[test]
    fn saturated_tail_returns_e_tau() {
        let t = pareto_ref(0.5);
        assert_eq!(area_tail_prediction(&t, 2.0, 0.5), 2.0);
        assert_eq!(tau_tail_prediction(&t, 2.0, 1.0), 2.0);
    }

    #[test]
    fn predictions_are_linear_in_e_tau() {
        let t = pareto_ref(1.0);
        let one = area_tail_prediction(&t, 1.5, 80.0);
        let two = area_tail_prediction(&t, 3.0, 80.0);
        assert!((two / one - 2.0).abs() < 1e-14);
    }

    #[test]
    fn max_and_small_k_predictions() {
        let t = pareto_ref(1.0);
        assert!((max_tail_prediction(&t, 2.0, 10.0) - 0.002).abs() < 1e-17);
        assert_eq!(small_k_tail_prediction(&t, 1, 7.0), t.tail(7.0));
    }

    #[test]
    fn conjecture_time_examples() {
        assert_eq!(conjecture_time(2.0, 1.0), 1.0);
        assert!((conjecture_time(0.5, 50.0) - 200f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn conjecture_matches_unsimplified_evaluation() {
        let m = IncrementModel::weibull(0.3, 1.7).unwrap();
        for x in [3.0, 50.0, 1e3, 1e5] {
            let direct = tau_tail_prediction(&m, 2.2, conjecture_time(m.drift_a, x));
            let rhs = conjecture_rhs(&m, 2.2, x);
            assert_eq!(rhs, area_tail_prediction(&m, 2.2, x));
            assert!((direct / rhs - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma31_reference_value() {
        let g = GFunction::power(0.3);
        let b = lemma31_bound_with(&g, 1.0, 1.0, 1.0, 10, 500.0, 100.0).unwrap();
        assert!((b.params.lambda - 0.039_810_717_055_349_725).abs() < 1e-16);
        assert!((b.params.c - 5.718_281_828_459_045).abs() < 1e-14);
        assert!((b.value - 0.122_583_753_739_658_05).abs() < 1e-14);
        assert_eq!((b.params.x, b.params.y, b.params.n), (500.0, 100.0, Some(10)));
    }

    #[test]
    fn lemma31_with_zero_g_is_one() {
        let g = GFunction {
            shape: GShape::Zero,
            gamma0: 0.0,
            x_min: 1.0,
        };
        assert_eq!(lemma31_bound_with(&g, 1.0, 1.0, 1.0, 3, 10.0, 5.0).unwrap().value, 1.0);
    }

    #[test]
    fn lemma31_rejects_levels_outside_domain() {
        let m = IncrementModel::pareto(3.0, 1.0).unwrap();
        assert!(lemma31_bound(&m, 5, 100.0, 2.0).is_err());
        assert!(lemma31_bound(&IncrementModel::lattice(0.3).unwrap(), 5, 10.0, 2.0).is_err());
    }

    #[test]
    fn lemma31_peak_sits_at_optimal_n() {
        // The exponent is -λ(x/n + I n), so the bound is largest where
        // x/n + I n is smallest.
        let g = GFunction::power(0.3);
        for (x, y) in [(500.0, 100.0), (2000.0, 50.0), (1e4, 400.0)] {
            let values: Vec<(u64, f64)> = (1..2000)
                .map(|n| (n, lemma31_bound_with(&g, 1.0, 1.0, 1.0, n, x, y).unwrap().value))
                .collect();
            let (best, _) = values.iter().copied().fold((0, 0.0), |b, v| if v.1 > b.1 { v } else { b });
            let params = lemma31_bound_with(&g, 1.0, 1.0, 1.0, 1, x, y).unwrap().params;
            let star = lemma31_optimal_n(&params).unwrap();
            assert!((best as f64 - star).abs() <= 1.0, "x={x} y={y}: {best} vs {star}");
        }
    }

    #[test]
    fn theorem12_reference_value_and_vacuous_edge() {
        let g = GFunction::power(0.3);
        let v = theorem12_upper_with(&g, 1.0, 1e4, 1.0).unwrap();
        assert!((v - 0.138_831_718_731_263_03).abs() < 1e-13, "{v}");
        assert_eq!(theorem12_upper_with(&g, 1.0, 1.0, 10.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn theorem12_upper_decreases_on_grid() {
        let g = GFunction::power(0.3);
        let grid: Vec<f64> = (2..12).map(|k| 10f64.powi(k)).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| theorem12_upper_with(&g, 1.0, x, 1.0).unwrap()).collect();
        let finite: Vec<f64> = vals.into_iter().filter(|v| v.is_finite()).collect();
        assert!(finite.len() >= 5);
        assert!(finite[finite.len() - 5..].windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn geometric_series_reference_values() {
        let b = geometric_series_bound(0.1, 0.5, 100.0).unwrap();
        assert!((b.exact_sum - 8.886_870_880_202_772).abs() < 1e-12, "{}", b.exact_sum);
        assert!((b.bessel_form - 8.453_433_660_717_736).abs() < 1e-9, "{}", b.bessel_form);
    }

    #[test]
    fn unimodal_bound_dominates_sum_on_grid() {
        for lambda in [0.01, 0.1, 1.0] {
            for i in [0.1, 0.5] {
                for x in [10.0, 100.0, 1000.0] {
                    let b = geometric_series_bound(lambda, i, x).unwrap();
                    assert!(b.exact_sum <= b.unimodal_bound, "{lambda} {i} {x}: {b:?}");
                }
            }
        }
    }

    #[test]
    fn large_lambda_drives_both_forms_to_zero() {
        let b = geometric_series_bound(500.0, 0.5, 100.0).unwrap();
        assert!(b.exact_sum < 1e-300 && b.bessel_form < 1e-300);
    }

    #[test]
    fn windows() {
        let m = IncrementModel::weibull(0.3, 1.0).unwrap();
        let a = JointTailWindow {
            kind: WindowKind::RegvarA,
            epsilon: 0.5,
            r: 1.0,
        };
        assert!(a.contains(&m, 100.0, 10.0));
        assert!(!a.contains(&m, 100.0, 4.0));
        assert!(!a.contains(&m, 100.0, 15.0));
        let b = JointTailWindow {
            kind: WindowKind::SemiexpB,
            ..a
        };
        let (lo, hi) = b.bounds(&m, 1e4).unwrap();
        assert!(lo < hi && b.contains(&m, 1e4, hi));
        assert!(!b.contains(&IncrementModel::lattice(0.3).unwrap(), 10.0, 1.0));
    }
}
