//! Heavy-tailed increment laws.
//!
//! Every continuous model is `X = Y - c` where `Y >= 0` has an exact tail
//! `T_Y(t) = t^{-2} e^{-g(t)}` above a family threshold `t0` and a monotone
//! cubic completion of `-ln T_Y` on `[0, t0]`. The shift `c = E Y + a` makes
//! `E X = -a`. Tails are evaluated in log space throughout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::quad::{self, Tolerance};
use crate::rng;

const MOMENT_TOL: Tolerance = Tolerance::relative(1e-11);
const INVERSION_MAX_ITER: usize = 400;

/// Allowed ratio `T_Y(x) x^2 e^{g(x)}` on the asserted domain.
pub const TAIL_SLACK: f64 = 1.05;

/// Distribution family with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    Weibull { beta: f64 },
    Pareto { alpha: f64 },
    Lognormal { s: f64 },
    Lattice { p: f64 },
    /// `X ≡ -a`.
    Degenerate,
}

/// JSON form of a model: `{"family": ..., "params": {...}, "drift_a": ...}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_a: Option<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<IncrementModel> {
        let need_drift = || {
            self.drift_a.ok_or(Error::InvalidParameter {
                name: "drift_a",
                value: f64::NAN,
                reason: "required for this family",
            })
        };
        match self.family {
            Family::Weibull { beta } => IncrementModel::weibull(beta, need_drift()?),
            Family::Pareto { alpha } => IncrementModel::pareto(alpha, need_drift()?),
            Family::Lognormal { s } => IncrementModel::lognormal(s, need_drift()?),
            Family::Degenerate => IncrementModel::degenerate(self.drift_a.unwrap_or(1.0)),
            Family::Lattice { p } => {
                let m = IncrementModel::lattice(p)?;
                if let Some(a) = self.drift_a {
                    check((a - m.drift_a).abs() <= 1e-12, "drift_a", a, "lattice drift is fixed at 1 - 2p")?;
                }
                Ok(m)
            }
        }
    }
}

/// Shape of the hazard exponent `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum GShape {
    /// `x^beta`
    Power { beta: f64 },
    /// `coef * ln x`
    Log { coef: f64 },
    /// `(ln x)^2 / (2 s^2)`
    LogSquared { s: f64 },
    /// `g ≡ 0`; makes `λ = 0` reachable in bound evaluations.
    Zero,
}

/// Hazard exponent `g` with its declared exponent `γ₀` and the threshold
/// above which the class conditions are asserted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GFunction {
    pub shape: GShape,
    pub gamma0: f64,
    pub x_min: f64,
}

impl GFunction {
    pub fn power(beta: f64) -> Self {
        Self {
            shape: GShape::Power { beta },
            gamma0: beta,
            x_min: 1.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.shape {
            GShape::Power { beta } => x.powf(beta),
            GShape::Log { coef } => coef * x.ln(),
            GShape::LogSquared { s } => {
                let l = x.ln();
                l * l / (2.0 * s * s)
            }
            GShape::Zero => 0.0,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self.shape {
            GShape::Power { beta } => beta * x.powf(beta - 1.0),
            GShape::Log { coef } => coef / x,
            GShape::LogSquared { s } => x.ln() / (s * s * x),
            GShape::Zero => 0.0,
        }
    }
}

/// Right tail `P(X > x)` of an increment law, with log-space evaluation.
pub trait TailLaw: Sync {
    fn log_tail(&self, x: f64) -> f64;

    fn tail(&self, x: f64) -> f64 {
        self.log_tail(x).exp()
    }

    /// `a` in `E X = -a`.
    fn drift(&self) -> f64;

    /// Points where the tail is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Reference tail `min(1, t^{-alpha})` with a nominal drift, unshifted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerTail {
    pub alpha: f64,
    pub drift_a: f64,
}

impl TailLaw for PowerTail {
    fn log_tail(&self, x: f64) -> f64 {
        if x <= 1.0 {
            0.0
        } else {
            -self.alpha * x.ln()
        }
    }
    fn drift(&self) -> f64 {
        self.drift_a
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![1.0]
    }
}

/// `-ln T_Y` for the continuous families.
#[derive(Clone, Copy, Debug, PartialEq)]
enum LogTailY {
    /// Hermite completion on `[0, t0]`, then `g(t) + 2 ln t`.
    Completed { g: GFunction, t0: f64, l0: f64, m1: f64 },
    /// `alpha ln t` above 1, zero below.
    Pareto { alpha: f64 },
    /// `Y ≡ 0`.
    PointMass,
}

impl LogTailY {
    fn completed(g: GFunction, t0: f64) -> Self {
        let l0 = g.eval(t0) + 2.0 * t0.ln();
        let m1 = t0 * g.deriv(t0) + 2.0;
        debug_assert!(m1 <= 3.0 * l0, "Hermite completion must stay monotone");
        Self::Completed { g, t0, l0, m1 }
    }

    fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Completed { g, t0, l0, m1 } => {
                if t <= 0.0 {
                    0.0
                } else if t < t0 {
                    let u = t / t0;
                    u * u * ((3.0 * l0 - m1) + u * (m1 - 2.0 * l0))
                } else {
                    g.eval(t) + 2.0 * t.ln()
                }
            }
            Self::Pareto { alpha } => {
                if t <= 1.0 {
                    0.0
                } else {
                    alpha * t.ln()
                }
            }
            Self::PointMass => {
                if t < 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        match *self {
            Self::Completed { g, t0, l0, m1 } => {
                if t <= 0.0 {
                    0.0
                } else if t < t0 {
                    let u = t / t0;
                    (l0 * 6.0 * u * (1.0 - u) + m1 * (3.0 * u * u - 2.0 * u)) / t0
                } else {
                    g.deriv(t) + 2.0 / t
                }
            }
            Self::Pareto { alpha } => {
                if t <= 1.0 {
                    0.0
                } else {
                    alpha / t
                }
            }
            Self::PointMass => 0.0,
        }
    }

    fn threshold(&self) -> f64 {
        match *self {
            Self::Completed { t0, .. } => t0,
            Self::Pareto { .. } => 1.0,
            Self::PointMass => 0.0,
        }
    }

    /// Solves `-ln T_Y(t) = level` for `t`.
    fn invert(&self, level: f64) -> Result<f64> {
        if !(level >= 0.0) || level.is_infinite() {
            return Err(Error::InversionFailed {
                level,
                iterations: 0,
            });
        }
        match *self {
            Self::Pareto { alpha } => Ok((level / alpha).exp()),
            Self::PointMass => Ok(0.0),
            Self::Completed { t0, l0, .. } => {
                if level == 0.0 {
                    Ok(0.0)
                } else if level <= l0 {
                    // Cubic on [0, t0].
                    newton_bisect(|t| self.eval(t) - level, |t| self.deriv(t), 0.0, t0, level)
                } else {
                    // Work in s = ln t where the log-tail grows like a convex function.
                    let phi = |s: f64| self.eval(s.exp()) - level;
                    let dphi = |s: f64| {
                        let t = s.exp();
                        t * self.deriv(t)
                    };
                    let lo = t0.ln();
                    let mut step = 1.0;
                    let mut hi = lo + step;
                    while phi(hi) < 0.0 {
                        step *= 2.0;
                        hi = lo + step;
                        if step > 1e6 {
                            return Err(Error::InversionFailed {
                                level,
                                iterations: 0,
                            });
                        }
                    }
                    newton_bisect(phi, dphi, lo, hi, level).map(f64::exp)
                }
            }
        }
    }
}

/// Safeguarded Newton iteration for an increasing function with a sign change
/// on `[lo, hi]`.
fn newton_bisect<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, level: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..INVERSION_MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let scale = next.abs().max(1e-300);
        if (next - x).abs() <= 1e-15 * scale || (hi - lo) <= 1e-15 * scale {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::InversionFailed {
        level,
        iterations: INVERSION_MAX_ITER,
    })
}

/// An increment law `X = Y - c` (or the two-point lattice law).
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementModel {
    spec: ModelSpec,
    log_tail_y: LogTailY,
    /// `None` for the lattice and degenerate laws.
    pub g: Option<GFunction>,
    /// `a` with `E X = -a`.
    pub drift_a: f64,
    /// `Var X`.
    pub variance: f64,
    /// `c` with `X = Y - c`.
    pub shift_c: f64,
    /// `E Y`.
    pub mean_y: f64,
    /// Supremum of `P(X > t) t^2 e^{g(t)}` for `t >= g.x_min`, floored at 1.
    pub tail_constant: f64,
    /// Supremum of the finite absolute moment orders (exclusive for Pareto).
    pub kappa: f64,
    lattice_p: Option<f64>,
}

impl IncrementModel {
    fn continuous(spec: ModelSpec, log_tail_y: LogTailY, g: Option<GFunction>, drift_a: f64, kappa: f64) -> Result<Self> {
        check(drift_a > 0.0 && drift_a.is_finite(), "drift_a", drift_a, "must be positive")?;
        let t0 = log_tail_y.threshold();
        let ty = |t: f64| (-log_tail_y.eval(t)).exp();
        let (mean_y, second_y) = match log_tail_y {
            LogTailY::PointMass => (0.0, 0.0),
            _ => {
                let m1 = quad::integrate(ty, 0.0, t0, MOMENT_TOL)?.value
                    + quad::integrate_to_infinity(ty, t0, MOMENT_TOL)?.value;
                let m2 = quad::integrate(|t| 2.0 * t * ty(t), 0.0, t0, MOMENT_TOL)?.value
                    + quad::integrate_to_infinity(|t| 2.0 * t * ty(t), t0, MOMENT_TOL)?.value;
                (m1, m2)
            }
        };
        let shift_c = mean_y + drift_a;
        let mut model = Self {
            spec,
            log_tail_y,
            g,
            drift_a,
            variance: (second_y - mean_y * mean_y).max(0.0),
            shift_c,
            mean_y,
            tail_constant: 1.0,
            kappa,
            lattice_p: None,
        };
        model.tail_constant = model.measure_tail_constant();
        Ok(model)
    }

    fn measure_tail_constant(&self) -> f64 {
        let Some(g) = self.g else { return 1.0 };
        let lo = g.x_min.max(1e-12).ln();
        let hi = (g.x_min.max(1.0) * 1e8).ln();
        let steps = 2000;
        (0..=steps)
            .map(|i| {
                let t = (lo + (hi - lo) * i as f64 / steps as f64).exp();
                (self.log_tail(t) + 2.0 * t.ln() + g.eval(t)).exp()
            })
            .fold(1.0, f64::max)
    }

    /// Weibull-type law with `g(x) = x^beta`, threshold 1.
    pub fn weibull(beta: f64, drift_a: f64) -> Result<Self> {
        check(beta > 0.0 && beta < 1.0, "beta", beta, "must lie in (0, 1)")?;
        let g = GFunction::power(beta);
        Self::continuous(
            ModelSpec {
                family: Family::Weibull { beta },
                drift_a: Some(drift_a),
            },
            LogTailY::completed(g, 1.0),
            Some(g),
            drift_a,
            f64::INFINITY,
        )
    }

    /// Pure power law `T_Y(t) = t^{-alpha}` on `t >= 1`.
    pub fn pareto(alpha: f64, drift_a: f64) -> Result<Self> {
        check(alpha > 2.0 && alpha.is_finite(), "alpha", alpha, "must exceed 2 (finite variance)")?;
        // g(x)/x^γ₀ decreases once ln x >= 1/γ₀.
        let gamma0 = 0.4;
        let g = GFunction {
            shape: GShape::Log { coef: alpha - 2.0 },
            gamma0,
            x_min: (1.0 / gamma0).exp(),
        };
        Self::continuous(
            ModelSpec {
                family: Family::Pareto { alpha },
                drift_a: Some(drift_a),
            },
            LogTailY::Pareto { alpha },
            Some(g),
            drift_a,
            alpha,
        )
    }

    /// Log-normal-type law with `g(x) = (ln x)^2 / (2 s^2)`, threshold `e`.
    pub fn lognormal(s: f64, drift_a: f64) -> Result<Self> {
        check(s > 0.0 && s.is_finite(), "s", s, "must be positive")?;
        // x g'(x) / g(x) = 2 / ln x, which is <= γ₀ once ln x >= 2/γ₀.
        let gamma0 = 0.4;
        let g = GFunction {
            shape: GShape::LogSquared { s },
            gamma0,
            x_min: (2.0 / gamma0).exp(),
        };
        Self::continuous(
            ModelSpec {
                family: Family::Lognormal { s },
                drift_a: Some(drift_a),
            },
            LogTailY::completed(g, std::f64::consts::E),
            Some(g),
            drift_a,
            f64::INFINITY,
        )
    }

    /// `X ≡ -a`.
    pub fn degenerate(drift_a: f64) -> Result<Self> {
        Self::continuous(
            ModelSpec {
                family: Family::Degenerate,
                drift_a: Some(drift_a),
            },
            LogTailY::PointMass,
            None,
            drift_a,
            f64::INFINITY,
        )
    }

    /// `X = +1` with probability `p`, `-1` otherwise.
    pub fn lattice(p: f64) -> Result<Self> {
        check(p > 0.0 && p < 0.5, "p", p, "must lie in (0, 1/2)")?;
        let drift_a = 1.0 - 2.0 * p;
        Ok(Self {
            spec: ModelSpec {
                family: Family::Lattice { p },
                drift_a: None,
            },
            log_tail_y: LogTailY::PointMass,
            g: None,
            drift_a,
            variance: 1.0 - drift_a * drift_a,
            shift_c: 0.0,
            mean_y: 0.0,
            tail_constant: 1.0,
            kappa: f64::INFINITY,
            lattice_p: Some(p),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn lattice_p(&self) -> Option<f64> {
        self.lattice_p
    }

    /// Whether the law has a continuous tail that can be conditioned on `Y > b`.
    pub fn has_tiltable_tail(&self) -> bool {
        self.lattice_p.is_none() && !matches!(self.log_tail_y, LogTailY::PointMass)
    }

    /// Threshold above which `T_Y(t) = t^{-2} e^{-g(t)}` holds exactly.
    pub fn tail_threshold(&self) -> f64 {
        self.log_tail_y.threshold()
    }

    /// `ln P(Y > t)`.
    pub fn log_tail_y(&self, t: f64) -> f64 {
        -self.log_tail_y.eval(t)
    }

    pub fn tail_y(&self, t: f64) -> f64 {
        self.log_tail_y(t).exp()
    }

    /// The unshifted tail of `Y`, carrying this model's drift.
    pub fn unshifted(&self) -> UnshiftedTail<'_> {
        UnshiftedTail(self)
    }

    /// Quantile of `Y` at upper-tail probability `e^{-level}`.
    pub fn y_at_log_level(&self, level: f64) -> Result<f64> {
        self.log_tail_y.invert(level)
    }

    /// Inverse-transform draw from a uniform `u`. For continuous laws `u` is
    /// the upper-tail probability `P(Y > y)`, in `(0, 1]`; the lattice law maps
    /// `u < p` to `+1`.
    pub fn increment_from_uniform(&self, u: f64) -> Result<f64> {
        if let Some(p) = self.lattice_p {
            return Ok(if u < p { 1.0 } else { -1.0 });
        }
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "u",
                value: u,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(self.y_at_log_level(-u.ln())? - self.shift_c)
    }

    /// One draw of `X`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let Some(p) = self.lattice_p {
            return if rng::unit(rng) < p { 1.0 } else { -1.0 };
        }
        let level = -rng::open_unit(rng).ln();
        self.log_tail_y
            .invert(level)
            .expect("inversion of a validated monotone tail converges")
            - self.shift_c
    }

    /// Draw of `Y` conditioned on `Y > b`, returned as `X = Y - c`.
    pub fn sample_exceeding<R: Rng + ?Sized>(&self, b: f64, rng: &mut R) -> f64 {
        let level = self.log_tail_y.eval(b) - rng::open_unit(rng).ln();
        self.log_tail_y
            .invert(level)
            .expect("inversion of a validated monotone tail converges")
            - self.shift_c
    }
}

impl TailLaw for IncrementModel {
    fn log_tail(&self, x: f64) -> f64 {
        if let Some(p) = self.lattice_p {
            return if x < -1.0 {
                0.0
            } else if x < 1.0 {
                p.ln()
            } else {
                f64::NEG_INFINITY
            };
        }
        -self.log_tail_y.eval(x + self.shift_c)
    }

    fn drift(&self) -> f64 {
        self.drift_a
    }

    fn breakpoints(&self) -> Vec<f64> {
        if self.lattice_p.is_some() {
            vec![-1.0, 1.0]
        } else {
            vec![self.tail_threshold() - self.shift_c]
        }
    }
}

/// Tail of `Y` (no shift) viewed as an increment tail.
#[derive(Clone, Copy, Debug)]
pub struct UnshiftedTail<'a>(&'a IncrementModel);

impl TailLaw for UnshiftedTail<'_> {
    fn log_tail(&self, x: f64) -> f64 {
        self.0.log_tail_y(x)
    }
    fn drift(&self) -> f64 {
        self.0.drift_a
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.0.tail_threshold()]
    }
}

/// Pass/fail per class condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub sc1: bool,
    pub sc2: bool,
    pub sc3: bool,
    pub sc4: bool,
    pub sc5: bool,
}

/// Margins of the class conditions on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub grid: Vec<f64>,
    /// Largest of `r` and `1/r` for `r = T_Y(x) x^2 e^{g(x)}`.
    pub sc1_slack: f64,
    /// Smallest relative decrease of `g(x)/x^γ₀` between neighbours.
    pub sc2_monotone_margin: f64,
    /// Smallest value of `γ₀ - x g'(x) / g(x)`.
    pub sc3_margin: f64,
    /// `x g'(x)` on the grid.
    pub sc4_trend: Vec<f64>,
    /// `g(x) / ln x` on the grid.
    pub sc5_trend: Vec<f64>,
    pub verdict: ConditionVerdict,
}

/// Strict increase over the upper half of the grid.
fn eventually_increasing(v: &[f64]) -> bool {
    let start = v.len() / 2;
    let tail = &v[start.min(v.len().saturating_sub(2))..];
    tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-12) && w[1].is_finite())
}

impl ClassReport {
    pub fn verdict_from_margins(&self) -> ConditionVerdict {
        ConditionVerdict {
            sc1: self.sc1_slack <= TAIL_SLACK,
            sc2: self.sc2_monotone_margin >= -1e-12,
            sc3: self.sc3_margin >= -1e-9,
            sc4: eventually_increasing(&self.sc4_trend),
            sc5: eventually_increasing(&self.sc5_trend),
        }
    }
}

/// Evaluates the class conditions on a strictly increasing grid above
/// `g.x_min`.
pub fn validate_class(model: &IncrementModel, grid: &[f64]) -> Result<ClassReport> {
    let g = model
        .g
        .ok_or_else(|| Error::UnsupportedModel("class conditions need a hazard function g".into()))?;
    check(grid.len() >= 2, "grid", grid.len() as f64, "needs at least two points")?;
    for w in grid.windows(2) {
        check(w[1] > w[0], "grid", w[1], "must be strictly increasing")?;
    }
    check(grid[0] >= g.x_min, "grid", grid[0], "must start at or above g.x_min")?;

    let sc1_slack = grid
        .iter()
        .map(|&x| {
            let log_r = model.log_tail_y(x) + 2.0 * x.ln() + g.eval(x);
            log_r.abs().exp()
        })
        .fold(1.0, f64::max);
    let scaled: Vec<f64> = grid.iter().map(|&x| g.eval(x) / x.powf(g.gamma0)).collect();
    let sc2_monotone_margin = scaled
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let sc3_margin = grid
        .iter()
        .map(|&x| g.gamma0 - x * g.deriv(x) / g.eval(x))
        .fold(f64::INFINITY, f64::min);
    let sc4_trend = grid.iter().map(|&x| x * g.deriv(x)).collect();
    let sc5_trend = grid.iter().map(|&x| g.eval(x) / x.ln()).collect();

    let mut report = ClassReport {
        grid: grid.to_vec(),
        sc1_slack,
        sc2_monotone_margin,
        sc3_margin,
        sc4_trend,
        sc5_trend,
        verdict: ConditionVerdict {
            sc1: false,
            sc2: false,
            sc3: false,
            sc4: false,
            sc5: false,
        },
    };
    report.verdict = report.verdict_from_margins();
    Ok(report)
}
