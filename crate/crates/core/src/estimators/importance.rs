//! Defensive-mixture importance sampling.
//!
//! While armed, each increment is drawn from `(1-w) law(X) + w law(X | Y > b)`.
//! The per-step likelihood ratio depends only on whether the drawn `Y`
//! exceeds `b`:
//!
//! ```text
//! Y <= b :  1 / (1 - w)
//! Y >  b :  1 / (1 - w + w / T_Y(b))
//! ```
//!
//! With [`TiltPolicy::UntilFirstExceedance`] the sampler disarms after the
//! first `Y > b` and later increments are nominal. The switch depends only on
//! the observed path, so the product of per-step ratios is still the exact
//! likelihood ratio.

use serde::{Deserialize, Serialize};

use super::{run_probes, Method, Probes, Sampler, TailEstimate};
use crate::error::{check, Result};
use crate::excursion::{IncrementSource, SimConfig};
use crate::models::IncrementModel;
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltPolicy {
    /// Mixture on every step of the excursion.
    EveryStep,
    /// Mixture until the first increment with `Y > b`, nominal afterwards.
    #[default]
    UntilFirstExceedance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ISConfig {
    /// Probability `w` of a tilted draw.
    pub mixture_weight: f64,
    /// `b`: tilted draws are `Y | Y > b`.
    pub tilt_threshold: f64,
    #[serde(default)]
    pub policy: TiltPolicy,
}

impl ISConfig {
    pub const DEFAULT_WEIGHT: f64 = 0.05;

    /// `w = 0.05`, `b = √(2ax) / 4`.
    pub fn for_area_level(model: &IncrementModel, x: f64) -> Self {
        Self {
            mixture_weight: Self::DEFAULT_WEIGHT,
            tilt_threshold: (2.0 * model.drift_a * x).sqrt() / 4.0,
            policy: TiltPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.mixture_weight;
        check(w > 0.0 && w < 1.0, "mixture_weight", w, "must lie strictly inside (0, 1)")?;
        check(
            self.tilt_threshold > 0.0 && self.tilt_threshold.is_finite(),
            "tilt_threshold",
            self.tilt_threshold,
            "must be positive",
        )
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Increment source drawing from the defensive mixture and accumulating the
/// log likelihood ratio.
pub struct MixtureSource<'a> {
    model: &'a IncrementModel,
    rng: Stream,
    weight: f64,
    threshold: f64,
    policy: TiltPolicy,
    armed: bool,
    log_ratio_below: f64,
    log_ratio_above: f64,
    log_lr: f64,
}

impl<'a> MixtureSource<'a> {
    pub fn new(model: &'a IncrementModel, config: &ISConfig, rng: Stream) -> Self {
        let w = config.mixture_weight;
        let log_tail_b = model.log_tail_y(config.tilt_threshold);
        Self {
            model,
            rng,
            weight: w,
            threshold: config.tilt_threshold,
            policy: config.policy,
            armed: true,
            log_ratio_below: -(1.0 - w).ln(),
            log_ratio_above: -log_add_exp((1.0 - w).ln(), w.ln() - log_tail_b),
            log_lr: 0.0,
        }
    }

    pub fn log_likelihood_ratio(&self) -> f64 {
        self.log_lr
    }
}

impl IncrementSource for MixtureSource<'_> {
    #[inline]
    fn next_increment(&mut self) -> f64 {
        if !self.armed {
            return self.model.sample(&mut self.rng);
        }
        let x = if rng::unit(&mut self.rng) < self.weight {
            self.model.sample_exceeding(self.threshold, &mut self.rng)
        } else {
            self.model.sample(&mut self.rng)
        };
        if x + self.model.shift_c > self.threshold {
            self.log_lr += self.log_ratio_above;
            if self.policy == TiltPolicy::UntilFirstExceedance {
                self.armed = false;
            }
        } else {
            self.log_lr += self.log_ratio_below;
        }
        x
    }
}

/// Importance-sampled estimates of every probe in `probes` on one pass.
pub fn is_mixture_tail(
    model: &IncrementModel,
    probes: &Probes,
    n: u64,
    config: &SimConfig,
    is_config: &ISConfig,
) -> Result<super::McSummary> {
    run_probes(model, config, n, probes, &Sampler::Mixture(*is_config))
}

/// Importance-sampled `P(A_τ > x, τ <= max_steps)`.
pub fn is_mixture_area_tail(
    model: &IncrementModel,
    x: f64,
    n: u64,
    config: &SimConfig,
    is_config: &ISConfig,
) -> Result<TailEstimate> {
    check(x > 0.0, "x", x, "must be positive")?;
    let probes = Probes {
        area: vec![x],
        ..Probes::default()
    };
    let s = is_mixture_tail(model, &probes, n, config, is_config)?;
    Ok(s.estimate(&s.area[0], Method::IsMixture))
}
