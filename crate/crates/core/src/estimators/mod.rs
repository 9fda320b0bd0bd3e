//! Rare-event estimators for excursion functionals.
//!
//! Every Monte Carlo estimator here is a view of one coupled pass over
//! stream indices `0..n` (see [`run_probes`]): all thresholds of a pass share
//! the same sample, so estimates at different thresholds are monotone and
//! nested exactly as the underlying events are.

mod importance;
mod lattice;
mod naive;

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::excursion::{run_walk, ExcursionOutcome, ModelSource, SimConfig};
use crate::exec;
use crate::models::IncrementModel;
use crate::rng;

pub use importance::{is_mixture_area_tail, is_mixture_tail, ISConfig, MixtureSource, TiltPolicy};
pub use lattice::{dp_exact_lattice, LatticeCaps, LatticeDp};
pub use naive::{
    capped_area_tail, estimate_e_tau, joint_tail, naive_mc_area_tail, naive_mc_max_tail, naive_mc_tau_tail,
    sigma_y_conditional_law, CappedAreaEstimate, EtauEstimate, JointTail, SigmaLaw,
};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    IsMixture,
    DpExact,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::IsMixture => "is_mixture",
            Method::DpExact => "dp_exact",
        }
    }
}

/// Point estimate of a probability with its sampling uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    /// Normal interval; the upper edge also carries the worst-case mass of
    /// truncated samples.
    pub ci95: (f64, f64),
    pub n: u64,
    pub method: Method,
    pub truncated_count: u64,
}

impl TailEstimate {
    pub fn exact(p: f64) -> Self {
        Self {
            p_hat: p,
            stderr: 0.0,
            ci95: (p, p),
            n: 0,
            method: Method::DpExact,
            truncated_count: 0,
        }
    }

    fn from_tally(tally: &Tally, denominator: u64, total: u64, truncated: u64, method: Method) -> Self {
        let (mean, se) = tally.mean_and_stderr(denominator);
        let slack = truncated as f64 / total.max(1) as f64;
        Self {
            p_hat: mean,
            stderr: se,
            ci95: ((mean - Z95 * se).max(0.0), mean + Z95 * se + slack),
            n: total,
            method,
            truncated_count: truncated,
        }
    }

    /// Whether `value` is within `k` standard errors of the estimate.
    pub fn within_stderr(&self, value: f64, k: f64) -> bool {
        (self.p_hat - value).abs() <= k * self.stderr
    }
}

/// Running sums of a per-sample contribution `Z` and of `Z²`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub sum: f64,
    pub sum_sq: f64,
}

impl Tally {
    #[inline]
    pub fn add(&mut self, z: f64) {
        self.sum += z;
        self.sum_sq += z * z;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Sample mean over `n` samples (non-contributing samples count as zero)
    /// and the standard error of that mean.
    pub fn mean_and_stderr(&self, n: u64) -> (f64, f64) {
        if n == 0 {
            return (f64::NAN, f64::NAN);
        }
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = (self.sum_sq / nf - mean * mean).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

/// Sampling law for the increments of a pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampler {
    Naive,
    Mixture(ISConfig),
}

/// `σ_y` tracking request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaProbe {
    pub level: f64,
    pub k_max: usize,
}

/// Thresholds evaluated on one coupled pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Probes {
    /// `{A_τ > x}`
    pub area: Vec<f64>,
    /// `{τ > t}`
    pub tau: Vec<f64>,
    /// `{M_τ > y}`
    pub max: Vec<f64>,
    /// `{A_τ > x, M_τ > y}`
    pub joint: Vec<(f64, f64)>,
    pub sigma: Option<SigmaProbe>,
    /// Number of `k = 0, 1, ...` for which `τ > k` is tallied.
    pub tau_survival_len: usize,
}

/// Accumulated statistics of a pass. Every tally is weighted by the sample's
/// likelihood ratio (one for naive sampling).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct McSummary {
    pub n: u64,
    pub truncated: u64,
    pub area: Vec<Tally>,
    pub tau: Vec<Tally>,
    pub max: Vec<Tally>,
    pub joint: Vec<Tally>,
    /// Weighted counts of `τ > k`, `k = 0..tau_survival_len`.
    pub tau_survival: Vec<f64>,
    /// Weighted counts of `σ_y = k`, `k = 1..=k_max`.
    pub sigma: Vec<f64>,
    pub sigma_beyond: f64,
    /// Unweighted number of samples with `M_τ > y`.
    pub sigma_events: u64,
    pub tau_moments: Tally,
    pub exit_moments: Tally,
    /// Tally of `S_τ + a τ` (zero mean by Wald's identity).
    pub wald_gap: Tally,
}

impl McSummary {
    fn empty(probes: &Probes) -> Self {
        Self {
            area: vec![Tally::default(); probes.area.len()],
            tau: vec![Tally::default(); probes.tau.len()],
            max: vec![Tally::default(); probes.max.len()],
            joint: vec![Tally::default(); probes.joint.len()],
            tau_survival: vec![0.0; probes.tau_survival_len],
            sigma: vec![0.0; probes.sigma.map_or(0, |s| s.k_max)],
            ..Self::default()
        }
    }

    fn record(&mut self, probes: &Probes, drift_a: f64, o: &ExcursionOutcome, weight: f64) {
        self.n += 1;
        if o.truncated {
            self.truncated += 1;
            return;
        }
        let ind = |b: bool| if b { weight } else { 0.0 };
        for (t, &x) in self.area.iter_mut().zip(&probes.area) {
            t.add(ind(o.area > x));
        }
        for (t, &s) in self.tau.iter_mut().zip(&probes.tau) {
            t.add(ind(o.tau as f64 > s));
        }
        for (t, &y) in self.max.iter_mut().zip(&probes.max) {
            t.add(ind(o.max > y));
        }
        for (t, &(x, y)) in self.joint.iter_mut().zip(&probes.joint) {
            t.add(ind(o.area > x && o.max > y));
        }
        let reach = (o.tau as usize).min(self.tau_survival.len());
        for s in &mut self.tau_survival[..reach] {
            *s += weight;
        }
        if let Some(sp) = probes.sigma {
            if let Some(Some(k)) = o.sigma_y.first() {
                self.sigma_events += 1;
                let k = *k as usize;
                if k <= sp.k_max {
                    self.sigma[k - 1] += weight;
                } else {
                    self.sigma_beyond += weight;
                }
            }
        }
        let tau = o.tau as f64;
        self.tau_moments.add(weight * tau);
        self.exit_moments.add(weight * o.exit_value);
        self.wald_gap.add(weight * (o.exit_value + drift_a * tau));
    }

    fn merge(&mut self, other: McSummary) {
        self.n += other.n;
        self.truncated += other.truncated;
        let pairs = [
            (&mut self.area, &other.area),
            (&mut self.tau, &other.tau),
            (&mut self.max, &other.max),
            (&mut self.joint, &other.joint),
        ];
        for (mine, theirs) in pairs {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.merge(b);
            }
        }
        for (a, b) in self.tau_survival.iter_mut().zip(&other.tau_survival) {
            *a += b;
        }
        for (a, b) in self.sigma.iter_mut().zip(&other.sigma) {
            *a += b;
        }
        self.sigma_beyond += other.sigma_beyond;
        self.sigma_events += other.sigma_events;
        self.tau_moments.merge(&other.tau_moments);
        self.exit_moments.merge(&other.exit_moments);
        self.wald_gap.merge(&other.wald_gap);
    }

    /// Samples that reached the exit.
    pub fn completed(&self) -> u64 {
        self.n - self.truncated
    }

    /// Denominator of the estimator: completed samples for naive sampling,
    /// all samples for importance sampling (truncated paths contribute zero).
    pub fn denominator(&self, method: Method) -> u64 {
        match method {
            Method::IsMixture => self.n,
            _ => self.completed(),
        }
    }

    pub fn estimate(&self, tally: &Tally, method: Method) -> TailEstimate {
        TailEstimate::from_tally(tally, self.denominator(method), self.n, self.truncated, method)
    }
}

fn simulate_with(model: &IncrementModel, config: &SimConfig, sampler: &Sampler, index: u64) -> (ExcursionOutcome, f64) {
    let rng = rng::stream(config.seed, index);
    match sampler {
        Sampler::Naive => {
            let mut source = ModelSource { model, rng };
            (run_walk(&mut source, config.max_steps, &config.levels), 1.0)
        }
        Sampler::Mixture(is) => {
            let mut source = MixtureSource::new(model, is, rng);
            let o = run_walk(&mut source, config.max_steps, &config.levels);
            (o, source.log_likelihood_ratio().exp())
        }
    }
}

/// One coupled pass over stream indices `0..n`.
pub fn run_probes(model: &IncrementModel, config: &SimConfig, n: u64, probes: &Probes, sampler: &Sampler) -> Result<McSummary> {
    config.validate()?;
    check(n >= 1, "n", n as f64, "must be at least 1")?;
    if let Sampler::Mixture(is) = sampler {
        is.validate()?;
        if !model.has_tiltable_tail() {
            return Err(Error::UnsupportedModel(
                "importance sampling needs a continuous tail to condition on".into(),
            ));
        }
    }
    if let Some(sp) = probes.sigma {
        check(sp.k_max >= 1, "k_max", sp.k_max as f64, "must be at least 1")?;
    }
    let mut local = config.clone();
    local.levels = probes.sigma.map(|s| vec![s.level]).unwrap_or_default();
    let summary = exec::fold_indexed(
        n,
        config.execution,
        || McSummary::empty(probes),
        |acc, i| {
            let (o, w) = simulate_with(model, &local, sampler, i);
            acc.record(probes, model.drift_a, &o, w);
        },
        McSummary::merge,
    );
    if summary.completed() == 0 {
        return Err(Error::AllTruncated(summary.n));
    }
    Ok(summary)
}
