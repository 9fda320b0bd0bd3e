//! Crude Monte Carlo views of a coupled pass.

use serde::{Deserialize, Serialize};

use super::{run_probes, Method, Probes, Sampler, SigmaProbe, TailEstimate, Tally};
use crate::asymptotics::JointTailWindow;
use crate::error::{check, Error, Result};
use crate::excursion::SimConfig;
use crate::exec;
use crate::models::IncrementModel;
use crate::rng;

fn single(model: &IncrementModel, probes: Probes, n: u64, config: &SimConfig) -> Result<TailEstimate> {
    let s = run_probes(model, config, n, &probes, &Sampler::Naive)?;
    let tally = s
        .area
        .first()
        .or(s.tau.first())
        .or(s.max.first())
        .or(s.joint.first())
        .expect("one probe requested");
    Ok(s.estimate(tally, Method::Naive))
}

/// Fraction of completed excursions with `A_τ > x`.
pub fn naive_mc_area_tail(model: &IncrementModel, x: f64, n: u64, config: &SimConfig) -> Result<TailEstimate> {
    check(x > 0.0, "x", x, "must be positive")?;
    single(
        model,
        Probes {
            area: vec![x],
            ..Probes::default()
        },
        n,
        config,
    )
}

/// Fraction of completed excursions with `τ > t`.
pub fn naive_mc_tau_tail(model: &IncrementModel, t: f64, n: u64, config: &SimConfig) -> Result<TailEstimate> {
    check(t > 0.0, "t", t, "must be positive")?;
    single(
        model,
        Probes {
            tau: vec![t],
            ..Probes::default()
        },
        n,
        config,
    )
}

/// Fraction of completed excursions with `M_τ > y`. `y = 0` is allowed.
pub fn naive_mc_max_tail(model: &IncrementModel, y: f64, n: u64, config: &SimConfig) -> Result<TailEstimate> {
    check(y >= 0.0, "y", y, "must be nonnegative")?;
    single(
        model,
        Probes {
            max: vec![y],
            ..Probes::default()
        },
        n,
        config,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTail {
    pub estimate: TailEstimate,
    /// Whether `y` lies in the window where the joint asymptotics is asserted.
    pub in_window: bool,
}

/// `P(A_τ > x, M_τ > y)`, flagged against the validity window.
pub fn joint_tail(
    model: &IncrementModel,
    x: f64,
    y: f64,
    n: u64,
    config: &SimConfig,
    window: &JointTailWindow,
) -> Result<JointTail> {
    check(x > 0.0, "x", x, "must be positive")?;
    check(y >= 0.0, "y", y, "must be nonnegative")?;
    let estimate = single(
        model,
        Probes {
            joint: vec![(x, y)],
            ..Probes::default()
        },
        n,
        config,
    )?;
    Ok(JointTail {
        estimate,
        in_window: window.contains(model, x, y),
    })
}

/// Mean exit time with a Wald-identity cross-check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtauEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `mean(S_τ) / (-a)`.
    pub wald_mean: f64,
    pub wald_stderr: f64,
    /// `mean(S_τ) + a mean(τ)`, zero in expectation.
    pub wald_gap: f64,
    pub wald_gap_stderr: f64,
    pub n: u64,
    pub truncated_count: u64,
}

impl EtauEstimate {
    pub(crate) fn from_summary(s: &super::McSummary, drift_a: f64) -> Self {
        let m = s.completed();
        let (mean, stderr) = s.tau_moments.mean_and_stderr(m);
        let (exit, exit_se) = s.exit_moments.mean_and_stderr(m);
        let (gap, gap_se) = s.wald_gap.mean_and_stderr(m);
        Self {
            mean,
            stderr,
            wald_mean: -exit / drift_a,
            wald_stderr: exit_se / drift_a,
            wald_gap: gap,
            wald_gap_stderr: gap_se,
            n: s.n,
            truncated_count: s.truncated,
        }
    }
}

pub fn estimate_e_tau(model: &IncrementModel, n: u64, config: &SimConfig) -> Result<EtauEstimate> {
    let s = run_probes(model, config, n, &Probes::default(), &Sampler::Naive)?;
    Ok(EtauEstimate::from_summary(&s, model.drift_a))
}

/// Empirical law of `σ_y` given `M_τ > y`, next to the limit law
/// `q_k = P(τ > k-1) / E τ` estimated from the same pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaLaw {
    pub level: f64,
    pub k_max: usize,
    /// `P(σ_y = k | M_τ > y)`, `k = 1..=k_max`.
    pub empirical: Vec<f64>,
    /// `P(σ_y > k_max | M_τ > y)`.
    pub empirical_beyond: f64,
    pub conditioning_events: u64,
    /// `q_k`, `k = 1..=k_max`.
    pub reference: Vec<f64>,
    pub reference_beyond: f64,
    pub e_tau: f64,
    /// Total variation on `{1, ..., k_max, >k_max}`.
    pub total_variation: f64,
    pub n: u64,
    pub truncated_count: u64,
}

pub fn sigma_y_conditional_law(
    model: &IncrementModel,
    y: f64,
    k_max: usize,
    n: u64,
    config: &SimConfig,
) -> Result<SigmaLaw> {
    check(y > 0.0, "y", y, "must be positive")?;
    let probes = Probes {
        sigma: Some(SigmaProbe { level: y, k_max }),
        tau_survival_len: k_max,
        ..Probes::default()
    };
    let s = run_probes(model, config, n, &probes, &Sampler::Naive)?;
    if s.sigma_events == 0 {
        return Err(Error::NoConditioningEvents { level: y, samples: n });
    }
    let events = s.sigma_events as f64;
    let empirical: Vec<f64> = s.sigma.iter().map(|c| c / events).collect();
    let empirical_beyond = s.sigma_beyond / events;
    let completed = s.completed() as f64;
    let e_tau = s.tau_moments.sum / completed;
    let reference: Vec<f64> = s.tau_survival.iter().map(|c| c / completed / e_tau).collect();
    let reference_beyond = (1.0 - reference.iter().sum::<f64>()).max(0.0);
    let total_variation = 0.5
        * (empirical
            .iter()
            .zip(&reference)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            + (empirical_beyond - reference_beyond).abs());
    Ok(SigmaLaw {
        level: y,
        k_max,
        empirical,
        empirical_beyond,
        conditioning_events: s.sigma_events,
        reference,
        reference_beyond,
        e_tau,
        total_variation,
        n: s.n,
        truncated_count: s.truncated,
    })
}

/// Empirical `P(A_n > x, max_{i<=n} X_i <= y)` for the unstopped walk with
/// `A_n = Σ_{k=1}^n S_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CappedAreaEstimate {
    pub steps: u64,
    pub x: f64,
    pub y: f64,
    pub estimate: TailEstimate,
}

/// Evaluates every `(x, y)` pair on one coupled set of `n` paths per step
/// count.
pub fn capped_area_tail(
    model: &IncrementModel,
    steps: &[u64],
    xs: &[f64],
    ys: &[f64],
    n: u64,
    config: &SimConfig,
) -> Result<Vec<CappedAreaEstimate>> {
    check(n >= 1, "n", n as f64, "must be at least 1")?;
    let mut out = Vec::with_capacity(steps.len() * xs.len() * ys.len());
    for &k in steps {
        check(k >= 1, "steps", k as f64, "must be at least 1")?;
        let cells = xs.len() * ys.len();
        let tallies = exec::fold_indexed(
            n,
            config.execution,
            || vec![Tally::default(); cells],
            |acc, i| {
                let mut r = rng::stream(config.seed, i);
                let mut position = 0.0;
                let mut area = crate::excursion::CompensatedSum::default();
                let mut biggest = f64::NEG_INFINITY;
                for _ in 0..k {
                    let x = model.sample(&mut r);
                    biggest = biggest.max(x);
                    position += x;
                    area.add(position);
                }
                let area = area.value();
                for (xi, &x) in xs.iter().enumerate() {
                    for (yi, &y) in ys.iter().enumerate() {
                        acc[xi * ys.len() + yi].add(if area > x && biggest <= y { 1.0 } else { 0.0 });
                    }
                }
            },
            |a, b| {
                for (l, r) in a.iter_mut().zip(&b) {
                    l.merge(r);
                }
            },
        );
        for (xi, &x) in xs.iter().enumerate() {
            for (yi, &y) in ys.iter().enumerate() {
                out.push(CappedAreaEstimate {
                    steps: k,
                    x,
                    y,
                    estimate: TailEstimate::from_tally(&tallies[xi * ys.len() + yi], n, n, 0, Method::Naive),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::WindowKind;
    use crate::models::TailLaw;

    #[test]
    fn degenerate_walk_never_exceeds() {
        let m = IncrementModel::degenerate(1.0).unwrap();
        let cfg = SimConfig::new(1);
        assert_eq!(naive_mc_area_tail(&m, 0.5, 1000, &cfg).unwrap().p_hat, 0.0);
        assert_eq!(naive_mc_tau_tail(&m, 1.0, 1000, &cfg).unwrap().p_hat, 0.0);
        let e = estimate_e_tau(&m, 1000, &cfg).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn lattice_first_step_events() {
        let m = IncrementModel::lattice(0.3).unwrap();
        let cfg = SimConfig::new(2);
        let t = naive_mc_tau_tail(&m, 1.0, 200_000, &cfg).unwrap();
        let y = naive_mc_max_tail(&m, 0.0, 200_000, &cfg).unwrap();
        assert!(t.within_stderr(0.3, 4.0));
        // Same event on the same sample.
        assert_eq!(t.p_hat, y.p_hat);
    }

    #[test]
    fn joint_with_zero_level_equals_area_tail() {
        let m = IncrementModel::pareto(3.0, 1.0).unwrap();
        let cfg = SimConfig::new(3);
        let w = JointTailWindow {
            kind: WindowKind::RegvarA,
            epsilon: 0.5,
            r: 1.0,
        };
        let j = joint_tail(&m, 10.0, 0.0, 100_000, &cfg, &w).unwrap();
        let a = naive_mc_area_tail(&m, 10.0, 100_000, &cfg).unwrap();
        assert_eq!(j.estimate.p_hat, a.p_hat);
        assert!(!j.in_window);
        let far = joint_tail(&m, 10.0, 1e9, 100_000, &cfg, &w).unwrap();
        assert_eq!(far.estimate.p_hat, 0.0);
    }

    #[test]
    fn sigma_law_needs_events() {
        let m = IncrementModel::lattice(0.3).unwrap();
        let err = sigma_y_conditional_law(&m, 1e6, 5, 100, &SimConfig::new(1)).unwrap_err();
        assert!(matches!(err, Error::NoConditioningEvents { .. }));
    }

    #[test]
    fn sigma_law_reference_starts_at_inverse_mean() {
        let m = IncrementModel::lattice(0.3).unwrap();
        let law = sigma_y_conditional_law(&m, 0.5, 10, 100_000, &SimConfig::new(8)).unwrap();
        assert!((law.reference[0] - 1.0 / law.e_tau).abs() < 1e-15);
        // σ_{0.5} = 1 exactly when M_τ > 0.5 for the ±1 walk.
        assert_eq!(law.empirical[0], 1.0);
        let total: f64 = law.empirical.iter().sum::<f64>() + law.empirical_beyond;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capped_area_single_step_is_exact_event() {
        // One step: A_1 = X_1, so the event is x < X_1 <= y.
        let m = IncrementModel::pareto(3.0, 1.0).unwrap();
        let est = capped_area_tail(&m, &[1], &[1.0], &[4.0], 400_000, &SimConfig::new(6)).unwrap();
        let truth = m.tail(1.0) - m.tail(4.0);
        assert!(est[0].estimate.within_stderr(truth, 4.0), "{:?} vs {truth}", est[0]);
    }
}
