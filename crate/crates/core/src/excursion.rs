//! Simulation of one positive excursion `S_0 = 0, S_1, ..., S_τ`.

use serde::{Deserialize, Serialize};

use crate::error::{check, Result};
use crate::exec::{self, Execution};
use crate::models::IncrementModel;
use crate::rng::{self, Stream};

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Anything that yields successive increments.
pub trait IncrementSource {
    fn next_increment(&mut self) -> f64;
}

impl<F: FnMut() -> f64> IncrementSource for F {
    fn next_increment(&mut self) -> f64 {
        self()
    }
}

/// Nominal draws from a model on a dedicated stream.
pub struct ModelSource<'a> {
    pub model: &'a IncrementModel,
    pub rng: Stream,
}

impl IncrementSource for ModelSource<'_> {
    #[inline]
    fn next_increment(&mut self) -> f64 {
        self.model.sample(&mut self.rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub max_steps: u64,
    /// Levels `y` whose first-passage index `σ_y` is recorded.
    #[serde(default)]
    pub levels: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            levels: Vec::new(),
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_levels(mut self, levels: Vec<f64>) -> Self {
        self.levels = levels;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check(self.max_steps >= 1, "max_steps", self.max_steps as f64, "must be at least 1")
    }
}

/// Summary of one excursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionOutcome {
    /// First `n >= 1` with `S_n <= 0`, or `max_steps` when truncated.
    pub tau: u64,
    /// `Σ_{k=0}^{τ-1} S_k`.
    pub area: f64,
    /// `max_{n<τ} S_n`, zero when `τ = 1`.
    pub max: f64,
    /// `S_τ` (the walk position at exit, or at truncation).
    pub exit_value: f64,
    /// `σ_y = inf{n < τ : S_n > y}` per configured level.
    pub sigma_y: Vec<Option<u64>>,
    pub truncated: bool,
}

/// Runs the walk from `S_0 = 0` until the first nonpositive position.
pub fn run_walk<S: IncrementSource + ?Sized>(source: &mut S, max_steps: u64, levels: &[f64]) -> ExcursionOutcome {
    let mut position = 0.0f64;
    // S_0 = 0 is a summand of the area and contributes nothing.
    let mut area = CompensatedSum::default();
    let mut max = 0.0f64;
    let mut sigma_y = vec![None; levels.len()];
    for n in 1..=max_steps {
        position += source.next_increment();
        if position <= 0.0 {
            return ExcursionOutcome {
                tau: n,
                area: area.value(),
                max,
                exit_value: position,
                sigma_y,
                truncated: false,
            };
        }
        area.add(position);
        if position > max {
            max = position;
            for (slot, &y) in sigma_y.iter_mut().zip(levels) {
                if slot.is_none() && position > y {
                    *slot = Some(n);
                }
            }
        }
    }
    ExcursionOutcome {
        tau: max_steps,
        area: area.value(),
        max,
        exit_value: position,
        sigma_y,
        truncated: true,
    }
}

/// Simulates the excursion on stream `stream_index`; a pure function of
/// `(model, config.seed, config.max_steps, config.levels, stream_index)`.
pub fn simulate_excursion(model: &IncrementModel, config: &SimConfig, stream_index: u64) -> ExcursionOutcome {
    let mut source = ModelSource {
        model,
        rng: rng::stream(config.seed, stream_index),
    };
    run_walk(&mut source, config.max_steps, &config.levels)
}

/// Positions `S_1, ..., S_τ` of the excursion on `stream_index`.
pub fn replay_path(model: &IncrementModel, config: &SimConfig, stream_index: u64) -> Vec<f64> {
    let mut rng = rng::stream(config.seed, stream_index);
    let mut path = Vec::new();
    let mut position = 0.0;
    for _ in 0..config.max_steps {
        position += model.sample(&mut rng);
        path.push(position);
        if position <= 0.0 {
            break;
        }
    }
    path
}

/// Outcomes for stream indices `0..n`, in index order.
pub fn batch_simulate(model: &IncrementModel, config: &SimConfig, n: u64) -> Result<Vec<ExcursionOutcome>> {
    config.validate()?;
    check(n >= 1, "n", n as f64, "must be at least 1")?;
    Ok(exec::map_indexed(n, config.execution, |i| simulate_excursion(model, config, i)))
}

/// Folds the outcomes of stream indices `0..n` into an accumulator. The
/// result is bit-identical for any worker count.
pub fn batch_fold<A, I, F, M>(model: &IncrementModel, config: &SimConfig, n: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, ExcursionOutcome) + Sync,
    M: Fn(&mut A, A),
{
    exec::fold_indexed(
        n,
        config.execution,
        init,
        |acc, i| fold(acc, simulate_excursion(model, config, i)),
        merge,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn injected(steps: &[f64]) -> impl FnMut() -> f64 + '_ {
        let mut it = steps.iter().copied();
        move || it.next().expect("injected stream exhausted")
    }

    #[test]
    fn immediate_exit() {
        let o = run_walk(&mut injected(&[-1.0]), 100, &[]);
        assert_eq!((o.tau, o.area, o.max, o.truncated), (1, 0.0, 0.0, false));
    }

    #[test]
    fn single_step_excursion() {
        let o = run_walk(&mut injected(&[1.0, -1.0]), 100, &[]);
        assert_eq!((o.tau, o.area, o.max), (2, 1.0, 1.0));
        assert_eq!(o.exit_value, 0.0);
    }

    #[test]
    fn tent_excursion() {
        let o = run_walk(&mut injected(&[1.0, 1.0, -1.0, -1.0]), 100, &[0.5, 1.5, 5.0]);
        assert_eq!((o.tau, o.area, o.max), (4, 4.0, 2.0));
        assert_eq!(o.sigma_y, vec![Some(1), Some(2), None]);
    }

    #[test]
    fn truncation_is_flagged() {
        let o = run_walk(&mut || 1.0, 10, &[]);
        assert!(o.truncated);
        assert_eq!(o.tau, 10);
        assert_eq!(o.area, 55.0);
    }

    #[test]
    fn compensated_sum_beats_naive_accumulation() {
        let mut c = CompensatedSum::default();
        c.add(1e16);
        for _ in 0..1000 {
            c.add(1.0);
        }
        c.add(-1e16);
        assert_eq!(c.value(), 1000.0);
    }

    #[test]
    fn batch_of_one_equals_single_simulation() {
        let m = IncrementModel::pareto(3.0, 1.0).unwrap();
        let cfg = SimConfig::new(11);
        assert_eq!(batch_simulate(&m, &cfg, 1).unwrap()[0], simulate_excursion(&m, &cfg, 0));
    }

    #[test]
    fn batch_is_independent_of_execution_mode() {
        let m = IncrementModel::weibull(0.3, 1.0).unwrap();
        let par = SimConfig::new(5).with_levels(vec![3.0]);
        let seq = par.clone().with_execution(Execution::Sequential);
        assert_eq!(batch_simulate(&m, &par, 10_000).unwrap(), batch_simulate(&m, &seq, 10_000).unwrap());
    }

    #[test]
    fn zero_samples_rejected() {
        let m = IncrementModel::lattice(0.3).unwrap();
        assert!(batch_simulate(&m, &SimConfig::new(0), 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn replay_reproduces_exit_and_area(seed in 0u64..1000, index in 0u64..10_000) {
            let m = IncrementModel::pareto(3.0, 1.0).unwrap();
            let cfg = SimConfig::new(seed).with_levels(vec![2.0]);
            let o = simulate_excursion(&m, &cfg, index);
            let path = replay_path(&m, &cfg, index);
            prop_assert_eq!(path.len() as u64, o.tau);
            prop_assert!(*path.last().unwrap() <= 0.0);
            let inner = &path[..path.len() - 1];
            prop_assert!(inner.iter().all(|&s| s > 0.0));
            if o.tau >= 2 {
                let lo = inner.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = inner.iter().copied().fold(0.0, f64::max);
                let k = (o.tau - 1) as f64;
                prop_assert!(o.area >= k * lo * (1.0 - 1e-12));
                prop_assert!(o.area <= k * hi * (1.0 + 1e-12));
                prop_assert!(o.area >= o.max);
                prop_assert_eq!(o.max, hi);
            } else {
                prop_assert_eq!(o.area, 0.0);
                prop_assert_eq!(o.max, 0.0);
            }
            if let Some(s) = o.sigma_y[0] {
                prop_assert!(s < o.tau);
                prop_assert!(path[..s as usize - 1].iter().all(|&p| p <= 2.0));
                prop_assert!(path[s as usize - 1] > 2.0);
            }
        }
    }
}
