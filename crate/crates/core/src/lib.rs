//! Heavy-tailed random walk excursions: exact increment laws, a deterministic
//! parallel simulator, rare-event estimators for the excursion area, exit time
//! and maximum, and closed-form predictions to compare them against.
//!
//! ```
//! use excursion_core::{asymptotics, estimators, IncrementModel, SimConfig};
//!
//! let model = IncrementModel::pareto(3.0, 1.0).unwrap();
//! let config = SimConfig::new(7);
//! let e_tau = estimators::estimate_e_tau(&model, 20_000, &config).unwrap();
//! let p = estimators::naive_mc_area_tail(&model, 20.0, 20_000, &config).unwrap();
//! let predicted = asymptotics::area_tail_prediction(&model, e_tau.mean, 20.0);
//! assert!(p.p_hat > 0.0 && predicted > 0.0);
//! ```

pub mod asymptotics;
pub mod bessel;
pub mod class_analysis;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod excursion;
pub mod models;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
pub use excursion::{ExcursionOutcome, SimConfig};
pub use models::{Family, GFunction, IncrementModel, ModelSpec, TailLaw};
