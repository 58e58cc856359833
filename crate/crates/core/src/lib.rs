//! Bayesian nonparametric two-sample testing with the WIKS index.
//!
//! Both samples get independent Dirichlet-process priors; the index is the
//! posterior expectation of `W(d(P1, P2))` for a Kolmogorov distance `d` and
//! a cumulative weight function `W`, estimated by Monte Carlo over
//! stick-breaking posterior draws. Thresholds come from null simulation or
//! from the quantile of the shrunk empirical statistic `Z`.

pub mod baselines;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod index;
pub mod io;
pub mod metrics;
pub mod posterior;
pub mod power;
pub mod seed;

pub use error::{Error, Result};
pub use seed::SeedSpec;
