//! Threshold calibration: by simulating the index under a null model, or by
//! the null quantile of the shrunk empirical statistic `Z` on uniform data.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Model, UnivariateModel};
use crate::error::{Error, Result};
use crate::index::{wiks, WiksConfig};
use crate::metrics::z_statistic;
use crate::posterior::{DPPrior, ProductBase};
use crate::seed::SeedSpec;

/// Default cap on `R * S` posterior draw pairs for one calibration.
pub const DEFAULT_BUDGET_CAP: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    WiksNullSim,
    ZQuantile,
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationMode::WiksNullSim => "wiks_null_sim",
            CalibrationMode::ZQuantile => "z_quantile",
        })
    }
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "wiks_null_sim" | "null_sim" | "wiks" => Ok(CalibrationMode::WiksNullSim),
            "z_quantile" | "z" => Ok(CalibrationMode::ZQuantile),
            other => Err(Error::Usage(format!(
                "unknown calibration mode `{other}` (expected wiks_null_sim or z_quantile)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub alpha: f64,
    /// Null data-generating model; bivariate models calibrate bivariate
    /// tests.
    pub null_model: Model,
    pub mode: CalibrationMode,
    /// Concentration `K` used by the `Z` statistic.
    pub concentration: f64,
    /// Upper bound on `replicates * draws` for null simulation.
    pub budget_cap: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n: 50,
            m: 50,
            replicates: 1000,
            alpha: 0.05,
            null_model: UnivariateModel::standard_normal().into(),
            mode: CalibrationMode::WiksNullSim,
            concentration: 1.0,
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("sample sizes must be >= 1".into()));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::Config(format!(
                "concentration must be > 0, got {}",
                self.concentration
            )));
        }
        self.null_model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    pub mode: CalibrationMode,
    /// Replicate index values in replicate order.
    pub replicate_values: Vec<f64>,
    pub config: CalibrationConfig,
    pub seed: SeedSpec,
}

impl CalibrationResult {
    /// Applies the quantile rule to already computed replicate values.
    pub fn from_replicates(
        replicate_values: Vec<f64>,
        config: CalibrationConfig,
        seed: SeedSpec,
    ) -> Result<Self> {
        let threshold = upper_quantile(&replicate_values, config.alpha)?;
        Ok(Self {
            threshold,
            mode: config.mode,
            replicate_values,
            config,
            seed,
        })
    }
}

/// Rank `ceil((1 - alpha) R)` (1-based) used as the upper `1 - alpha`
/// sample quantile of `R` values.
pub fn quantile_rank(alpha: f64, r: usize) -> usize {
    // Guard against (1 - alpha) R landing a hair above an integer.
    let k = ((1.0 - alpha) * r as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(r)
}

/// The `ceil((1 - alpha) R)`-th order statistic, without interpolation.
pub fn upper_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("no replicate values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::input("replicate values contain NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(alpha, sorted.len()) - 1])
}

/// Seeds of the three streams of replicate `r`: x data, y data, the index.
pub(crate) fn replicate_seeds(seed: SeedSpec, r: usize) -> (SeedSpec, SeedSpec, SeedSpec) {
    let s = seed.child(r as u64);
    (s.child(0), s.child(1), s.child(2))
}

/// Index value of one simulated data set of the given model.
pub(crate) fn index_for_model(
    x_model: &Model,
    y_model: &Model,
    n: usize,
    m: usize,
    prior: &DPPrior<UnivariateModel>,
    wiks_config: &WiksConfig,
    seeds: (SeedSpec, SeedSpec, SeedSpec),
) -> Result<f64> {
    let (sx, sy, sw) = seeds;
    match (x_model, y_model) {
        (Model::Univariate(mx), Model::Univariate(my)) => {
            let x = mx.sample(n, sx)?;
            let y = my.sample(m, sy)?;
            Ok(wiks(&x, &y, prior, wiks_config, sw)?.value)
        }
        (Model::Bivariate(mx), Model::Bivariate(my)) => {
            let x = mx.sample(n, sx)?;
            let y = my.sample(m, sy)?;
            let prior = DPPrior::new(
                prior.concentration,
                ProductBase(prior.base, prior.base),
            )?;
            Ok(wiks(&x, &y, &prior, wiks_config, sw)?.value)
        }
        _ => Err(Error::input("x and y models must have the same dimension")),
    }
}

fn check_budget(config: &CalibrationConfig, draws: usize) -> Result<()> {
    let budget = config.replicates as u64 * draws as u64;
    if budget > config.budget_cap {
        let r = config.replicates.min(1000) as u64;
        let s = (config.budget_cap / r.max(1)).max(1);
        return Err(Error::Resource(format!(
            "{} replicates x {} draws = {budget} posterior draw pairs exceeds the cap of {}; \
             try replicates={r} with s_draws<={s}, or raise the cap",
            config.replicates, draws, config.budget_cap
        )));
    }
    Ok(())
}

/// Threshold as the upper `1 - alpha` quantile of the index over
/// `replicates` null data sets drawn from `config.null_model`. Bivariate
/// nulls use the product of two copies of the prior's base.
pub fn calibrate_wiks_null(
    config: &CalibrationConfig,
    prior: &DPPrior<UnivariateModel>,
    wiks_config: &WiksConfig,
    seed: SeedSpec,
) -> Result<CalibrationResult> {
    if config.mode != CalibrationMode::WiksNullSim {
        return Err(Error::Config("calibrate_wiks_null needs mode wiks_null_sim".into()));
    }
    config.validate()?;
    check_budget(config, wiks_config.draws)?;
    let values = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            index_for_model(
                &config.null_model,
                &config.null_model,
                config.n,
                config.m,
                prior,
                wiks_config,
                replicate_seeds(seed, r),
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    CalibrationResult::from_replicates(values, config.clone(), seed)
}

/// Threshold as the upper `1 - alpha` quantile of `Z` with concentration
/// `config.concentration` over Uniform(0, 1) samples of sizes `n`, `m`.
pub fn calibrate_z_quantile(config: &CalibrationConfig, seed: SeedSpec) -> Result<CalibrationResult> {
    if config.mode != CalibrationMode::ZQuantile {
        return Err(Error::Config("calibrate_z_quantile needs mode z_quantile".into()));
    }
    config.validate()?;
    let unif = UnivariateModel::uniform(0.0, 1.0);
    let values = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let (sx, sy, _) = replicate_seeds(seed, r);
            let x = unif.sample(config.n, sx)?;
            let y = unif.sample(config.m, sy)?;
            z_statistic(&x, &y, config.concentration)
        })
        .collect::<Result<Vec<f64>>>()?;
    CalibrationResult::from_replicates(values, config.clone(), seed)
}
