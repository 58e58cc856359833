//! Run configuration: a flat TOML file whose keys mirror the CLI flags.
//!
//! ```toml
//! k = 1.0
//! base = "normal(0,1)"
//! lambda = 4.0
//! s-draws = 1000
//! replicates = 1000
//! null = "lognormal(0,1)"
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::calibration::{CalibrationConfig, CalibrationMode, DEFAULT_BUDGET_CAP};
use crate::distributions::{Model, ScenarioId, UnivariateModel};
use crate::error::{Error, Result};
use crate::index::{WeightSpec, WiksConfig, DEFAULT_DRAWS, DEFAULT_LAMBDA};
use crate::io::read_text;
use crate::posterior::{DPPrior, Truncation, DEFAULT_MAX_ATOMS, DEFAULT_TRUNC_EPS};

/// Environment variable holding the default cap on `replicates * s-draws`.
pub const BUDGET_CAP_ENV: &str = "WIKS_BUDGET_CAP";

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
    /// DP concentration.
    pub k: f64,
    /// DP base measure; bivariate data use the product of two copies.
    pub base: UnivariateModel,
    /// `power`, `uniform`, `power(l)` or `tabulated(t:W,...)`.
    pub weight: String,
    /// Exponent of the bare `power` weight.
    pub lambda: f64,
    pub s_draws: usize,
    pub trunc_eps: f64,
    pub max_atoms: usize,
    pub alpha: f64,
    pub replicates: usize,
    pub null: Model,
    pub mode: CalibrationMode,
    /// Sample sizes for calibration and power runs.
    pub n: usize,
    pub m: usize,
    /// Fixed WIKS threshold, bypassing calibration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Calibration result files to take thresholds from.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub calibration: Vec<PathBuf>,
    pub scenarios: Vec<ScenarioId>,
    /// Theta grid replacing the default; needs a single scenario.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    pub methods: Vec<Method>,
    /// Replicates per power-curve point.
    pub reps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_cap: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            x: None,
            y: None,
            k: 1.0,
            base: UnivariateModel::standard_normal(),
            weight: "power".into(),
            lambda: DEFAULT_LAMBDA,
            s_draws: DEFAULT_DRAWS,
            trunc_eps: DEFAULT_TRUNC_EPS,
            max_atoms: DEFAULT_MAX_ATOMS,
            alpha: 0.05,
            replicates: 1000,
            null: UnivariateModel::standard_normal().into(),
            mode: CalibrationMode::WiksNullSim,
            n: 50,
            m: 50,
            threshold: None,
            calibration: Vec::new(),
            scenarios: (1..=8).map(ScenarioId).collect(),
            thetas: None,
            methods: vec![Method::Wiks, Method::Ks, Method::Wilcox],
            reps: 1000,
            out: None,
            seed: DEFAULT_SEED,
            workers: 0,
            budget_cap: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?, path)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn weight_spec(&self) -> Result<WeightSpec> {
        if self.weight.trim().eq_ignore_ascii_case("power") {
            WeightSpec::power_complement(self.lambda)
        } else {
            self.weight.parse()
        }
    }

    pub fn prior(&self) -> Result<DPPrior<UnivariateModel>> {
        DPPrior::new(self.k, self.base)
    }

    pub fn truncation(&self) -> Truncation {
        Truncation {
            eps: self.trunc_eps,
            max_atoms: self.max_atoms,
        }
    }

    pub fn wiks_config(&self) -> Result<WiksConfig> {
        Ok(WiksConfig {
            weight: self.weight_spec()?,
            draws: self.s_draws,
            truncation: self.truncation(),
        })
    }

    /// The configured cap, else the environment variable, else the default.
    pub fn effective_budget_cap(&self) -> Result<u64> {
        if let Some(cap) = self.budget_cap {
            return Ok(cap);
        }
        match std::env::var(BUDGET_CAP_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                Error::Config(format!("{BUDGET_CAP_ENV} must be a nonnegative integer, got `{v}`"))
            }),
            Err(_) => Ok(DEFAULT_BUDGET_CAP),
        }
    }

    /// Calibration settings for samples of sizes `n`, `m` under `null`.
    pub fn calibration_config(&self, n: usize, m: usize, null: Model) -> Result<CalibrationConfig> {
        Ok(CalibrationConfig {
            n,
            m,
            replicates: self.replicates,
            alpha: self.alpha,
            null_model: null,
            mode: self.mode,
            concentration: self.k,
            budget_cap: self.effective_budget_cap()?,
        })
    }

    /// Checks every numeric field; violations are configuration errors.
    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| match e {
            Error::Parameter(msg) | Error::Input(msg) => Error::Config(msg),
            other => other,
        };
        self.prior().map_err(config)?;
        self.weight_spec().map_err(config)?;
        self.truncation().validate().map_err(config)?;
        self.null.validate().map_err(config)?;
        if self.s_draws == 0 {
            return Err(Error::Config("s-draws must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.replicates == 0 || self.reps == 0 {
            return Err(Error::Config("replicates and reps must be >= 1".into()));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("n and m must be >= 1".into()));
        }
        if let Some(c) = self.threshold {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Config(format!("threshold must lie in (0, 1), got {c}")));
            }
        }
        if let Some(t) = &self.thetas {
            if self.scenarios.len() != 1 {
                return Err(Error::Config("thetas needs exactly one scenario".into()));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("thetas must be finite".into()));
            }
        }
        for id in &self.scenarios {
            if id.dimension().is_none() {
                return Err(Error::Usage(format!("unknown scenario id {id}")));
            }
        }
        Ok(())
    }
}
