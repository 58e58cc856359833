//! Monte Carlo power study over the scenario catalogue.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{classical_ks_test, wilcoxon_test, Method};
use crate::calibration::{index_for_model, replicate_seeds, CalibrationResult};
use crate::distributions::{scenario, Model, ScenarioId, UnivariateModel};
use crate::error::{Error, Result};
use crate::index::WiksConfig;
use crate::posterior::DPPrior;
use crate::seed::SeedSpec;

/// One scenario and the thetas to evaluate it at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub id: ScenarioId,
    pub thetas: Vec<f64>,
}

impl ScenarioGrid {
    /// The scenario with its default theta grid.
    pub fn with_default_grid(id: ScenarioId) -> Result<Self> {
        let thetas = id
            .default_grid()
            .ok_or_else(|| Error::Usage(format!("unknown scenario id {id}")))?;
        Ok(Self { id, thetas })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudy {
    pub scenarios: Vec<ScenarioGrid>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub n: usize,
    pub m: usize,
    /// Level of the p-value based baselines.
    pub alpha: f64,
    pub prior: DPPrior<UnivariateModel>,
    pub wiks: WiksConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: ScenarioId,
    pub theta: f64,
    pub method: Method,
    pub power: f64,
    pub reps: usize,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    /// CSV with header `scenario,theta,method,power,reps,mc_se`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io {
            path: "<power table>".into(),
            source: std::io::Error::other(e),
        };
        // The header is written explicitly so an empty table still has one.
        w.write_record(["scenario", "theta", "method", "power", "reps", "mc_se"])
            .map_err(io)?;
        for row in &self.rows {
            w.write_record([
                row.scenario.to_string(),
                row.theta.to_string(),
                row.method.to_string(),
                row.power.to_string(),
                row.reps.to_string(),
                row.mc_se.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<power table>".into(),
            source: e,
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for (i, rec) in r.deserialize::<PowerRow>().enumerate() {
            rows.push(rec.map_err(|e| Error::Parse {
                path: "<power table>".into(),
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        Ok(Self { rows })
    }

    /// Rows of one scenario and method, in theta order of appearance.
    pub fn curve(&self, id: ScenarioId, method: Method) -> Vec<&PowerRow> {
        self.rows
            .iter()
            .filter(|r| r.scenario == id && r.method == method)
            .collect()
    }
}

/// WIKS thresholds by data dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerThresholds {
    pub univariate: Option<f64>,
    pub bivariate: Option<f64>,
}

impl PowerThresholds {
    /// The same threshold for both dimensions.
    pub fn fixed(c: f64) -> Self {
        Self {
            univariate: Some(c),
            bivariate: Some(c),
        }
    }

    /// Thresholds taken from calibrations, matched on the null model's
    /// dimension. Later results win.
    pub fn from_calibrations(results: &[CalibrationResult]) -> Self {
        let mut out = Self::default();
        for c in results {
            out.set(c.config.null_model.dimension(), c.threshold);
        }
        out
    }

    pub fn get(&self, dim: usize) -> Option<f64> {
        match dim {
            1 => self.univariate,
            2 => self.bivariate,
            _ => None,
        }
    }

    pub fn set(&mut self, dim: usize, c: f64) {
        match dim {
            1 => self.univariate = Some(c),
            2 => self.bivariate = Some(c),
            _ => {}
        }
    }
}

impl PowerStudy {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Usage("no scenarios selected".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Usage("no methods selected".into()));
        }
        if self.reps == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::Config("reps, n and m must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        for grid in &self.scenarios {
            let dim = grid
                .id
                .dimension()
                .ok_or_else(|| Error::Usage(format!("unknown scenario id {}", grid.id)))?;
            if grid.thetas.is_empty() {
                return Err(Error::Usage(format!("scenario {} has no thetas", grid.id)));
            }
            if dim == 2 && self.methods.iter().any(|m| *m != Method::Wiks) {
                return Err(Error::Config(format!(
                    "scenario {} is bivariate; only WIKS applies",
                    grid.id
                )));
            }
        }
        Ok(())
    }

    /// Rejection rates per (scenario, theta, method). Every method sees the
    /// same simulated data sets; replicate `r` of theta `t` of scenario `id`
    /// is seeded by `seed.child(id).child(t)` and its child `r`.
    pub fn run(&self, thresholds: &PowerThresholds, seed: SeedSpec) -> Result<PowerTable> {
        self.validate()?;
        let mut rows = Vec::new();
        for grid in &self.scenarios {
            let dim = grid.id.dimension().expect("validated");
            let wiks_threshold = if self.methods.contains(&Method::Wiks) {
                Some(thresholds.get(dim).ok_or_else(|| {
                    Error::Config(format!(
                        "no WIKS threshold calibrated for {dim}-dimensional data (scenario {})",
                        grid.id
                    ))
                })?)
            } else {
                None
            };
            for (t, &theta) in grid.thetas.iter().enumerate() {
                let (xm, ym) = scenario(grid.id, theta)?;
                let base = seed.child(grid.id.0 as u64).child(t as u64);
                let outcomes = (0..self.reps)
                    .into_par_iter()
                    .map(|r| self.replicate(&xm, &ym, wiks_threshold, replicate_seeds(base, r)))
                    .collect::<Result<Vec<Vec<bool>>>>()?;
                for (k, method) in self.methods.iter().enumerate() {
                    let hits = outcomes.iter().filter(|o| o[k]).count();
                    let power = hits as f64 / self.reps as f64;
                    rows.push(PowerRow {
                        scenario: grid.id,
                        theta,
                        method: *method,
                        power,
                        reps: self.reps,
                        mc_se: (power * (1.0 - power) / self.reps as f64).sqrt(),
                    });
                }
            }
        }
        Ok(PowerTable { rows })
    }

    fn replicate(
        &self,
        xm: &Model,
        ym: &Model,
        wiks_threshold: Option<f64>,
        seeds: (SeedSpec, SeedSpec, SeedSpec),
    ) -> Result<Vec<bool>> {
        let (sx, sy, _) = seeds;
        let univariate = match (xm, ym) {
            (Model::Univariate(a), Model::Univariate(b)) => {
                Some((a.sample(self.n, sx)?, b.sample(self.m, sy)?))
            }
            _ => None,
        };
        self.methods
            .iter()
            .map(|method| match method {
                Method::Wiks => {
                    let value =
                        index_for_model(xm, ym, self.n, self.m, &self.prior, &self.wiks, seeds)?;
                    Ok(value > wiks_threshold.expect("checked in run"))
                }
                Method::Ks => {
                    let (x, y) = univariate.as_ref().expect("validated");
                    Ok(classical_ks_test(x, y)?.p_value.unwrap_or(1.0) < self.alpha)
                }
                Method::Wilcox => {
                    let (x, y) = univariate.as_ref().expect("validated");
                    match wilcoxon_test(x, y) {
                        Ok(r) => Ok(r.p_value.unwrap_or(1.0) < self.alpha),
                        Err(Error::Degenerate(_)) => Ok(false),
                        Err(e) => Err(e),
                    }
                }
            })
            .collect()
    }
}
