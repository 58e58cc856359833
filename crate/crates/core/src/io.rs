//! Sample files, JSON reports and their parsers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::{Method, TestReport};
use crate::calibration::CalibrationMode;
use crate::distributions::UnivariateModel;
use crate::error::{Error, Result};
use crate::index::{Verdict, WeightSpec, WiksEstimate};
use crate::seed::SeedSpec;

/// A parsed sample file.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Univariate(Vec<f64>),
    Bivariate(Vec<[f64; 2]>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Univariate(v) => v.len(),
            Samples::Bivariate(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        match self {
            Samples::Univariate(_) => 1,
            Samples::Bivariate(_) => 2,
        }
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses CSV text with one observation per row and one or two numeric
/// columns. A first row that is not numeric is taken as a header. Blank
/// lines are skipped. `path` only labels error messages.
pub fn parse_samples_str(text: &str, path: &Path) -> Result<Samples> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut dim: Option<usize> = None;
    let mut uni = Vec::new();
    let mut bi = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if first {
            first = false;
            if values.iter().all(Option::is_none) {
                dim = Some(record.len());
                continue;
            }
        }
        let width = record.len();
        if !(1..=2).contains(&width) {
            return Err(err(line, format!("expected 1 or 2 columns, found {width}")));
        }
        match dim {
            Some(d) if d != width => {
                return Err(err(
                    line,
                    format!("row has {width} column(s) but earlier rows have {d}"),
                ))
            }
            _ => dim = Some(width),
        }
        if let Some(i) = values.iter().position(Option::is_none) {
            return Err(err(
                line,
                format!("column {} is not a finite number: `{}`", i + 1, &record[i]),
            ));
        }
        if width == 1 {
            uni.push(values[0].unwrap());
        } else {
            bi.push([values[0].unwrap(), values[1].unwrap()]);
        }
    }
    match dim {
        Some(2) if !bi.is_empty() => Ok(Samples::Bivariate(bi)),
        Some(_) if !uni.is_empty() => Ok(Samples::Univariate(uni)),
        _ => Err(err(1, "no observations".into())),
    }
}

pub fn parse_samples(path: &Path) -> Result<Samples> {
    parse_samples_str(&read_text(path)?, path)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::input(format!("cannot serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read_text(path)?, path)
}

/// Outcome of a baseline run on the same data; failures are kept as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TestReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Where the decision threshold came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdSource {
    Given,
    CalibrationFile { path: PathBuf },
    Calibrated { mode: CalibrationMode, replicates: usize },
}

/// The result file of the `test` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleReport {
    pub x_path: PathBuf,
    pub y_path: PathBuf,
    pub n: usize,
    pub m: usize,
    pub dimension: usize,
    pub concentration: f64,
    pub base: UnivariateModel,
    pub weight: WeightSpec,
    pub estimate: WiksEstimate,
    pub threshold: f64,
    pub threshold_source: ThresholdSource,
    pub decision: Verdict,
    pub baselines: Vec<BaselineOutcome>,
    pub seed: SeedSpec,
}
