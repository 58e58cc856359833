//! Parametric families used as base measures, null models and scenario
//! generators, with a numeric oracle for the Kolmogorov distance between two
//! continuous models.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal, StudentT, Uniform};
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, erf::erfc, gamma::gamma_lr};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// A univariate data-generating model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum UnivariateModel {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `log X ~ Normal(log_mean, log_sd)`.
    LogNormal { log_mean: f64, log_sd: f64 },
    Beta { a: f64, b: f64 },
    Gamma { shape: f64, rate: f64 },
    StudentT { df: f64 },
    /// `weight * N(mean1, sd1) + (1 - weight) * N(mean2, sd2)`.
    NormalMixture {
        weight: f64,
        mean1: f64,
        sd1: f64,
        mean2: f64,
        sd2: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be finite, got {v}")))
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl UnivariateModel {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Self::Normal { mean, sd }
    }

    pub fn standard_normal() -> Self {
        Self::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    pub fn log_normal(log_mean: f64, log_sd: f64) -> Self {
        Self::LogNormal { log_mean, log_sd }
    }

    pub fn beta(a: f64, b: f64) -> Self {
        Self::Beta { a, b }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self::Gamma { shape, rate }
    }

    pub fn student_t(df: f64) -> Self {
        Self::StudentT { df }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mean, sd } => {
                finite("mean", mean)?;
                positive("sd", sd)
            }
            Self::Uniform { lo, hi } => {
                finite("lo", lo)?;
                finite("hi", hi)?;
                if hi > lo {
                    Ok(())
                } else {
                    Err(Error::param(format!("uniform needs hi > lo, got [{lo}, {hi}]")))
                }
            }
            Self::LogNormal { log_mean, log_sd } => {
                finite("log_mean", log_mean)?;
                positive("log_sd", log_sd)
            }
            Self::Beta { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            Self::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            Self::StudentT { df } => positive("df", df),
            Self::NormalMixture {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::param(format!(
                        "mixture weight must lie in [0, 1], got {weight}"
                    )));
                }
                finite("mean1", mean1)?;
                finite("mean2", mean2)?;
                positive("sd1", sd1)?;
                positive("sd2", sd2)
            }
        }
    }

    /// Builds a validated sampler for repeated draws.
    pub fn sampler(&self) -> Result<ModelSampler> {
        self.validate()?;
        let bad = |e: &dyn fmt::Display| Error::param(format!("{self}: {e}"));
        Ok(match *self {
            Self::Normal { mean, sd } => {
                ModelSampler::Normal(Normal::new(mean, sd).map_err(|e| bad(&e))?)
            }
            Self::Uniform { lo, hi } => {
                ModelSampler::Uniform(Uniform::new_inclusive(lo, hi).map_err(|e| bad(&e))?)
            }
            Self::LogNormal { log_mean, log_sd } => ModelSampler::LogNormal(
                LogNormal::new(log_mean, log_sd).map_err(|e| bad(&e))?,
            ),
            Self::Beta { a, b } => ModelSampler::Beta(Beta::new(a, b).map_err(|e| bad(&e))?),
            Self::Gamma { shape, rate } => {
                ModelSampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| bad(&e))?)
            }
            Self::StudentT { df } => {
                ModelSampler::StudentT(StudentT::new(df).map_err(|e| bad(&e))?)
            }
            Self::NormalMixture {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => ModelSampler::Mixture {
                weight,
                first: Normal::new(mean1, sd1).map_err(|e| bad(&e))?,
                second: Normal::new(mean2, sd2).map_err(|e| bad(&e))?,
            },
        })
    }

    /// Draws `n` i.i.d. values; deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
        let sampler = self.sampler()?;
        let mut rng = seed.rng();
        Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
    }

    /// Cumulative distribution function. Assumes a valid model.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let p = match *self {
            Self::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::LogNormal { log_mean, log_sd } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - log_mean) / log_sd)
                }
            }
            Self::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(a, b, x)
                }
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Self::StudentT { df } => {
                if x.is_infinite() {
                    if x > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    // P(|T| > |x|) = I_{df/(df+x^2)}(df/2, 1/2)
                    let t2 = x * x;
                    let tail = if t2 == 0.0 {
                        1.0
                    } else {
                        0.5 * beta_reg(0.5 * df, 0.5, df / (df + t2))
                    };
                    if x > 0.0 {
                        1.0 - tail
                    } else if x < 0.0 {
                        tail
                    } else {
                        0.5
                    }
                }
            }
            Self::NormalMixture {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                weight * std_normal_cdf((x - mean1) / sd1)
                    + (1.0 - weight) * std_normal_cdf((x - mean2) / sd2)
            }
        };
        p.clamp(0.0, 1.0)
    }

    /// Closed support `(lower, upper)`; infinite ends are reported as such.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } => (lo, hi),
            Self::LogNormal { .. } | Self::Gamma { .. } => (0.0, f64::INFINITY),
            Self::Beta { .. } => (0.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Quantile by bracketing and bisection on [`cdf`](Self::cdf).
    pub fn quantile(&self, p: f64) -> f64 {
        let (lo_s, hi_s) = self.support();
        if p <= 0.0 {
            return lo_s;
        }
        if p >= 1.0 {
            return hi_s;
        }
        if let Self::Uniform { lo, hi } = *self {
            return lo + p * (hi - lo);
        }
        let mut lo = if lo_s.is_finite() { lo_s } else { -1.0 };
        let mut hi = if hi_s.is_finite() { hi_s } else { 1.0 };
        while self.cdf(lo) > p && lo > -f64::MAX / 4.0 {
            lo = if lo < 0.0 { lo * 2.0 } else { lo - 1.0 };
        }
        while self.cdf(hi) < p && hi < f64::MAX / 4.0 {
            hi = if hi > 0.0 { hi * 2.0 } else { hi + 1.0 };
        }
        for _ in 0..2100 {
            // Bisect in value space, switching to geometric midpoints when
            // the bracket spans many orders of magnitude.
            let mid = if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else if hi < 0.0 && lo / hi > 4.0 {
                -(lo * hi).sqrt()
            } else if lo < -1.0 && hi > 1.0 {
                0.0
            } else {
                0.5 * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl fmt::Display for UnivariateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
            Self::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Self::LogNormal { log_mean, log_sd } => write!(f, "lognormal({log_mean},{log_sd})"),
            Self::Beta { a, b } => write!(f, "beta({a},{b})"),
            Self::Gamma { shape, rate } => write!(f, "gamma({shape},{rate})"),
            Self::StudentT { df } => write!(f, "t({df})"),
            Self::NormalMixture {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => write!(f, "mixture({weight},{mean1},{sd1},{mean2},{sd2})"),
        }
    }
}

/// Splits `name(a,b,...)` into the lower-cased name and its numeric arguments.
fn parse_call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| Error::param(format!("expected `family(args)`, got `{s}`")))?;
    if !s.ends_with(')') {
        return Err(Error::param(format!("missing `)` in `{s}`")));
    }
    let name = s[..open].trim().to_ascii_lowercase();
    let inner = &s[open + 1..s.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::param(format!("bad number `{}` in `{s}`", a.trim())))
            })
            .collect::<Result<_>>()?
    };
    Ok((name, args))
}

fn arity(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::param(format!(
            "`{name}` takes {n} argument(s), got {}",
            args.len()
        )))
    }
}

impl FromStr for UnivariateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        let model = match name.as_str() {
            "normal" | "n" => {
                arity(&name, &a, 2)?;
                Self::normal(a[0], a[1])
            }
            "uniform" | "u" => {
                arity(&name, &a, 2)?;
                Self::uniform(a[0], a[1])
            }
            "lognormal" | "ln" => {
                arity(&name, &a, 2)?;
                Self::log_normal(a[0], a[1])
            }
            "beta" => {
                arity(&name, &a, 2)?;
                Self::beta(a[0], a[1])
            }
            "gamma" => {
                arity(&name, &a, 2)?;
                Self::gamma(a[0], a[1])
            }
            "t" | "studentt" => {
                arity(&name, &a, 1)?;
                Self::student_t(a[0])
            }
            "mixture" => {
                arity(&name, &a, 5)?;
                Self::NormalMixture {
                    weight: a[0],
                    mean1: a[1],
                    sd1: a[2],
                    mean2: a[3],
                    sd2: a[4],
                }
            }
            other => return Err(Error::param(format!("unknown univariate family `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

impl TryFrom<String> for UnivariateModel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<UnivariateModel> for String {
    fn from(m: UnivariateModel) -> String {
        m.to_string()
    }
}

/// Pre-validated sampler for a [`UnivariateModel`].
#[derive(Debug, Clone, Copy)]
pub enum ModelSampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
    LogNormal(LogNormal<f64>),
    Beta(Beta<f64>),
    Gamma(Gamma<f64>),
    StudentT(StudentT<f64>),
    Mixture {
        weight: f64,
        first: Normal<f64>,
        second: Normal<f64>,
    },
}

impl Distribution<f64> for ModelSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Normal(d) => d.sample(rng),
            Self::Uniform(d) => d.sample(rng),
            Self::LogNormal(d) => d.sample(rng),
            Self::Beta(d) => d.sample(rng),
            Self::Gamma(d) => d.sample(rng),
            Self::StudentT(d) => d.sample(rng),
            Self::Mixture {
                weight,
                first,
                second,
            } => {
                let u: f64 = rng.random();
                if u < *weight {
                    first.sample(rng)
                } else {
                    second.sample(rng)
                }
            }
        }
    }
}

/// Bivariate Gaussian with a full covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BivariateModel {
    Normal { mean: [f64; 2], cov: [[f64; 2]; 2] },
}

impl BivariateModel {
    pub fn normal(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        Self::Normal { mean, cov }
    }

    /// Lower Cholesky factor `(l11, l21, l22)` of the covariance.
    fn cholesky(&self) -> Result<(f64, f64, f64)> {
        let Self::Normal { mean, cov } = *self;
        if !mean.iter().chain(cov.iter().flatten()).all(|v| v.is_finite()) {
            return Err(Error::param("bivariate normal parameters must be finite"));
        }
        if cov[0][1] != cov[1][0] {
            return Err(Error::param("covariance matrix must be symmetric"));
        }
        let (a, b, c) = (cov[0][0], cov[0][1], cov[1][1]);
        if !(a > 0.0 && a * c - b * b > 0.0) {
            return Err(Error::param("covariance matrix must be positive definite"));
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (c - l21 * l21).sqrt();
        Ok((l11, l21, l22))
    }

    pub fn validate(&self) -> Result<()> {
        self.cholesky().map(|_| ())
    }

    pub fn sample(&self, n: usize, seed: SeedSpec) -> Result<Vec<[f64; 2]>> {
        let (l11, l21, l22) = self.cholesky()?;
        let Self::Normal { mean, .. } = *self;
        let mut rng = seed.rng();
        Ok((0..n)
            .map(|_| {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                [mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2]
            })
            .collect())
    }
}

impl fmt::Display for BivariateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Self::Normal { mean, cov } = self;
        write!(
            f,
            "bvnormal({},{},{},{},{})",
            mean[0], mean[1], cov[0][0], cov[0][1], cov[1][1]
        )
    }
}

impl FromStr for BivariateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, a) = parse_call(s)?;
        if name != "bvnormal" {
            return Err(Error::param(format!("unknown bivariate family `{name}`")));
        }
        arity(&name, &a, 5)?;
        let model = Self::normal([a[0], a[1]], [[a[2], a[3]], [a[3], a[4]]]);
        model.validate()?;
        Ok(model)
    }
}

impl TryFrom<String> for BivariateModel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BivariateModel> for String {
    fn from(m: BivariateModel) -> String {
        m.to_string()
    }
}

/// A generating model of either dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Model {
    Univariate(UnivariateModel),
    Bivariate(BivariateModel),
}

impl Model {
    pub fn dimension(&self) -> usize {
        match self {
            Model::Univariate(_) => 1,
            Model::Bivariate(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Univariate(m) => m.validate(),
            Model::Bivariate(m) => m.validate(),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Univariate(m) => m.fmt(f),
            Model::Bivariate(m) => m.fmt(f),
        }
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().to_ascii_lowercase().starts_with("bvnormal") {
            s.parse().map(Model::Bivariate)
        } else {
            s.parse().map(Model::Univariate)
        }
    }
}

impl TryFrom<String> for Model {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Model> for String {
    fn from(m: Model) -> String {
        m.to_string()
    }
}

impl From<UnivariateModel> for Model {
    fn from(m: UnivariateModel) -> Self {
        Model::Univariate(m)
    }
}

impl From<BivariateModel> for Model {
    fn from(m: BivariateModel) -> Self {
        Model::Bivariate(m)
    }
}

/// Identifier of a power-study scenario. Ids 1 to 8 are univariate; 9 and 10
/// are the bivariate Gaussian location shifts without and with correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioId(pub u32);

impl ScenarioId {
    pub const ALL: [ScenarioId; 10] = [
        ScenarioId(1),
        ScenarioId(2),
        ScenarioId(3),
        ScenarioId(4),
        ScenarioId(5),
        ScenarioId(6),
        ScenarioId(7),
        ScenarioId(8),
        ScenarioId(9),
        ScenarioId(10),
    ];

    pub fn name(&self) -> Option<&'static str> {
        Some(match self.0 {
            1 => "normal mean shift",
            2 => "normal variance shift",
            3 => "lognormal mean shift",
            4 => "lognormal variance shift",
            5 => "beta symmetry",
            6 => "gamma shape",
            7 => "normal mixture",
            8 => "tails",
            9 => "bivariate shift",
            10 => "bivariate shift (correlated)",
            _ => return None,
        })
    }

    /// Closed theta range over which the scenario is defined.
    pub fn theta_range(&self) -> Option<(f64, f64)> {
        Some(match self.0 {
            1 | 3 | 7 => (0.0, 3.0),
            2 => (1.0, 4.0),
            4 => (1.0, 5.0),
            5 => (1.0, 6.0),
            6 => (3.0, 6.0),
            8 => (1e-3, 10.0),
            9 | 10 => (0.0, 1.0),
            _ => return None,
        })
    }

    /// Default theta grid: 7 evenly spaced points, or 8 geometric points for
    /// the tails scenario.
    pub fn default_grid(&self) -> Option<Vec<f64>> {
        let (lo, hi) = self.theta_range()?;
        if self.0 == 8 {
            let ratio = (hi / lo).ln();
            return Some(
                (0..8)
                    .map(|i| lo * (ratio * i as f64 / 7.0).exp())
                    .collect(),
            );
        }
        let k = if self.0 >= 9 { 5 } else { 7 };
        Some(
            (0..k)
                .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                .collect(),
        )
    }

    pub fn dimension(&self) -> Option<usize> {
        match self.0 {
            1..=8 => Some(1),
            9 | 10 => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The (X, Y) generating models of a scenario at a given theta.
///
/// Thetas outside the scenario's range are accepted with a warning; a theta
/// that yields invalid parameters is a parameter error.
pub fn scenario(id: ScenarioId, theta: f64) -> Result<(Model, Model)> {
    let (lo, hi) = id
        .theta_range()
        .ok_or_else(|| Error::Usage(format!("unknown scenario id {id}")))?;
    if !(lo..=hi).contains(&theta) {
        log::warn!("theta {theta} lies outside the grid [{lo}, {hi}] of scenario {id}");
    }
    let std = UnivariateModel::standard_normal();
    let uni = |x: UnivariateModel, y: UnivariateModel| -> Result<(Model, Model)> {
        x.validate()?;
        y.validate()?;
        Ok((x.into(), y.into()))
    };
    match id.0 {
        1 => uni(std, UnivariateModel::normal(theta, 1.0)),
        // N(0, theta) is read as variance theta.
        2 => uni(std, UnivariateModel::normal(0.0, theta.sqrt())),
        3 => uni(
            UnivariateModel::log_normal(0.0, 1.0),
            UnivariateModel::log_normal(theta, 1.0),
        ),
        4 => uni(
            UnivariateModel::log_normal(0.0, 1.0),
            UnivariateModel::log_normal(0.0, theta.sqrt()),
        ),
        5 => uni(
            UnivariateModel::beta(1.0, 1.0),
            UnivariateModel::beta(theta, theta),
        ),
        6 => uni(
            UnivariateModel::gamma(3.0, 2.0),
            UnivariateModel::gamma(theta, 2.0),
        ),
        7 => uni(
            std,
            UnivariateModel::NormalMixture {
                weight: 0.5,
                mean1: -theta,
                sd1: 1.0,
                mean2: theta,
                sd2: 1.0,
            },
        ),
        8 => uni(std, UnivariateModel::student_t(1.0 / theta)),
        9 | 10 => {
            let cov = if id.0 == 9 {
                [[1.0, 0.0], [0.0, 1.0]]
            } else {
                [[1.0, 0.5], [0.5, 2.0]]
            };
            let x = BivariateModel::normal([0.0, 0.0], cov);
            let y = BivariateModel::normal([theta, theta], cov);
            x.validate()?;
            y.validate()?;
            Ok((x.into(), y.into()))
        }
        _ => unreachable!("theta_range covers every known id"),
    }
}

const KS_GRID_PER_MODEL: usize = 2048;
const KS_TAIL: f64 = 1e-6;

/// Kolmogorov distance `sup_x |F_X(x) - F_Y(x)|` between two continuous
/// models.
///
/// Candidate points are 2048 quantiles of each model spread between the
/// 1e-6 and 1 - 1e-6 levels (4096 in total, plus finite support ends); the
/// best local maxima are then polished by golden-section search until the
/// bracket shrinks below `tol` relative to its width.
pub fn true_ks_distance(x: &UnivariateModel, y: &UnivariateModel, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tol must be > 0, got {tol}")));
    }
    x.validate()?;
    y.validate()?;
    let gap = |t: f64| (x.cdf(t) - y.cdf(t)).abs();

    let mut pts = Vec::with_capacity(2 * KS_GRID_PER_MODEL + 4);
    for m in [x, y] {
        for i in 0..KS_GRID_PER_MODEL {
            let p = KS_TAIL + (1.0 - 2.0 * KS_TAIL) * i as f64 / (KS_GRID_PER_MODEL - 1) as f64;
            pts.push(m.quantile(p));
        }
        let (lo, hi) = m.support();
        pts.extend([lo, hi].into_iter().filter(|v| v.is_finite()));
    }
    pts.retain(|v| v.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let vals: Vec<f64> = pts.iter().map(|&t| gap(t)).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);

    // Polish the strongest local maxima.
    let mut peaks: Vec<usize> = (0..pts.len())
        .filter(|&i| {
            (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == pts.len() || vals[i] >= vals[i + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(8);
    for i in peaks {
        let a = pts[i.saturating_sub(1)];
        let b = pts[(i + 1).min(pts.len() - 1)];
        best = best.max(golden_max(&gap, a, b, tol));
    }
    Ok(best.clamp(0.0, 1.0))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let width = (b - a).abs();
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = f(a).max(f(b)).max(fc).max(fd);
    for _ in 0..200 {
        if (b - a).abs() <= tol * width.max(f64::MIN_POSITIVE) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            best = best.max(fd);
        }
    }
    best
}
