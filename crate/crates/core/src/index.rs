//! The WIKS index: weight functions, the Monte Carlo estimator, the
//! survival-integral form and the Bayes decision rule.
//!
//! For a weight density `w` on `[0, 1]` with CDF `W`,
//!
//! ```text
//! WIKS = int_0^1 w(e) P(d(P1, P2) > e) de = E[W(d(P1, P2))],
//! ```
//!
//! the expectation being over the joint posterior of `(P1, P2)`. The
//! estimator averages `W(d)` over `S` independent posterior draw pairs.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Kolmogorov, ProbabilityMetric};
use crate::posterior::{BaseMeasure, DPPrior, PosteriorState, Truncation};
use crate::seed::SeedSpec;

pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_LAMBDA: f64 = 4.0;

/// Cumulative weight function `W` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `W(t) = 1 - (1 - t)^lambda`, the CDF of `Beta(1, lambda)`.
    PowerComplement { lambda: f64 },
    /// `W(t) = t`.
    Uniform,
    /// Piecewise-linear interpolation of `(knot, value)` pairs.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self::PowerComplement {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl WeightSpec {
    pub fn power_complement(lambda: f64) -> Result<Self> {
        let spec = Self::PowerComplement { lambda };
        spec.validate()?;
        Ok(spec)
    }

    /// A tabulated `W`. Knots must increase strictly from 0 to 1; values are
    /// clamped to `[0, 1]` and made monotone by a running maximum, and must
    /// start at 0 and end at 1.
    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut values: Vec<f64> = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        for i in 1..values.len() {
            values[i] = values[i].max(values[i - 1]);
        }
        let spec = Self::Tabulated { knots, values };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerComplement { lambda } => {
                if lambda.is_finite() && *lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param(format!("lambda must be finite and > 0, got {lambda}")))
                }
            }
            Self::Uniform => Ok(()),
            Self::Tabulated { knots, values } => {
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(Error::param(
                        "tabulated weight needs >= 2 knots and one value per knot",
                    ));
                }
                if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
                    return Err(Error::param("tabulated knots must start at 0 and end at 1"));
                }
                if knots.windows(2).any(|k| !(k[1] > k[0])) {
                    return Err(Error::param("tabulated knots must increase strictly"));
                }
                if values[0] != 0.0 || *values.last().unwrap() != 1.0 {
                    return Err(Error::param("tabulated values must run from 0 to 1"));
                }
                if values.windows(2).any(|v| v[1] < v[0]) || values.iter().any(|v| !v.is_finite())
                {
                    return Err(Error::param("tabulated values must be nondecreasing"));
                }
                Ok(())
            }
        }
    }

    /// `W(t)` for `t` already known to lie in `[0, 1]`.
    fn eval(&self, t: f64) -> f64 {
        match self {
            Self::PowerComplement { lambda } => 1.0 - (1.0 - t).powf(*lambda),
            Self::Uniform => t,
            Self::Tabulated { knots, values } => {
                let i = knots.partition_point(|&k| k <= t);
                if i >= knots.len() {
                    return values[values.len() - 1];
                }
                let (k0, k1) = (knots[i - 1], knots[i]);
                let (v0, v1) = (values[i - 1], values[i]);
                (v0 + (v1 - v0) * (t - k0) / (k1 - k0)).clamp(v0, v1)
            }
        }
    }

    /// Weight density `w = W'`. Tabulated weights use the slope of the
    /// segment containing `t`.
    pub fn density(&self, t: f64) -> f64 {
        match self {
            Self::PowerComplement { lambda } => lambda * (1.0 - t).powf(lambda - 1.0),
            Self::Uniform => 1.0,
            Self::Tabulated { knots, values } => {
                let i = knots.partition_point(|&k| k <= t).clamp(1, knots.len() - 1);
                (values[i] - values[i - 1]) / (knots[i] - knots[i - 1])
            }
        }
    }

    /// Points in `(0, 1)` where `w` is not smooth.
    fn kinks(&self) -> &[f64] {
        match self {
            Self::Tabulated { knots, .. } => &knots[1..knots.len() - 1],
            _ => &[],
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerComplement { lambda } => write!(f, "power({lambda})"),
            Self::Uniform => write!(f, "uniform"),
            Self::Tabulated { knots, values } => {
                write!(f, "tabulated(")?;
                for (i, (k, v)) in knots.iter().zip(values).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}:{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    /// `power(4)`, `uniform`, or `tabulated(0:0,0.5:0.8,1:1)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        if lower == "uniform" {
            return Ok(Self::Uniform);
        }
        let inner = |prefix: &str| {
            lower
                .strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::to_owned)
        };
        if let Some(arg) = inner("power") {
            let lambda = arg
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad lambda in `{s}`")))?;
            return Self::power_complement(lambda);
        }
        if let Some(arg) = inner("tabulated") {
            let mut knots = Vec::new();
            let mut values = Vec::new();
            for pair in arg.split(',') {
                let (k, v) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::param(format!("expected knot:value, got `{pair}`")))?;
                let num = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::param(format!("bad number `{t}` in `{s}`")))
                };
                knots.push(num(k)?);
                values.push(num(v)?);
            }
            return Self::tabulated(knots, values);
        }
        Err(Error::param(format!(
            "unknown weight `{s}` (expected power(lambda), uniform or tabulated(...))"
        )))
    }
}

/// `W(t)`; `t` must lie in `[0, 1]`.
pub fn cumulative_weight(spec: &WeightSpec, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::input(format!("weight argument must lie in [0, 1], got {t}")));
    }
    spec.validate()?;
    Ok(spec.eval(t))
}

/// Monte Carlo estimate of the index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiksEstimate {
    pub value: f64,
    /// Sample standard deviation of the `W(d)` draws over `sqrt(S)`.
    pub mc_std_error: f64,
    pub draws: usize,
    /// Draws in which either posterior sample hit the atom cap.
    pub truncation_flag_count: usize,
}

/// One sampled distance between a posterior draw pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceDraw {
    pub distance: f64,
    pub truncated: bool,
}

/// Source of posterior distance draws; one call per Monte Carlo draw.
pub trait DistanceSampler: Sync {
    fn sample_distance(&self, seed: SeedSpec) -> Result<DistanceDraw>;
}

/// Draws `(P1, P2)` independently from two Dirichlet-process posteriors and
/// measures them with `metric`.
pub struct DpPairSampler<'a, B: BaseMeasure, M> {
    pub x: &'a PosteriorState<B>,
    pub y: &'a PosteriorState<B>,
    pub metric: M,
    pub truncation: Truncation,
}

impl<B, M> DistanceSampler for DpPairSampler<'_, B, M>
where
    B: BaseMeasure,
    M: ProbabilityMetric<B::Point>,
{
    fn sample_distance(&self, seed: SeedSpec) -> Result<DistanceDraw> {
        let p = self.x.draw_compact(&self.truncation, seed.child(0))?;
        let q = self.y.draw_compact(&self.truncation, seed.child(1))?;
        Ok(DistanceDraw {
            distance: self.metric.distance_compact(&p, &q)?,
            truncated: p.truncated || q.truncated,
        })
    }
}

/// Averages `W(d)` over `draws` sampled distances; draw `s` uses
/// `seed.child(s)`. Draws run in parallel and are reduced in index order.
pub fn estimate_index<D: DistanceSampler>(
    sampler: &D,
    spec: &WeightSpec,
    draws: usize,
    seed: SeedSpec,
) -> Result<WiksEstimate> {
    if draws == 0 {
        return Err(Error::input("the number of Monte Carlo draws must be >= 1"));
    }
    spec.validate()?;
    let samples = (0..draws as u64)
        .into_par_iter()
        .map(|s| sampler.sample_distance(seed.child(s)))
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = samples.iter().map(|d| d.distance).collect();
    let truncated = samples.iter().filter(|d| d.truncated).count();
    estimate_from_distances(&distances, truncated, spec)
}

/// The estimator applied to a given vector of sampled distances.
pub fn estimate_from_distances(
    distances: &[f64],
    truncation_flag_count: usize,
    spec: &WeightSpec,
) -> Result<WiksEstimate> {
    if distances.is_empty() {
        return Err(Error::input("no distance draws"));
    }
    let weighted = distances
        .iter()
        .map(|&d| cumulative_weight(spec, d))
        .collect::<Result<Vec<f64>>>()?;
    let s = weighted.len() as f64;
    let mean = weighted.iter().sum::<f64>() / s;
    let se = if weighted.len() > 1 {
        let var = weighted.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (s - 1.0);
        (var / s).sqrt()
    } else {
        0.0
    };
    Ok(WiksEstimate {
        value: mean.clamp(0.0, 1.0),
        mc_std_error: se,
        draws: distances.len(),
        truncation_flag_count,
    })
}

/// Monte Carlo settings of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiksConfig {
    pub weight: WeightSpec,
    pub draws: usize,
    pub truncation: Truncation,
}

impl Default for WiksConfig {
    fn default() -> Self {
        Self {
            weight: WeightSpec::default(),
            draws: DEFAULT_DRAWS,
            truncation: Truncation::default(),
        }
    }
}

/// WIKS index of samples `x` and `y` under independent `prior`s with the
/// Kolmogorov metric.
pub fn wiks<B>(
    x: &[B::Point],
    y: &[B::Point],
    prior: &DPPrior<B>,
    config: &WiksConfig,
    seed: SeedSpec,
) -> Result<WiksEstimate>
where
    B: BaseMeasure,
    Kolmogorov: ProbabilityMetric<B::Point>,
{
    config.truncation.validate()?;
    let sx = PosteriorState::new(prior.clone(), x)?;
    let sy = PosteriorState::new(prior.clone(), y)?;
    let sampler = DpPairSampler {
        x: &sx,
        y: &sy,
        metric: Kolmogorov::default(),
        truncation: config.truncation,
    };
    estimate_index(&sampler, &config.weight, config.draws, seed)
}

/// `int_0^1 w(e) S(e) de` with `S` the empirical survival function of
/// `distances`, by Gauss-Legendre quadrature with `quadrature_points` nodes
/// on every interval where `S` is constant and `w` is smooth.
pub fn wiks_survival_form(
    distances: &[f64],
    spec: &WeightSpec,
    quadrature_points: usize,
) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::input("no distance draws"));
    }
    if let Some(d) = distances.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::input(format!("distances must lie in [0, 1], got {d}")));
    }
    if quadrature_points == 0 {
        return Err(Error::input("quadrature_points must be >= 1"));
    }
    spec.validate()?;

    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut breaks: Vec<f64> = vec![0.0, 1.0];
    breaks.extend(sorted.iter().copied().filter(|d| *d > 0.0 && *d < 1.0));
    breaks.extend_from_slice(spec.kinks());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let (nodes, weights) = gauss_legendre(quadrature_points);
    let n = sorted.len() as f64;
    let mut total = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = 0.5 * (a + b);
        // Fraction of distances strictly above the interval interior.
        let survival = (sorted.len() - sorted.partition_point(|&d| d <= mid)) as f64 / n;
        if survival == 0.0 {
            continue;
        }
        let half = 0.5 * (b - a);
        let integral: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * spec.density(mid + half * x))
            .sum::<f64>()
            * half;
        total += survival * integral;
    }
    Ok(total)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Bayes threshold `c1 / (c1 + c0)` for the losses of wrongly accepting
/// (`c0`) and wrongly rejecting (`c1`).
pub fn threshold_from_losses(c0: f64, c1: f64) -> Result<f64> {
    if !(c0.is_finite() && c0 > 0.0 && c1.is_finite() && c1 > 0.0) {
        return Err(Error::input(format!(
            "losses must be finite and > 0, got c0={c0}, c1={c1}"
        )));
    }
    Ok(c1 / (c1 + c0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    Threshold(f64),
    Losses { c0: f64, c1: f64 },
}

impl DecisionRule {
    pub fn threshold(&self) -> Result<f64> {
        let c = match *self {
            DecisionRule::Threshold(c) => c,
            DecisionRule::Losses { c0, c1 } => threshold_from_losses(c0, c1)?,
        };
        if c > 0.0 && c < 1.0 {
            Ok(c)
        } else {
            Err(Error::input(format!("threshold must lie in (0, 1), got {c}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RejectH0,
    AcceptH0,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::RejectH0 => "reject H0",
            Verdict::AcceptH0 => "accept H0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub value: f64,
    pub threshold: f64,
}

/// Rejects H0 iff the index is strictly above the threshold.
pub fn decide(estimate: &WiksEstimate, rule: &DecisionRule) -> Result<Decision> {
    let threshold = rule.threshold()?;
    let verdict = if estimate.value > threshold {
        Verdict::RejectH0
    } else {
        Verdict::AcceptH0
    };
    Ok(Decision {
        verdict,
        value: estimate.value,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(value: f64) -> WiksEstimate {
        WiksEstimate {
            value,
            mc_std_error: 0.0,
            draws: 1,
            truncation_flag_count: 0,
        }
    }

    #[test]
    fn power_complement_values() {
        let w = WeightSpec::default();
        assert_eq!(cumulative_weight(&w, 0.0).unwrap(), 0.0);
        assert_eq!(cumulative_weight(&w, 1.0).unwrap(), 1.0);
        assert_eq!(cumulative_weight(&w, 0.5).unwrap(), 0.9375);
        assert!(cumulative_weight(&w, 1.5).is_err());
        assert!(cumulative_weight(&w, -0.1).is_err());
        assert!(WeightSpec::power_complement(0.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let w = WeightSpec::tabulated(vec![0.0, 0.5, 1.0], vec![0.0, 0.8, 1.2]).unwrap();
        assert_eq!(cumulative_weight(&w, 0.25).unwrap(), 0.4);
        assert_eq!(cumulative_weight(&w, 1.0).unwrap(), 1.0);
        assert!((cumulative_weight(&w, 0.75).unwrap() - 0.9).abs() < 1e-15);
        // Running max repairs a dip.
        let w = WeightSpec::tabulated(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 0.5, 0.4, 1.0]).unwrap();
        assert_eq!(cumulative_weight(&w, 0.6).unwrap(), 0.5);
        assert!(WeightSpec::tabulated(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
        assert!(WeightSpec::tabulated(vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn weight_strings() {
        for s in ["power(4)", "uniform", "tabulated(0:0,0.5:0.8,1:1)"] {
            let w: WeightSpec = s.parse().unwrap();
            assert_eq!(w.to_string(), s);
        }
        assert!("power(-1)".parse::<WeightSpec>().is_err());
        assert!("cubic".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // Exact through degree 2n - 1.
            let deg = 2 * n - 1;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let expect = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((got - expect).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn survival_form_reference_values() {
        let pc = WeightSpec::default();
        assert_eq!(wiks_survival_form(&[0.0, 0.0], &pc, 8).unwrap(), 0.0);
        assert!((wiks_survival_form(&[1.0, 1.0], &pc, 8).unwrap() - 1.0).abs() < 1e-12);
        let v = wiks_survival_form(&[0.2, 0.6], &WeightSpec::Uniform, 16).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        assert!(wiks_survival_form(&[1.2], &pc, 8).is_err());
    }

    #[test]
    fn losses_and_decisions() {
        assert_eq!(threshold_from_losses(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(threshold_from_losses(3.0, 1.0).unwrap(), 0.25);
        assert_eq!(threshold_from_losses(1.0, 3.0).unwrap(), 0.75);
        assert!(threshold_from_losses(0.0, 1.0).is_err());
        assert!(threshold_from_losses(1.0, -2.0).is_err());

        let rule = DecisionRule::Threshold(0.7558);
        assert_eq!(decide(&est(0.9993), &rule).unwrap().verdict, Verdict::RejectH0);
        let rule = DecisionRule::Threshold(0.727);
        assert_eq!(decide(&est(0.5), &rule).unwrap().verdict, Verdict::AcceptH0);
        let d = decide(&est(0.727), &rule).unwrap();
        assert_eq!(d.verdict, Verdict::AcceptH0);
        assert_eq!((d.value, d.threshold), (0.727, 0.727));
        let d = decide(&est(0.6), &DecisionRule::Losses { c0: 1.0, c1: 1.0 }).unwrap();
        assert_eq!(d.verdict, Verdict::RejectH0);
        assert!(decide(&est(0.5), &DecisionRule::Threshold(1.0)).is_err());
    }

    #[test]
    fn zero_draws_rejected() {
        struct Zero;
        impl DistanceSampler for Zero {
            fn sample_distance(&self, _: SeedSpec) -> Result<DistanceDraw> {
                Ok(DistanceDraw { distance: 0.0, truncated: false })
            }
        }
        assert!(estimate_index(&Zero, &WeightSpec::default(), 0, SeedSpec::root(0)).is_err());
        let e = estimate_index(&Zero, &WeightSpec::default(), 1, SeedSpec::root(0)).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.mc_std_error, 0.0);
    }
}
