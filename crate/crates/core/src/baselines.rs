//! Classical two-sample baselines: the Kolmogorov-Smirnov test and the
//! Wilcoxon rank-sum (Mann-Whitney) test.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::metrics::ks_atomic;
use crate::posterior::AtomicDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "WIKS")]
    Wiks,
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "WILCOX")]
    Wilcox,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Wiks => "WIKS",
            Method::Ks => "KS",
            Method::Wilcox => "WILCOX",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "WIKS" => Ok(Method::Wiks),
            "KS" => Ok(Method::Ks),
            "WILCOX" | "WILCOXON" => Ok(Method::Wilcox),
            other => Err(Error::Usage(format!(
                "unknown method `{other}` (expected WIKS, KS or WILCOX)"
            ))),
        }
    }
}

/// Outcome of one test on one pair of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
    pub n: usize,
    pub m: usize,
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::input("both samples must be nonempty"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::input("samples must be finite"));
    }
    Ok(())
}

/// `P(K > lambda)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series, fast for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=40)
            .map(|k| ((2 * k - 1) as f64).powi(2))
            .map(|j| (j * c).exp())
            .sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// `sqrt(nm / (n + m)) D`.
pub fn classical_ks_test(x: &[f64], y: &[f64]) -> Result<TestReport> {
    check_samples(x, y)?;
    let d = ks_atomic(&AtomicDistribution::empirical(x)?, &AtomicDistribution::empirical(y)?)
        .value();
    let (n, m) = (x.len() as f64, y.len() as f64);
    let lambda = (n * m / (n + m)).sqrt() * d;
    Ok(TestReport {
        method: Method::Ks,
        statistic: d,
        p_value: Some(kolmogorov_survival(lambda)),
        threshold: None,
        reject: None,
        n: x.len(),
        m: y.len(),
    })
}

/// Midranks of the pooled sample plus the tie-group sizes.
fn midranks(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = x.iter().chain(y).copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for p in &pooled[i..=j] {
            ranks[p.1] = rank;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Mann-Whitney `U = R_x - n(n+1)/2`, with midranks for ties.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> f64 {
    let (ranks, _) = midranks(x, y);
    let n = x.len() as f64;
    ranks[..x.len()].iter().sum::<f64>() - n * (n + 1.0) / 2.0
}

/// Wilcoxon rank-sum test with the normal approximation (tie-corrected
/// variance, continuity correction), two-sided.
pub fn wilcoxon_test(x: &[f64], y: &[f64]) -> Result<TestReport> {
    check_samples(x, y)?;
    let (ranks, ties) = midranks(x, y);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let total = n + m;
    let u = ranks[..x.len()].iter().sum::<f64>() - n * (n + 1.0) / 2.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| (t as f64).powi(3) - t as f64)
        .sum::<f64>()
        / (total * (total - 1.0));
    let var = n * m / 12.0 * ((total + 1.0) - tie_term);
    if !(var > 0.0) {
        return Err(Error::Degenerate(
            "all pooled observations are identical; the rank-sum variance is zero".into(),
        ));
    }
    let centred = u - n * m / 2.0;
    let correction = 0.5 * centred.signum();
    let z = (centred - correction) / var.sqrt();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(TestReport {
        method: Method::Wilcox,
        statistic: u,
        p_value: Some(p),
        threshold: None,
        reject: None,
        n: x.len(),
        m: y.len(),
    })
}

/// Null frequencies of `U` for sample sizes `n`, `m` without ties:
/// `counts[u]` is the number of rank splits with statistic `u`.
pub fn mann_whitney_counts(n: usize, m: usize) -> Vec<u128> {
    // f[i][j][u] = f[i-1][j][u-j] + f[i][j-1][u]; roll over i.
    let max_u = n * m;
    let mut prev: Vec<Vec<u128>> = (0..=m)
        .map(|_| {
            let mut v = vec![0u128; max_u + 1];
            v[0] = 1;
            v
        })
        .collect();
    for _i in 1..=n {
        let mut cur: Vec<Vec<u128>> = vec![vec![0u128; max_u + 1]; m + 1];
        cur[0][0] = 1;
        for j in 1..=m {
            for u in 0..=max_u {
                let a = if u >= j { prev[j][u - j] } else { 0 };
                cur[j][u] = a + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

/// Exact two-sided Wilcoxon rank-sum test for untied samples:
/// `p = min(1, 2 min(P(U <= u), P(U >= u)))`.
pub fn wilcoxon_exact_test(x: &[f64], y: &[f64]) -> Result<TestReport> {
    check_samples(x, y)?;
    let (_, ties) = midranks(x, y);
    if !ties.is_empty() {
        return Err(Error::input("the exact rank-sum distribution needs untied samples"));
    }
    if x.len() + y.len() > 60 {
        return Err(Error::Resource(
            "exact rank-sum enumeration is limited to 60 pooled observations".into(),
        ));
    }
    let u = mann_whitney_u(x, y);
    let counts = mann_whitney_counts(x.len(), y.len());
    let total: u128 = counts.iter().sum();
    let ui = u as usize;
    let lower: u128 = counts[..=ui].iter().sum();
    let upper: u128 = counts[ui..].iter().sum();
    let tail = (2 * lower.min(upper)).min(total);
    Ok(TestReport {
        method: Method::Wilcox,
        statistic: u,
        p_value: Some(tail as f64 / total as f64),
        threshold: None,
        reject: None,
        n: x.len(),
        m: y.len(),
    })
}
