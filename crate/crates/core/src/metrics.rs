//! Kolmogorov (uniform) distance between atomic measures in one and two
//! dimensions, the shrunk empirical statistic `Z`, and the distance between
//! posterior mean measures.
//!
//! All suprema are evaluated exactly: CDFs of atomic measures are step
//! functions, so the supremum is attained at an atom location (1-D) or on
//! the grid of atom coordinates (2-D).

use serde::{Deserialize, Serialize};

use crate::distributions::UnivariateModel;
use crate::error::{Error, Result};
use crate::posterior::{AtomicDistribution, BaseMeasure, CompactDraw, Point, PosteriorState};

/// Default cap on the combined atom count of a bivariate distance.
pub const DEFAULT_BIVARIATE_ATOM_CAP: usize = 2_000_000;

/// Default number of base-quantile points in [`ks_mean_measures`].
pub const DEFAULT_MEAN_GRID: usize = 1024;

/// A Kolmogorov distance, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceValue(f64);

impl DistanceValue {
    pub fn new(v: f64) -> Self {
        Self(v.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<DistanceValue> for f64 {
    fn from(d: DistanceValue) -> f64 {
        d.0
    }
}

/// A distance between probability measures on a common space.
///
/// Only the Kolmogorov metric is provided; the trait is the extension point
/// for others.
pub trait ProbabilityMetric<P: Point>: Send + Sync {
    fn distance(&self, p: &AtomicDistribution<P>, q: &AtomicDistribution<P>) -> Result<f64>;

    fn distance_compact(&self, p: &CompactDraw<'_, P>, q: &CompactDraw<'_, P>) -> Result<f64> {
        self.distance(&p.to_atomic(), &q.to_atomic())
    }

    /// Largest value the metric can take.
    fn max_distance(&self) -> f64 {
        1.0
    }
}

/// The Kolmogorov metric `sup_x |P((-inf, x]) - Q((-inf, x])|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kolmogorov {
    /// Only used in two dimensions.
    pub bivariate_atom_cap: usize,
}

impl Default for Kolmogorov {
    fn default() -> Self {
        Self {
            bivariate_atom_cap: DEFAULT_BIVARIATE_ATOM_CAP,
        }
    }
}

impl ProbabilityMetric<f64> for Kolmogorov {
    fn distance(&self, p: &AtomicDistribution<f64>, q: &AtomicDistribution<f64>) -> Result<f64> {
        Ok(ks_atomic(p, q).value())
    }

    fn distance_compact(&self, p: &CompactDraw<'_, f64>, q: &CompactDraw<'_, f64>) -> Result<f64> {
        Ok(ks_sorted(&merge_compact(p), &merge_compact(q)).min(1.0))
    }
}

impl ProbabilityMetric<[f64; 2]> for Kolmogorov {
    fn distance(
        &self,
        p: &AtomicDistribution<[f64; 2]>,
        q: &AtomicDistribution<[f64; 2]>,
    ) -> Result<f64> {
        ks_atomic_bivariate_capped(p, q, self.bivariate_atom_cap).map(DistanceValue::value)
    }

    fn distance_compact(
        &self,
        p: &CompactDraw<'_, [f64; 2]>,
        q: &CompactDraw<'_, [f64; 2]>,
    ) -> Result<f64> {
        let total = p.data.len() + p.fresh.len() + q.data.len() + q.fresh.len();
        check_cap(total, self.bivariate_atom_cap)?;
        let mut signed = Vec::with_capacity(total);
        for (sign, d) in [(1.0, p), (-1.0, q)] {
            signed.extend(
                d.data
                    .iter()
                    .zip(&d.data_weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(a, w)| (*a, sign * w)),
            );
            signed.extend(d.fresh.iter().map(|(a, w)| (*a, sign * w)));
        }
        Ok(sup_signed_bivariate(signed).min(1.0))
    }
}

fn sorted_atoms(p: &AtomicDistribution<f64>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = p.iter().map(|(a, w)| (*a, w)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Merges the (sorted) observation bins with the sorted fresh atoms.
fn merge_compact(d: &CompactDraw<'_, f64>) -> Vec<(f64, f64)> {
    let mut fresh = d.fresh.clone();
    fresh.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(d.data.len() + fresh.len());
    let mut f = fresh.into_iter().peekable();
    for (&x, &w) in d.data.iter().zip(&d.data_weights) {
        while let Some(&(fx, fw)) = f.peek() {
            if fx < x {
                out.push((fx, fw));
                f.next();
            } else {
                break;
            }
        }
        out.push((x, w));
    }
    out.extend(f);
    out
}

/// Sweep over two location-sorted atom lists. Atoms sharing a location are
/// all absorbed before the gap at that location is measured.
fn ks_sorted(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fp, mut fq) = (0.0f64, 0.0f64);
    let mut sup = 0.0f64;
    while i < p.len() || j < q.len() {
        let t = match (p.get(i), q.get(j)) {
            (Some(a), Some(b)) => a.0.min(b.0),
            (Some(a), None) => a.0,
            (None, Some(b)) => b.0,
            (None, None) => unreachable!(),
        };
        while i < p.len() && p[i].0 == t {
            fp += p[i].1;
            i += 1;
        }
        while j < q.len() && q[j].0 == t {
            fq += q[j].1;
            j += 1;
        }
        sup = sup.max((fp - fq).abs());
    }
    sup
}

/// Exact Kolmogorov distance between two univariate atomic measures.
pub fn ks_atomic(p: &AtomicDistribution<f64>, q: &AtomicDistribution<f64>) -> DistanceValue {
    DistanceValue::new(ks_sorted(&sorted_atoms(p), &sorted_atoms(q)))
}

fn check_cap(total: usize, cap: usize) -> Result<()> {
    if total > cap {
        Err(Error::Resource(format!(
            "bivariate distance over {total} atoms exceeds the cap of {cap}; \
             use a larger trunc_eps or a smaller max_atoms"
        )))
    } else {
        Ok(())
    }
}

/// Exact bivariate Kolmogorov distance with the default atom cap.
pub fn ks_atomic_bivariate(
    p: &AtomicDistribution<[f64; 2]>,
    q: &AtomicDistribution<[f64; 2]>,
) -> Result<DistanceValue> {
    ks_atomic_bivariate_capped(p, q, DEFAULT_BIVARIATE_ATOM_CAP)
}

/// Exact bivariate Kolmogorov distance: the supremum of `|F_P - F_Q|` over
/// every (atom x-coordinate, atom y-coordinate) pair of `P` and `Q`.
pub fn ks_atomic_bivariate_capped(
    p: &AtomicDistribution<[f64; 2]>,
    q: &AtomicDistribution<[f64; 2]>,
    cap: usize,
) -> Result<DistanceValue> {
    check_cap(p.len() + q.len(), cap)?;
    let signed = p
        .iter()
        .map(|(a, w)| (*a, w))
        .chain(q.iter().map(|(a, w)| (*a, -w)))
        .collect();
    Ok(DistanceValue::new(sup_signed_bivariate(signed)))
}

/// Sup over the coordinate grid of `|sum_{a <= (x, y)} w_a|` for signed
/// atoms, by sweeping x and keeping y-prefix sums in a segment tree.
fn sup_signed_bivariate(mut atoms: Vec<([f64; 2], f64)>) -> f64 {
    if atoms.is_empty() {
        return 0.0;
    }
    let mut ys: Vec<f64> = atoms.iter().map(|(a, _)| a[1]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    atoms.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));

    let mut tree = MaxMinTree::new(ys.len());
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i].0[0];
        while i < atoms.len() && atoms[i].0[0] == x {
            let (a, w) = atoms[i];
            let rank = ys.partition_point(|&y| y < a[1]);
            tree.add_suffix(rank, w);
            i += 1;
        }
        sup = sup.max(tree.max().abs()).max(tree.min().abs());
    }
    sup
}

/// Range-add / global max-min segment tree over positions `0..len`.
struct MaxMinTree {
    len: usize,
    add: Vec<f64>,
    max: Vec<f64>,
    min: Vec<f64>,
}

impl MaxMinTree {
    fn new(len: usize) -> Self {
        let size = 4 * len.max(1);
        Self {
            len,
            add: vec![0.0; size],
            max: vec![0.0; size],
            min: vec![0.0; size],
        }
    }

    fn add_suffix(&mut self, from: usize, w: f64) {
        if from < self.len {
            self.update(1, 0, self.len, from, self.len, w);
        }
    }

    fn update(&mut self, node: usize, lo: usize, hi: usize, a: usize, b: usize, w: f64) {
        if b <= lo || hi <= a {
            return;
        }
        if a <= lo && hi <= b {
            self.add[node] += w;
            self.max[node] += w;
            self.min[node] += w;
            return;
        }
        let mid = (lo + hi) / 2;
        self.update(2 * node, lo, mid, a, b, w);
        self.update(2 * node + 1, mid, hi, a, b, w);
        let (l, r) = (2 * node, 2 * node + 1);
        self.max[node] = self.add[node] + self.max[l].max(self.max[r]);
        self.min[node] = self.add[node] + self.min[l].min(self.min[r]);
    }

    fn max(&self) -> f64 {
        self.max[1]
    }

    fn min(&self) -> f64 {
        self.min[1]
    }
}

/// `sup_x |#{x_i <= x} / (K + n) - #{y_j <= x} / (K + m)|`.
pub fn z_statistic(x: &[f64], y: &[f64], k: f64) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::input("z statistic needs two nonempty samples"));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::param(format!("K must be finite and > 0, got {k}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::input("samples must be finite"));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (dx, dy) = (k + xs.len() as f64, k + ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() || j < ys.len() {
        let t = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] == t {
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            j += 1;
        }
        sup = sup.max((i as f64 / dx - j as f64 / dy).abs());
    }
    Ok(sup)
}

/// Kolmogorov distance between the posterior mean measures of two
/// univariate states, evaluated at every observation of both samples and at
/// `grid` quantiles of each base measure.
pub fn ks_mean_measures<B>(
    x: &PosteriorState<B>,
    y: &PosteriorState<B>,
    grid: usize,
) -> DistanceValue
where
    B: BaseMeasure<Point = f64> + AsUnivariate,
{
    let mut pts: Vec<f64> = x.data().iter().chain(y.data()).copied().collect();
    for base in [&x.prior().base, &y.prior().base] {
        let model = base.as_univariate();
        pts.extend((0..grid).map(|i| model.quantile((i as f64 + 0.5) / grid as f64)));
    }
    let sup = pts
        .iter()
        .map(|t| (x.posterior_mean_cdf(t) - y.posterior_mean_cdf(t)).abs())
        .fold(0.0, f64::max);
    DistanceValue::new(sup)
}

/// Access to the underlying univariate model of a 1-D base measure.
pub trait AsUnivariate {
    fn as_univariate(&self) -> &UnivariateModel;
}

impl AsUnivariate for UnivariateModel {
    fn as_univariate(&self) -> &UnivariateModel {
        self
    }
}
