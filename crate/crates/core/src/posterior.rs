//! Conjugate Dirichlet-process posterior and truncated stick-breaking draws.
//!
//! Given data `x_1..x_n` and a `DP(K, G)` prior, the posterior is
//! `DP(K + n, (K G + sum_i delta_{x_i}) / (K + n))`. Draws are generated by
//! stick breaking with `Beta(1, K + n)` proportions; each atom location is a
//! fresh base draw with probability `K / (K + n)` and otherwise a uniformly
//! chosen observation.

use std::fmt::Debug;

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::distributions::{ModelSampler, UnivariateModel};
use crate::error::{Error, Result};
use crate::seed::{SeedSpec, SimRng};

pub const DEFAULT_TRUNC_EPS: f64 = 1e-4;
pub const DEFAULT_MAX_ATOMS: usize = 100_000;

/// A location in the sample space: `f64` or `[f64; 2]`.
pub trait Point: Copy + Debug + PartialEq + Send + Sync + 'static {
    const DIM: usize;
    fn is_finite(&self) -> bool;
    /// Componentwise `self <= other`.
    fn le(&self, other: &Self) -> bool;
    /// Total order used to canonicalise data (lexicographic in 2-D).
    fn total_cmp(&self, other: &Self) -> std::cmp::Ordering;
}

impl Point for f64 {
    const DIM: usize = 1;
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn le(&self, other: &Self) -> bool {
        self <= other
    }
    fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        f64::total_cmp(self, other)
    }
}

impl Point for [f64; 2] {
    const DIM: usize = 2;
    fn is_finite(&self) -> bool {
        self[0].is_finite() && self[1].is_finite()
    }
    fn le(&self, other: &Self) -> bool {
        self[0] <= other[0] && self[1] <= other[1]
    }
    fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self[0].total_cmp(&other[0]).then(self[1].total_cmp(&other[1]))
    }
}

/// Base probability measure of a Dirichlet process.
pub trait BaseMeasure: Clone + Debug + Send + Sync {
    type Point: Point;
    type Sampler: Clone + Debug + Send + Sync;

    fn sampler(&self) -> Result<Self::Sampler>;
    fn draw(sampler: &Self::Sampler, rng: &mut SimRng) -> Self::Point;
    fn cdf(&self, x: &Self::Point) -> f64;
}

impl BaseMeasure for UnivariateModel {
    type Point = f64;
    type Sampler = ModelSampler;

    fn sampler(&self) -> Result<ModelSampler> {
        UnivariateModel::sampler(self)
    }
    fn draw(sampler: &ModelSampler, rng: &mut SimRng) -> f64 {
        sampler.sample(rng)
    }
    fn cdf(&self, x: &f64) -> f64 {
        UnivariateModel::cdf(self, *x)
    }
}

/// Product of two independent univariate measures on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBase(pub UnivariateModel, pub UnivariateModel);

impl BaseMeasure for ProductBase {
    type Point = [f64; 2];
    type Sampler = (ModelSampler, ModelSampler);

    fn sampler(&self) -> Result<Self::Sampler> {
        Ok((self.0.sampler()?, self.1.sampler()?))
    }
    fn draw(sampler: &Self::Sampler, rng: &mut SimRng) -> [f64; 2] {
        [sampler.0.sample(rng), sampler.1.sample(rng)]
    }
    fn cdf(&self, x: &[f64; 2]) -> f64 {
        self.0.cdf(x[0]) * self.1.cdf(x[1])
    }
}

/// `DP(K, G)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DPPrior<B> {
    pub concentration: f64,
    pub base: B,
}

impl<B: BaseMeasure> DPPrior<B> {
    pub fn new(concentration: f64, base: B) -> Result<Self> {
        if !(concentration.is_finite() && concentration > 0.0) {
            return Err(Error::param(format!(
                "concentration must be finite and > 0, got {concentration}"
            )));
        }
        base.sampler()?;
        Ok(Self {
            concentration,
            base,
        })
    }
}

/// Truncation controls for stick breaking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Stop once the unallocated stick mass falls below this.
    pub eps: f64,
    /// Hard cap on the number of atoms, including the final residual atom.
    pub max_atoms: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            eps: DEFAULT_TRUNC_EPS,
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!(
                "trunc_eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.max_atoms == 0 {
            return Err(Error::param("max_atoms must be >= 1"));
        }
        Ok(())
    }
}

/// A finitely supported probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDistribution<P> {
    atoms: Vec<P>,
    weights: Vec<f64>,
}

impl<P: Point> AtomicDistribution<P> {
    /// Checks lengths, positivity and normalisation (within 1e-12).
    pub fn new(atoms: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::input(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::input("an atomic distribution needs at least one atom"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::input(format!("atom weights must be > 0, got {w}")));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::input(format!("atom locations must be finite, got {a:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Equal-weight empirical measure of a sample.
    pub fn empirical(data: &[P]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::input("empirical measure of an empty sample"));
        }
        let w = 1.0 / data.len() as f64;
        Ok(Self {
            atoms: data.to_vec(),
            weights: vec![w; data.len()],
        })
    }

    pub fn atoms(&self) -> &[P] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> + '_ {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// `P((-inf, x])`, componentwise in 2-D.
    pub fn cdf(&self, x: &P) -> f64 {
        self.iter().filter(|(a, _)| a.le(x)).map(|(_, w)| w).sum()
    }
}

/// A posterior draw together with its truncation status.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw<P> {
    pub distribution: AtomicDistribution<P>,
    /// `true` when `max_atoms` was hit before the residual fell below `eps`.
    pub truncated: bool,
}

/// A posterior draw with all observation-located atoms pooled per
/// observation; what the hot Monte Carlo loop works with.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactDraw<'a, P> {
    /// Canonically ordered observations (see [`PosteriorState::data`]).
    pub data: &'a [P],
    /// Total stick mass landing on each observation (may be zero).
    pub data_weights: Vec<f64>,
    /// Atoms drawn fresh from the base measure, in generation order.
    pub fresh: Vec<(P, f64)>,
    pub truncated: bool,
}

impl<P: Point> CompactDraw<'_, P> {
    /// Expands to an atomic distribution with one atom per observation of
    /// positive mass, followed by the fresh atoms.
    pub fn to_atomic(&self) -> AtomicDistribution<P> {
        let mut atoms = Vec::with_capacity(self.data.len() + self.fresh.len());
        let mut weights = Vec::with_capacity(atoms.capacity());
        for (p, &w) in self.data.iter().zip(&self.data_weights) {
            if w > 0.0 {
                atoms.push(*p);
                weights.push(w);
            }
        }
        for &(p, w) in &self.fresh {
            atoms.push(p);
            weights.push(w);
        }
        AtomicDistribution { atoms, weights }
    }
}

enum Location<P> {
    Observed(usize),
    Fresh(P),
}

/// `DP(K + n, (K G + sum delta_{x_i}) / (K + n))`. Immutable once built.
#[derive(Debug, Clone)]
pub struct PosteriorState<B: BaseMeasure> {
    prior: DPPrior<B>,
    data: Vec<B::Point>,
    sampler: B::Sampler,
}

/// Conjugate update of `prior` with `data`.
pub fn posterior<B: BaseMeasure>(prior: &DPPrior<B>, data: &[B::Point]) -> Result<PosteriorState<B>> {
    PosteriorState::new(prior.clone(), data)
}

impl<B: BaseMeasure> PosteriorState<B> {
    pub fn new(prior: DPPrior<B>, data: &[B::Point]) -> Result<Self> {
        if let Some(p) = data.iter().find(|p| !p.is_finite()) {
            return Err(Error::input(format!("observations must be finite, got {p:?}")));
        }
        let sampler = prior.base.sampler()?;
        let mut data = data.to_vec();
        data.sort_by(Point::total_cmp);
        Ok(Self {
            prior,
            data,
            sampler,
        })
    }

    pub fn prior(&self) -> &DPPrior<B> {
        &self.prior
    }

    /// Observations in canonical order (sorted; lexicographic in 2-D).
    pub fn data(&self) -> &[B::Point] {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    /// `K + n`.
    pub fn concentration(&self) -> f64 {
        self.prior.concentration + self.data.len() as f64
    }

    /// CDF of the posterior base measure, which is also the posterior mean
    /// measure: `(K G(x) + #{i : x_i <= x}) / (K + n)`.
    pub fn posterior_mean_cdf(&self, x: &B::Point) -> f64 {
        let count = if B::Point::DIM == 1 {
            // Sorted data: count by binary search.
            self.data.partition_point(|p| p.le(x))
        } else {
            self.data.iter().filter(|p| p.le(x)).count()
        };
        (self.prior.concentration * self.prior.base.cdf(x) + count as f64) / self.concentration()
    }

    fn break_sticks(
        &self,
        trunc: &Truncation,
        rng: &mut SimRng,
        mut emit: impl FnMut(Location<B::Point>, f64),
    ) -> bool {
        let k = self.prior.concentration;
        let total = self.concentration();
        let inv_total = 1.0 / total;
        let n = self.data.len();

        let locate = |rng: &mut SimRng| {
            let r = rng.random::<f64>() * total;
            if r < k || n == 0 {
                Location::Fresh(B::draw(&self.sampler, rng))
            } else {
                Location::Observed((((r - k) as usize).min(n - 1)) as usize)
            }
        };

        let mut remaining = 1.0f64;
        let mut made = 0usize;
        while made + 1 < trunc.max_atoms && remaining >= trunc.eps {
            // Beta(1, c) proportion v = 1 - U^{1/c}; keep t = 1 - v.
            let u: f64 = Open01.sample(rng);
            let t = (u.ln() * inv_total).exp();
            let w = remaining * (1.0 - t);
            let loc = locate(rng);
            if w > 0.0 {
                emit(loc, w);
                made += 1;
            }
            remaining *= t;
        }
        let truncated = remaining >= trunc.eps;
        if remaining > 0.0 {
            let loc = locate(rng);
            emit(loc, remaining);
        }
        truncated
    }

    /// One stick-breaking draw from the posterior, atoms in generation order.
    ///
    /// Coincident atoms (a base draw landing on an observation, or the same
    /// observation chosen twice) are kept as separate atoms.
    pub fn draw(&self, trunc: &Truncation, seed: SeedSpec) -> Result<PosteriorDraw<B::Point>> {
        trunc.validate()?;
        let mut rng = seed.rng();
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let truncated = self.break_sticks(trunc, &mut rng, |loc, w| {
            atoms.push(match loc {
                Location::Observed(i) => self.data[i],
                Location::Fresh(p) => p,
            });
            weights.push(w);
        });
        Ok(PosteriorDraw {
            distribution: AtomicDistribution { atoms, weights },
            truncated,
        })
    }

    /// Same draw as [`draw`](Self::draw) for the same seed, with the stick
    /// mass on each observation pooled.
    pub fn draw_compact(&self, trunc: &Truncation, seed: SeedSpec) -> Result<CompactDraw<'_, B::Point>> {
        trunc.validate()?;
        let mut rng = seed.rng();
        let mut data_weights = vec![0.0; self.data.len()];
        let mut fresh = Vec::new();
        let truncated = self.break_sticks(trunc, &mut rng, |loc, w| match loc {
            Location::Observed(i) => data_weights[i] += w,
            Location::Fresh(p) => fresh.push((p, w)),
        });
        Ok(CompactDraw {
            data: &self.data,
            data_weights,
            fresh,
            truncated,
        })
    }
}
