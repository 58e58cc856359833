//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use wiks::seed::SimRng;

/// `F(t) = sum of weights of atoms <= t`.
pub fn cdf_1d(atoms: &[f64], weights: &[f64], t: f64) -> f64 {
    atoms
        .iter()
        .zip(weights)
        .filter(|(a, _)| **a <= t)
        .map(|(_, w)| w)
        .sum()
}

/// `sup |F_P - F_Q|` evaluated at every atom of both measures.
pub fn brute_ks(pa: &[f64], pw: &[f64], qa: &[f64], qw: &[f64]) -> f64 {
    pa.iter()
        .chain(qa)
        .map(|&t| (cdf_1d(pa, pw, t) - cdf_1d(qa, qw, t)).abs())
        .fold(0.0, f64::max)
}

pub fn cdf_2d(atoms: &[[f64; 2]], weights: &[f64], s: f64, t: f64) -> f64 {
    atoms
        .iter()
        .zip(weights)
        .filter(|(a, _)| a[0] <= s && a[1] <= t)
        .map(|(_, w)| w)
        .sum()
}

/// `sup |F_P - F_Q|` over the grid of all atom x- and y-coordinates.
pub fn brute_ks_2d(pa: &[[f64; 2]], pw: &[f64], qa: &[[f64; 2]], qw: &[f64]) -> f64 {
    let xs: Vec<f64> = pa.iter().chain(qa).map(|a| a[0]).collect();
    let ys: Vec<f64> = pa.iter().chain(qa).map(|a| a[1]).collect();
    let mut sup = 0.0f64;
    for &s in &xs {
        for &t in &ys {
            sup = sup.max((cdf_2d(pa, pw, s, t) - cdf_2d(qa, qw, s, t)).abs());
        }
    }
    sup
}

/// `sup_t |#{x <= t} / (K + n) - #{y <= t} / (K + m)|` over pooled points.
pub fn brute_z(x: &[f64], y: &[f64], k: f64) -> f64 {
    let (dx, dy) = (k + x.len() as f64, k + y.len() as f64);
    x.iter()
        .chain(y)
        .map(|&t| {
            let a = x.iter().filter(|v| **v <= t).count() as f64;
            let b = y.iter().filter(|v| **v <= t).count() as f64;
            (a / dx - b / dy).abs()
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic as an exact integer ratio `num / (n m)`.
pub fn brute_ks_counts(x: &[f64], y: &[f64]) -> (u64, u64) {
    let (n, m) = (x.len() as i64, y.len() as i64);
    let num = x
        .iter()
        .chain(y)
        .map(|&t| {
            let a = x.iter().filter(|v| **v <= t).count() as i64;
            let b = y.iter().filter(|v| **v <= t).count() as i64;
            (a * m - b * n).unsigned_abs()
        })
        .max()
        .unwrap_or(0);
    (num, (n * m) as u64)
}

/// Two-sided exact rank-sum p-value by enumerating every split of the
/// pooled ranks; samples must be untied.
pub fn enumerate_rank_sum_p(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let total = n + y.len();
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|v| (*v, true))
        .chain(y.iter().map(|v| (*v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rank_sum = |mask: u32| -> u64 {
        (0..total)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| i as u64 + 1)
            .sum()
    };
    let observed: u32 = pooled
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1)
        .map(|(i, _)| 1u32 << i)
        .sum();
    let u_obs = rank_sum(observed);
    let (mut le, mut ge, mut count) = (0u128, 0u128, 0u128);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let u = rank_sum(mask);
        count += 1;
        if u <= u_obs {
            le += 1;
        }
        if u >= u_obs {
            ge += 1;
        }
    }
    (2 * le.min(ge)).min(count) as f64 / count as f64
}

/// Weights `c_i / 2^bits` with positive integer `c_i`, so every partial sum
/// is exact in floating point.
pub fn dyadic_weights(rng: &mut SimRng, len: usize, bits: u32) -> Vec<f64> {
    let total = 1u64 << bits;
    assert!(len as u64 <= total);
    let mut cuts: Vec<u64> = Vec::with_capacity(len + 1);
    cuts.push(0);
    while cuts.len() < len {
        let c = rng.random_range(1..total);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.push(total);
    cuts.sort_unstable();
    cuts.windows(2)
        .map(|w| (w[1] - w[0]) as f64 / total as f64)
        .collect()
}

/// Small-integer locations so that ties are common.
pub fn int_atoms(rng: &mut SimRng, len: usize, range: i32) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0..range) as f64).collect()
}

pub fn distinct_values(rng: &mut SimRng, len: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(len);
    while out.len() < len {
        let v: f64 = rng.random();
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}
