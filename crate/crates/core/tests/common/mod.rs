//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use multivariance_core::centering::{CenteredMatrix, Matrix};
use multivariance_core::{Dataset, Psi, RngState};

/// Dataset with `dims.len()` variables of the given dimensions and
/// standard normal entries.
pub fn normal_dataset(rng: &mut RngState, samples: usize, dims: &[usize]) -> Dataset {
    let blocks: Vec<Vec<f64>> = dims
        .iter()
        .map(|&d| (0..samples * d).map(|_| rng.standard_normal()).collect())
        .collect();
    Dataset::from_blocks(&blocks, dims).unwrap()
}

/// Dataset with some dependence: every variable mixes a shared factor.
pub fn mixed_dataset(rng: &mut RngState, samples: usize, dims: &[usize]) -> Dataset {
    let columns: usize = dims.iter().sum();
    let mut values = Vec::with_capacity(samples * columns);
    for _ in 0..samples {
        let shared = rng.standard_normal();
        for _ in 0..columns {
            let w = rng.uniform();
            values.push(w * shared + rng.standard_normal() + if rng.uniform() < 0.1 { 3.0 } else { 0.0 });
        }
    }
    let mut groups = Vec::new();
    let mut start = 0;
    for &d in dims {
        groups.push(start..start + d);
        start += d;
    }
    Dataset::new(values, columns, groups, None).unwrap()
}

pub fn random_dims(rng: &mut RngState, n: usize, max_dim: usize) -> Vec<usize> {
    (0..n).map(|_| 1 + rng.below(max_dim as u64) as usize).collect()
}

pub fn random_psi(rng: &mut RngState) -> Psi {
    match rng.below(3) {
        0 => Psi::euclid(0.2 + 1.8 * rng.uniform()).unwrap(),
        1 => Psi::bounded_exp(0.2 + 1.7 * rng.uniform(), 0.1 + 2.0 * rng.uniform()).unwrap(),
        _ => Psi::LogType,
    }
}

/// `-C B C` with `C = I - 11^T / N`, by explicit matrix products.
pub fn cbc(b: &Matrix) -> Vec<f64> {
    let n = b.size();
    let c = |j: usize, k: usize| if j == k { 1.0 } else { 0.0 } - 1.0 / n as f64;
    let mut cb = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            cb[j * n + k] = (0..n).map(|l| c(j, l) * b.get(l, k)).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            out[j * n + k] = -(0..n).map(|l| cb[j * n + l] * c(l, k)).sum::<f64>();
        }
    }
    out
}

/// `N^-2 sum_{j,k} prod_{i in subset} A_i[j][k]` by direct summation.
pub fn subset_multivariance(mats: &[CenteredMatrix], subset: &[usize]) -> f64 {
    let n = mats[0].size();
    let mut total = 0.0;
    for j in 0..n {
        for k in 0..n {
            total += subset.iter().map(|&i| mats[i].get(j, k)).product::<f64>();
        }
    }
    total / (n * n) as f64
}

/// All subsets of `0..n` with at least two elements, as index lists.
pub fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == size)
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// RV coefficient `tr(S_xy S_yx) / sqrt(tr(S_xx^2) tr(S_yy^2))` of two
/// row-major sample blocks.
pub fn rv_coefficient(x: &[f64], dx: usize, y: &[f64], dy: usize) -> f64 {
    let n = x.len() / dx;
    let center = |v: &[f64], d: usize| {
        let mut out = v.to_vec();
        for c in 0..d {
            let m = (0..n).map(|s| v[s * d + c]).sum::<f64>() / n as f64;
            for s in 0..n {
                out[s * d + c] -= m;
            }
        }
        out
    };
    let (xc, yc) = (center(x, dx), center(y, dy));
    let cross = |a: &[f64], da: usize, b: &[f64], db: usize| {
        let mut s = vec![0.0; da * db];
        for r in 0..n {
            for i in 0..da {
                for j in 0..db {
                    s[i * db + j] += a[r * da + i] * b[r * db + j];
                }
            }
        }
        s
    };
    let sxy = cross(&xc, dx, &yc, dy);
    let sxx = cross(&xc, dx, &xc, dx);
    let syy = cross(&yc, dy, &yc, dy);
    let frob = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>();
    frob(&sxy) / (frob(&sxx) * frob(&syy)).sqrt()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
