//! Sample dependence measures computed from centered matrices.
//!
//! Every estimator has the form `N^-2 * sum_{j,k} f(A_1[j,k], ..., A_n[j,k])`
//! for some entrywise reduction `f`; [`entry_mean`] evaluates that sum once,
//! exploiting symmetry, with compensated accumulation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::centering::{scaled_matrices, CenteredMatrix, Scaling};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::psi::Psi;

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `N^-2 * sum_{j,k} f(values at (j,k))`, where the value of matrix `i` at
/// `(j,k)` is `mats[i][perm_i[j], perm_i[k]]` when permutations are given.
pub fn entry_mean(
    mats: &[&CenteredMatrix],
    perms: Option<&[Vec<usize>]>,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let size = mats[0].size();
    let mut vals = vec![0.0; mats.len()];
    let mut diag = CompensatedSum::default();
    let mut off = CompensatedSum::default();
    match perms {
        None => {
            for j in 0..size {
                for (v, m) in vals.iter_mut().zip(mats) {
                    *v = m.get(j, j);
                }
                diag.add(f(&vals));
                for k in j + 1..size {
                    let idx = j * size + k;
                    for (v, m) in vals.iter_mut().zip(mats) {
                        *v = m.entries()[idx];
                    }
                    off.add(f(&vals));
                }
            }
        }
        Some(perms) => {
            for j in 0..size {
                for ((v, m), p) in vals.iter_mut().zip(mats).zip(perms) {
                    *v = m.get(p[j], p[j]);
                }
                diag.add(f(&vals));
                for k in j + 1..size {
                    for ((v, m), p) in vals.iter_mut().zip(mats).zip(perms) {
                        *v = m.get(p[j], p[k]);
                    }
                    off.add(f(&vals));
                }
            }
        }
    }
    (diag.value() + 2.0 * off.value()) / (size * size) as f64
}

pub(crate) fn check_mats(mats: &[CenteredMatrix]) -> Result<Vec<&CenteredMatrix>> {
    if mats.is_empty() {
        return Err(Error::usage("no matrices given"));
    }
    let size = mats[0].size();
    if mats.iter().any(|m| m.size() != size) {
        return Err(Error::usage("matrices have different sample counts"));
    }
    Ok(mats.iter().collect())
}

/// `2^n - n - 1`, the number of variable subsets with at least two members.
pub fn subset_count(n: usize) -> f64 {
    libm::pow(2.0, n as f64) - n as f64 - 1.0
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[inline]
pub(crate) fn product(vals: &[f64]) -> f64 {
    vals.iter().product()
}

#[inline]
pub(crate) fn shifted_product(vals: &[f64], shift: f64) -> f64 {
    vals.iter().fold(1.0, |acc, v| acc * (shift + v))
}

/// Elementary symmetric polynomial of degree 2 via power sums.
#[inline]
pub(crate) fn pairs_term(vals: &[f64]) -> f64 {
    let (mut s, mut q) = (0.0, 0.0);
    for &v in vals {
        s += v;
        q += v * v;
    }
    0.5 * (s * s - q)
}

/// Elementary symmetric polynomial of degree 3 via power sums.
#[inline]
pub(crate) fn triples_term(vals: &[f64]) -> f64 {
    let (mut s, mut q, mut c) = (0.0, 0.0, 0.0);
    for &v in vals {
        s += v;
        let v2 = v * v;
        q += v2;
        c += v2 * v;
    }
    (s * s * s - 3.0 * s * q + 2.0 * c) / 6.0
}

/// Elementary symmetric polynomials `e_0..=e_m` by the product recursion.
pub(crate) fn elementary(vals: &[f64], m: usize, out: &mut [f64]) {
    out[..=m].fill(0.0);
    out[0] = 1.0;
    for (count, &v) in vals.iter().enumerate() {
        for d in (1..=m.min(count + 1)).rev() {
            out[d] += v * out[d - 1];
        }
    }
}

/// Sample multivariance `N^-2 sum_{j,k} prod_i (A_i)_{jk}`.
pub fn multivariance(mats: &[CenteredMatrix]) -> Result<f64> {
    let refs = check_mats(mats)?;
    if refs.len() < 2 {
        return Err(Error::usage("multivariance needs at least 2 variables"));
    }
    Ok(entry_mean(&refs, None, product))
}

/// Sample total multivariance, optionally divided by `2^n - n - 1`.
pub fn total_multivariance(mats: &[CenteredMatrix], normalized_divisor: bool) -> Result<f64> {
    let refs = check_mats(mats)?;
    if refs.len() < 2 {
        return Err(Error::usage("total multivariance needs at least 2 variables"));
    }
    let value = entry_mean(&refs, None, |v| shifted_product(v, 1.0)) - 1.0;
    Ok(if normalized_divisor {
        value / subset_count(refs.len())
    } else {
        value
    })
}

/// Evaluation route for m-multivariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MMethod {
    /// Power-sum identities; only for `m` in {2, 3}.
    Fast,
    /// Explicit enumeration of all `m`-subsets.
    Naive,
    /// Entrywise elementary symmetric polynomial recursion, any `m`.
    Recursive,
}

fn check_order(m: usize, n: usize) -> Result<()> {
    if m < 2 || m > n {
        return Err(Error::usage(format!("order m = {m} must lie in 2..={n}")));
    }
    Ok(())
}

/// Calls `visit` with every `m`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        visit(&idx);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - m {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for t in i + 1..m {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Sum over all `m`-subsets of the sample multivariance of the subset,
/// optionally divided by `C(n, m)`.
pub fn m_multivariance(
    mats: &[CenteredMatrix],
    m: usize,
    method: MMethod,
    normalized_divisor: bool,
) -> Result<f64> {
    let refs = check_mats(mats)?;
    let n = refs.len();
    check_order(m, n)?;
    let value = match method {
        MMethod::Fast => match m {
            2 => entry_mean(&refs, None, pairs_term),
            3 => entry_mean(&refs, None, triples_term),
            _ => return Err(Error::usage(format!("fast m-multivariance needs m in {{2, 3}}, got {m}"))),
        },
        MMethod::Naive => {
            let mut total = CompensatedSum::default();
            for_each_subset(n, m, |subset| {
                let sub: Vec<&CenteredMatrix> = subset.iter().map(|&i| refs[i]).collect();
                total.add(entry_mean(&sub, None, product));
            });
            total.value()
        }
        MMethod::Recursive => {
            let mut e = vec![0.0; m + 1];
            entry_mean(&refs, None, |v| {
                elementary(v, m, &mut e);
                e[m]
            })
        }
    };
    Ok(if normalized_divisor {
        value / binomial(n, m)
    } else {
        value
    })
}

/// Total m-multivariance: the sum of l-multivariances for `l = 2..=m`.
pub fn total_m_multivariance(mats: &[CenteredMatrix], m: usize) -> Result<f64> {
    let refs = check_mats(mats)?;
    check_order(m, refs.len())?;
    let mut e = vec![0.0; m + 1];
    Ok(entry_mean(&refs, None, |v| {
        elementary(v, m, &mut e);
        e[2..=m].iter().sum()
    }))
}

/// Lambda-total multivariance `N^-2 sum prod_i (lambda + A_i) - lambda^n`.
pub fn lambda_total(mats: &[CenteredMatrix], lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::usage(format!("lambda must be nonnegative, got {lambda}")));
    }
    let refs = check_mats(mats)?;
    if refs.len() < 2 {
        return Err(Error::usage("lambda-total multivariance needs at least 2 variables"));
    }
    let base = libm::pow(lambda, refs.len() as f64);
    Ok(entry_mean(&refs, None, |v| shifted_product(v, lambda)) - base)
}

/// Scale-invariant correlation value together with scaling diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Correlation {
    pub value: f64,
    /// Some variable had a zero scaling denominator.
    pub degenerate: bool,
    /// Some odd-order Mcor denominator came from a negative moment.
    pub negative_moment: bool,
}

impl Correlation {
    fn from_mats(value: f64, mats: &[CenteredMatrix]) -> Self {
        Correlation {
            value,
            degenerate: mats.iter().any(CenteredMatrix::is_degenerate),
            negative_moment: mats.iter().any(CenteredMatrix::negative_moment),
        }
    }
}

/// Multicorrelation: square root of the multivariance of matrices scaled by
/// their `n`-th moment (`RScaled`) or signed `n`-th moment (`McorScaled`).
pub fn multicorrelation(data: &Dataset, psis: &[Psi], variant: Scaling) -> Result<Correlation> {
    let n = data.variables();
    if n < 2 {
        return Err(Error::usage("multicorrelation needs at least 2 variables"));
    }
    let order = n as u32;
    let scaling = match variant {
        Scaling::RScaled(_) => Scaling::RScaled(order),
        Scaling::McorScaled(_) => Scaling::McorScaled(order),
        other => {
            return Err(Error::usage(format!(
                "multicorrelation needs an n-th moment scaling, got {other:?}"
            )))
        }
    };
    let mats = scaled_matrices(data, psis, scaling)?;
    let sq = multivariance(&mats)?;
    Ok(Correlation::from_mats(libm::sqrt(sq.max(0.0)), &mats))
}

/// 2-multicorrelation: root of the averaged pairwise multivariances of
/// second-moment scaled matrices.
pub fn mcor2(data: &Dataset, psis: &[Psi]) -> Result<Correlation> {
    let n = data.variables();
    if n < 2 {
        return Err(Error::usage("2-multicorrelation needs at least 2 variables"));
    }
    let mats = scaled_matrices(data, psis, Scaling::RScaled(2))?;
    let sq = m_multivariance(&mats, 2, MMethod::Fast, true)?;
    Ok(Correlation::from_mats(libm::sqrt(sq.max(0.0)), &mats))
}

/// Efficient lower bound of squared total multicorrelation: normalized total
/// multivariance of `n`-th moment scaled matrices.
pub fn total_mcor_lower_bound(data: &Dataset, psis: &[Psi]) -> Result<Correlation> {
    let n = data.variables();
    if n < 2 {
        return Err(Error::usage("total multicorrelation needs at least 2 variables"));
    }
    let mats = scaled_matrices(data, psis, Scaling::RScaled(n as u32))?;
    let value = total_multivariance(&mats, true)?;
    Ok(Correlation::from_mats(value, &mats))
}

/// Which sample measure a [`MeasureValue`] holds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", content = "param", rename_all = "snake_case"))]
pub enum MeasureKind {
    Multivariance,
    Total,
    MMulti(usize),
    TotalM(usize),
    LambdaTotal(f64),
    Multicorrelation,
    UnnormalizedMulticorrelation,
    Mcor2,
    TotMcorLb,
}

/// A computed sample measure.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureValue {
    pub kind: MeasureKind,
    /// True when normalized matrices (and the kind's divisor) were used.
    pub normalized: bool,
    /// The squared sample measure, unclamped.
    pub squared_value: f64,
    /// `N` times the squared value, clamped at zero.
    pub statistic: f64,
    pub variables: usize,
    pub samples: usize,
    pub degenerate: bool,
}

/// Computes `kind` on `data`. With `normalized`, multivariance-type kinds use
/// normalized matrices and their divisors; correlation kinds ignore the flag
/// and report the squared correlation as `squared_value`.
pub fn compute(data: &Dataset, psis: &[Psi], kind: MeasureKind, normalized: bool) -> Result<MeasureValue> {
    let n = data.variables();
    let big_n = data.samples();
    let (squared_value, degenerate) = match kind {
        MeasureKind::Multicorrelation => {
            let c = multicorrelation(data, psis, Scaling::RScaled(0))?;
            (c.value * c.value, c.degenerate)
        }
        MeasureKind::UnnormalizedMulticorrelation => {
            let c = multicorrelation(data, psis, Scaling::McorScaled(0))?;
            (c.value * c.value, c.degenerate)
        }
        MeasureKind::Mcor2 => {
            let c = mcor2(data, psis)?;
            (c.value * c.value, c.degenerate)
        }
        MeasureKind::TotMcorLb => {
            let c = total_mcor_lower_bound(data, psis)?;
            (c.value, c.degenerate)
        }
        _ => {
            let scaling = if normalized { Scaling::Normalized } else { Scaling::Raw };
            let mats = scaled_matrices(data, psis, scaling)?;
            let degenerate = mats.iter().any(CenteredMatrix::is_degenerate);
            let v = match kind {
                MeasureKind::Multivariance => multivariance(&mats)?,
                MeasureKind::Total => total_multivariance(&mats, normalized)?,
                MeasureKind::MMulti(m) => {
                    let method = if m <= 3 { MMethod::Fast } else { MMethod::Recursive };
                    m_multivariance(&mats, m, method, normalized)?
                }
                MeasureKind::TotalM(m) => total_m_multivariance(&mats, m)?,
                MeasureKind::LambdaTotal(l) => lambda_total(&mats, l)?,
                _ => unreachable!(),
            };
            (v, degenerate)
        }
    };
    Ok(MeasureValue {
        kind,
        normalized,
        squared_value,
        statistic: big_n as f64 * squared_value.max(0.0),
        variables: n,
        samples: big_n,
        degenerate,
    })
}
