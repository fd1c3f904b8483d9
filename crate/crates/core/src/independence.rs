//! Independence tests built on normalized multivariance statistics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::centering::{psi_for, scaled_matrices, CenteredMatrix, Scaling};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::measures::{
    binomial, elementary, entry_mean, pairs_term, product, shifted_product, subset_count, triples_term,
};
use crate::psi::Psi;
use crate::rng::RngState;
use crate::special::{chi2_1_quantile, chi2_1_sf, holm_adjust};

/// Largest significance level for which the chi-squared(1) bound is valid.
pub const CONSERVATIVE_ALPHA_MAX: f64 = 0.215;

/// Test statistic family.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", content = "param", rename_all = "snake_case"))]
pub enum StatKind {
    /// `N` times normalized multivariance.
    Multi,
    /// `N` times normalized total multivariance (divided by `2^n - n - 1`).
    Total,
    /// `N` times normalized m-multivariance (divided by `C(n, m)`).
    M(usize),
    /// `N` times lambda-total multivariance of normalized matrices.
    LambdaTotal(f64),
}

impl StatKind {
    pub fn check(&self, variables: usize) -> Result<()> {
        if variables < 2 {
            return Err(Error::usage("tests need at least 2 variables"));
        }
        match *self {
            StatKind::M(m) if m < 2 || m > variables => Err(Error::usage(format!(
                "order m = {m} must lie in 2..={variables}"
            ))),
            StatKind::LambdaTotal(l) if !(l >= 0.0) => {
                Err(Error::usage(format!("lambda must be nonnegative, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

impl core::fmt::Display for StatKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StatKind::Multi => f.write_str("multi"),
            StatKind::Total => f.write_str("total"),
            StatKind::M(m) => write!(f, "m{m}"),
            StatKind::LambdaTotal(l) => write!(f, "lambda:{l}"),
        }
    }
}

/// How the rejection level was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum Method {
    Conservative,
    Resampling { replicates: usize },
    #[cfg_attr(feature = "serde", serde(rename = "montecarlo"))]
    MonteCarlo { replicates: usize },
    Consistent { beta: f64, c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestOutcome {
    pub kind: StatKind,
    pub method: Method,
    pub statistic: f64,
    pub rejection_level: f64,
    pub p_value: Option<f64>,
    pub reject: bool,
    pub alpha: f64,
    pub notes: Vec<String>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Normalized matrices of a dataset prepared for repeated evaluation of one
/// statistic, directly or under per-variable sample permutations.
#[derive(Debug, Clone)]
pub struct StatisticEvaluator {
    mats: Vec<CenteredMatrix>,
    kind: StatKind,
    notes: Vec<String>,
}

impl StatisticEvaluator {
    pub fn new(data: &Dataset, psis: &[Psi], kind: StatKind) -> Result<Self> {
        kind.check(data.variables())?;
        let mats = scaled_matrices(data, psis, Scaling::Normalized)?;
        Ok(Self::from_matrices(mats, kind, psis))
    }

    /// Uses already normalized matrices.
    pub fn from_matrices(mats: Vec<CenteredMatrix>, kind: StatKind, psis: &[Psi]) -> Self {
        let mut notes = Vec::new();
        if mats.iter().all(CenteredMatrix::is_degenerate) {
            notes.push("all variables constant; statistic is 0".to_string());
        } else if mats.iter().any(CenteredMatrix::is_degenerate) {
            notes.push("constant variable present".to_string());
        }
        if (0..mats.len()).any(|i| !psi_for(psis, i).is_characterizing()) {
            notes.push("psi = |x|^2 does not characterize independence".to_string());
        }
        StatisticEvaluator { mats, kind, notes }
    }

    pub fn kind(&self) -> StatKind {
        self.kind
    }

    pub fn samples(&self) -> usize {
        self.mats[0].size()
    }

    pub fn variables(&self) -> usize {
        self.mats.len()
    }

    pub fn matrices(&self) -> &[CenteredMatrix] {
        &self.mats
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Statistic on the observed samples.
    pub fn observed(&self) -> f64 {
        self.evaluate(None)
    }

    /// Statistic after permuting the samples of variable `i` by `perms[i]`.
    pub fn permuted(&self, perms: &[Vec<usize>]) -> f64 {
        self.evaluate(Some(perms))
    }

    fn evaluate(&self, perms: Option<&[Vec<usize>]>) -> f64 {
        let refs: Vec<&CenteredMatrix> = self.mats.iter().collect();
        let n = refs.len();
        let big_n = self.samples() as f64;
        let value = match self.kind {
            StatKind::Multi => entry_mean(&refs, perms, product),
            StatKind::Total => {
                (entry_mean(&refs, perms, |v| shifted_product(v, 1.0)) - 1.0) / subset_count(n)
            }
            StatKind::M(2) => entry_mean(&refs, perms, pairs_term) / binomial(n, 2),
            StatKind::M(3) => entry_mean(&refs, perms, triples_term) / binomial(n, 3),
            StatKind::M(m) => {
                let mut e = vec![0.0; m + 1];
                entry_mean(&refs, perms, |v| {
                    elementary(v, m, &mut e);
                    e[m]
                }) / binomial(n, m)
            }
            StatKind::LambdaTotal(l) => {
                entry_mean(&refs, perms, |v| shifted_product(v, l)) - libm::pow(l, n as f64)
            }
        };
        (big_n * value).max(0.0)
    }

    /// Statistics of `replicates` resampled datasets, every variable permuted
    /// independently. With `hold_first`, variable 1 keeps its sample order.
    pub fn replicate_statistics(&self, replicates: usize, rng: &mut RngState, hold_first: bool) -> Vec<f64> {
        let size = self.samples();
        let mut perms: Vec<Vec<usize>> = (0..self.variables()).map(|_| (0..size).collect()).collect();
        (0..replicates)
            .map(|_| {
                for (i, p) in perms.iter_mut().enumerate() {
                    if hold_first && i == 0 {
                        continue;
                    }
                    for (slot, v) in p.iter_mut().enumerate() {
                        *v = slot;
                    }
                    rng.shuffle(p);
                }
                self.permuted(&perms)
            })
            .collect()
    }
}

/// `N` times the normalized sample measure selected by `kind`, clamped at 0.
pub fn statistic(data: &Dataset, psis: &[Psi], kind: StatKind) -> Result<f64> {
    Ok(StatisticEvaluator::new(data, psis, kind)?.observed())
}

fn kind_notes(kind: StatKind, variables: usize) -> Vec<String> {
    match kind {
        StatKind::Multi if variables > 2 => vec![format!(
            "consistency requires {}-independence",
            variables - 1
        )],
        StatKind::M(m) if m > 2 => vec![format!("requires {}-independence for consistency", m - 1)],
        _ => Vec::new(),
    }
}

/// Distribution-free test with rejection level `F^-1(1 - alpha)` of the
/// chi-squared(1) law; valid for `alpha <= 0.215`.
pub fn conservative_test(kind: StatKind, statistic: f64, alpha: f64) -> Result<TestOutcome> {
    if !(alpha > 0.0 && alpha <= CONSERVATIVE_ALPHA_MAX) {
        return Err(Error::usage(format!(
            "the distribution-free rejection level needs alpha in (0, {CONSERVATIVE_ALPHA_MAX}], got {alpha}"
        )));
    }
    let level = chi2_1_quantile(1.0 - alpha)?;
    let p = chi2_1_sf(statistic.max(0.0))?;
    Ok(TestOutcome {
        kind,
        method: Method::Conservative,
        statistic,
        rejection_level: level,
        p_value: Some(p),
        reject: statistic > level,
        alpha,
        notes: vec!["conservative bound: p-value is an upper bound".to_string()],
    })
}

/// Number of replicates at or above `observed`, plus one, over `L + 1`.
pub fn resampling_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let above = replicates.iter().filter(|&&r| r >= observed).count();
    (1 + above) as f64 / (replicates.len() + 1) as f64
}

/// Order statistic used as the empirical `(1 - alpha)` quantile.
///
/// With `t` the largest integer for which `t / (L + 1) <= alpha`, the level
/// is the `(L + 1 - t)`-th smallest replicate, or `+inf` when `t = 0`. The
/// threshold decision `statistic > level` then agrees exactly with
/// `p_value <= alpha`.
pub fn empirical_rejection_level(replicates: &[f64], alpha: f64) -> f64 {
    let total = replicates.len() + 1;
    let mut t = libm::floor(alpha * total as f64) as usize;
    t = t.min(total);
    while t > 0 && (t as f64 / total as f64) > alpha {
        t -= 1;
    }
    while t < total && ((t + 1) as f64 / total as f64) <= alpha {
        t += 1;
    }
    if t == 0 {
        return f64::INFINITY;
    }
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = total - t;
    if rank == 0 {
        f64::NEG_INFINITY
    } else {
        sorted[rank - 1]
    }
}

/// Builds the outcome of a test whose null distribution is given by
/// replicate statistics.
pub fn empirical_outcome(
    kind: StatKind,
    method: Method,
    observed: f64,
    replicates: &[f64],
    alpha: f64,
) -> TestOutcome {
    let level = empirical_rejection_level(replicates, alpha);
    let p = resampling_p_value(observed, replicates);
    TestOutcome {
        kind,
        method,
        statistic: observed,
        rejection_level: level,
        p_value: Some(p),
        reject: observed > level,
        alpha,
        notes: Vec::new(),
    }
}

/// Permutation test with `replicates` resamplings of the cached matrices.
pub fn resampling_test(
    data: &Dataset,
    psis: &[Psi],
    kind: StatKind,
    replicates: usize,
    alpha: f64,
    rng: &mut RngState,
) -> Result<TestOutcome> {
    let eval = StatisticEvaluator::new(data, psis, kind)?;
    resampling_test_with(&eval, replicates, alpha, rng)
}

pub fn resampling_test_with(
    eval: &StatisticEvaluator,
    replicates: usize,
    alpha: f64,
    rng: &mut RngState,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if replicates == 0 {
        return Err(Error::usage("resampling needs at least one replicate"));
    }
    let observed = eval.observed();
    let reps = eval.replicate_statistics(replicates, rng, false);
    let mut out = empirical_outcome(eval.kind(), Method::Resampling { replicates }, observed, &reps, alpha);
    out.notes.extend(eval.notes().iter().cloned());
    out.notes.extend(kind_notes(eval.kind(), eval.variables()));
    Ok(out)
}

/// Draws independent samples from the marginal law of each variable.
pub trait MarginalSampler {
    /// Dimension of every variable.
    fn dims(&self) -> Vec<usize>;

    /// `samples` points of variable `variable`, row-major.
    fn sample(&self, variable: usize, samples: usize, rng: &mut RngState) -> Vec<f64>;
}

/// Monte Carlo test: the null distribution comes from `replicates` fresh
/// datasets with independent components drawn from `generator`.
pub fn monte_carlo_test(
    generator: &dyn MarginalSampler,
    data: &Dataset,
    psis: &[Psi],
    kind: StatKind,
    replicates: usize,
    alpha: f64,
    rng: &mut RngState,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if replicates == 0 {
        return Err(Error::usage("Monte Carlo needs at least one replicate"));
    }
    let dims = generator.dims();
    let data_dims: Vec<usize> = (0..data.variables()).map(|i| data.dim(i)).collect();
    if dims != data_dims {
        return Err(Error::usage(format!(
            "generator dimensions {dims:?} differ from data dimensions {data_dims:?}"
        )));
    }
    let eval = StatisticEvaluator::new(data, psis, kind)?;
    let observed = eval.observed();
    let size = data.samples();
    let mut reps = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let blocks: Vec<Vec<f64>> = (0..dims.len()).map(|i| generator.sample(i, size, rng)).collect();
        let fresh = Dataset::from_blocks(&blocks, &dims)?;
        reps.push(statistic(&fresh, psis, kind)?);
    }
    let mut out = empirical_outcome(kind, Method::MonteCarlo { replicates }, observed, &reps, alpha);
    out.notes.extend(eval.notes().iter().cloned());
    out.notes.extend(kind_notes(kind, data.variables()));
    Ok(out)
}

/// Rejection level `N^(1 - beta) * C` of the consistent test.
pub fn consistent_level(samples: usize, beta: f64, c: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::usage(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(c > 0.0) {
        return Err(Error::usage(format!("C must be positive, got {c}")));
    }
    Ok(libm::pow(samples as f64, 1.0 - beta) * c)
}

/// Test with the sample-size dependent level `N^(1 - beta) * C`, which gives
/// almost surely correct decisions as `N` grows.
pub fn consistent_test(kind: StatKind, statistic: f64, samples: usize, beta: f64, c: f64) -> Result<TestOutcome> {
    let level = consistent_level(samples, beta, c)?;
    let single_error = chi2_1_sf(level)?;
    Ok(TestOutcome {
        kind,
        method: Method::Consistent { beta, c },
        statistic,
        rejection_level: level,
        p_value: None,
        reject: statistic > level,
        alpha: single_error,
        notes: vec![format!(
            "approximate type I error of one test: {single_error:.3e}"
        )],
    })
}

/// How p-values are obtained for the combined test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum PValueMethod {
    Conservative,
    Resampling { replicates: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CombinedOutcome {
    pub outcomes: Vec<TestOutcome>,
    pub adjusted_p_values: Vec<f64>,
    pub alpha: f64,
    pub reject: bool,
}

/// Combines from raw p-values: Holm adjustment and global decision.
pub fn combine_p_values(p_values: &[f64], alpha: f64) -> (Vec<f64>, bool) {
    let adjusted = holm_adjust(p_values);
    let reject = adjusted.iter().any(|&p| p <= alpha);
    (adjusted, reject)
}

/// Holm-combined test of 2-, 3- and (for more than 3 variables) total
/// multivariance.
pub fn combined_test(
    data: &Dataset,
    psis: &[Psi],
    alpha: f64,
    method: PValueMethod,
    rng: &mut RngState,
) -> Result<CombinedOutcome> {
    let n = data.variables();
    if n < 3 {
        return Err(Error::usage(format!("the combined test needs at least 3 variables, got {n}")));
    }
    let mut kinds = vec![StatKind::M(2), StatKind::M(3)];
    if n > 3 {
        kinds.push(StatKind::Total);
    }
    let mats = scaled_matrices(data, psis, Scaling::Normalized)?;
    let mut outcomes = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let eval = StatisticEvaluator::from_matrices(mats.clone(), kind, psis);
        let outcome = match method {
            PValueMethod::Conservative => {
                let mut o = conservative_test(kind, eval.observed(), alpha)?;
                o.notes.extend(eval.notes().iter().cloned());
                o
            }
            PValueMethod::Resampling { replicates } => resampling_test_with(&eval, replicates, alpha, rng)?,
        };
        outcomes.push(outcome);
    }
    let p: Vec<f64> = outcomes.iter().map(|o| o.p_value.unwrap_or(1.0)).collect();
    let (adjusted_p_values, reject) = combine_p_values(&p, alpha);
    Ok(CombinedOutcome {
        outcomes,
        adjusted_p_values,
        alpha,
        reject,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi() -> [Psi; 1] {
        [Psi::default()]
    }

    #[test]
    fn two_samples_statistic() {
        let ds = Dataset::univariate(alloc::vec![0.0, 1.0, 3.0, -2.0], 2).unwrap();
        assert_eq!(statistic(&ds, &psi(), StatKind::Multi).unwrap(), 2.0);
        assert_eq!(statistic(&ds, &psi(), StatKind::Total).unwrap(), 2.0);
    }

    #[test]
    fn constant_group_gives_zero() {
        let ds = Dataset::univariate(alloc::vec![0.0, 1.0, 1.0, 1.0, 3.0, 1.0], 2).unwrap();
        let eval = StatisticEvaluator::new(&ds, &psi(), StatKind::Multi).unwrap();
        assert_eq!(eval.observed(), 0.0);
        assert!(eval.notes().iter().any(|n| n.contains("constant")));
    }

    #[test]
    fn conservative_levels() {
        let o = conservative_test(StatKind::Multi, 0.0, 0.05).unwrap();
        assert!((o.rejection_level - 3.841_459).abs() < 1e-5);
        assert_eq!(o.p_value, Some(1.0));
        assert!(!o.reject);
        assert!(conservative_test(StatKind::Multi, 3.85, 0.05).unwrap().reject);
        assert!(matches!(conservative_test(StatKind::Total, 1.0, 0.3), Err(Error::Usage(_))));
        assert!(conservative_test(StatKind::Total, 1.0, 0.215).is_ok());
    }

    #[test]
    fn p_value_count_formula() {
        assert!((resampling_p_value(2.0, &[0.5, 1.2, 3.0, 0.8]) - 0.4).abs() < 1e-15);
        assert_eq!(resampling_p_value(10.0, &[0.5, 1.2, 3.0]), 0.25);
        assert_eq!(empirical_rejection_level(&[1.7], 0.5), 1.7);
        assert_eq!(empirical_rejection_level(&[1.7], 0.4), f64::INFINITY);
    }

    #[test]
    fn level_and_p_value_agree() {
        let mut rng = RngState::new(11);
        for l in [1usize, 4, 19, 20, 99, 300] {
            let reps: Vec<f64> = (0..l).map(|_| libm::floor(rng.uniform() * 10.0)).collect();
            for alpha in [0.01, 0.05, 0.1, 0.2, 0.5] {
                for obs in 0..12 {
                    let o = empirical_outcome(StatKind::Multi, Method::Resampling { replicates: l }, obs as f64, &reps, alpha);
                    assert_eq!(o.reject, o.p_value.unwrap() <= alpha, "L={l} alpha={alpha} obs={obs}");
                    let p = o.p_value.unwrap();
                    assert!(p >= 1.0 / (l + 1) as f64 && p <= 1.0);
                }
            }
        }
    }

    #[test]
    fn consistent_levels() {
        let o = consistent_test(StatKind::Multi, 19.9, 100, 0.5, 2.0).unwrap();
        assert!((o.rejection_level - 20.0).abs() < 1e-12);
        assert!(!o.reject);
        assert!(o.p_value.is_none());
        assert_eq!(consistent_test(StatKind::Multi, 0.0, 1, 0.3, 2.0).unwrap().rejection_level, 2.0);
        assert!(consistent_test(StatKind::Multi, 0.0, 10, 1.0, 2.0).is_err());
        assert!(consistent_test(StatKind::Multi, 0.0, 10, 0.0, 2.0).is_err());
    }

    #[test]
    fn combination() {
        let (adj, reject) = combine_p_values(&[0.01, 0.04, 0.03], 0.05);
        assert!((adj[0] - 0.03).abs() < 1e-15);
        assert!(reject);
        let (_, reject) = combine_p_values(&[1.0, 1.0, 1.0], 0.05);
        assert!(!reject);
    }

    #[test]
    fn combined_kinds_by_size() {
        let mut rng = RngState::new(5);
        let values: Vec<f64> = (0..40 * 3).map(|_| rng.standard_normal()).collect();
        let ds = Dataset::univariate(values, 3).unwrap();
        let out = combined_test(&ds, &psi(), 0.05, PValueMethod::Conservative, &mut rng).unwrap();
        let kinds: Vec<StatKind> = out.outcomes.iter().map(|o| o.kind).collect();
        assert_eq!(kinds, [StatKind::M(2), StatKind::M(3)]);
        let values: Vec<f64> = (0..40 * 4).map(|_| rng.standard_normal()).collect();
        let ds = Dataset::univariate(values, 4).unwrap();
        let out = combined_test(&ds, &psi(), 0.05, PValueMethod::Resampling { replicates: 20 }, &mut rng).unwrap();
        assert_eq!(out.outcomes.len(), 3);
        assert_eq!(out.outcomes[2].kind, StatKind::Total);
        let ds = Dataset::univariate(alloc::vec![0.0, 1.0, 3.0, -2.0], 2).unwrap();
        assert!(combined_test(&ds, &psi(), 0.05, PValueMethod::Conservative, &mut rng).is_err());
    }

    #[test]
    fn kind_range_checked() {
        let ds = Dataset::univariate(alloc::vec![0.0, 1.0, 3.0, -2.0], 2).unwrap();
        assert!(statistic(&ds, &psi(), StatKind::M(3)).is_err());
        assert!(statistic(&ds, &psi(), StatKind::LambdaTotal(-1.0)).is_err());
        let mut rng = RngState::new(1);
        assert!(resampling_test(&ds, &psi(), StatKind::Multi, 0, 0.05, &mut rng).is_err());
    }
}
