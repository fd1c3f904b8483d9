//! Benchmark scenarios and power studies.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::independence::{
    combined_test, conservative_test, empirical_rejection_level, resampling_test_with, MarginalSampler,
    PValueMethod, StatKind, StatisticEvaluator,
};
use crate::psi::Psi;
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Noise {
    Normal,
    /// Cube of a standard Cauchy variate; not even `|x|^(1/3)` is integrable.
    CauchyCubed,
}

/// Covariance structure of a multivariate normal with unit variances.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum SigmaPattern {
    /// `c` off the diagonal.
    Const { c: f64 },
    /// `c^|i - j|`.
    Ar { c: f64 },
    /// `c` for `0 < |i - j| <= width`, 0 beyond.
    Band { c: f64, width: usize },
    /// `floor(dim / size)` diagonal blocks with `c` off the diagonal;
    /// remaining columns are independent.
    Block { size: usize, c: f64 },
}

impl SigmaPattern {
    pub fn matrix(&self, dim: usize) -> Vec<f64> {
        let mut sigma = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let gap = i.abs_diff(j);
                sigma[i * dim + j] = if gap == 0 {
                    1.0
                } else {
                    match *self {
                        SigmaPattern::Const { c } => c,
                        SigmaPattern::Ar { c } => libm::pow(c, gap as f64),
                        SigmaPattern::Band { c, width } => {
                            if gap <= width {
                                c
                            } else {
                                0.0
                            }
                        }
                        SigmaPattern::Block { size, c } => {
                            let blocks = dim / size.max(1);
                            let (bi, bj) = (i / size.max(1), j / size.max(1));
                            if bi == bj && bi < blocks {
                                c
                            } else {
                                0.0
                            }
                        }
                    }
                };
            }
        }
        sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum ScenarioKind {
    /// Indicators of red, green and blue on a fair four-sided die whose
    /// fourth side carries all colours.
    Tetrahedron,
    /// `n` fair coins and the indicator of an odd number of heads.
    Coins { n: usize },
    /// Coins plus `r` times independent noise.
    PerturbedCoins { n: usize, r: f64, noise: Noise },
    MvNormal { pattern: SigmaPattern, dim: usize },
    /// `copies` independent draws of `base`, side by side.
    Independent { base: Box<ScenarioKind>, copies: usize },
    /// The same draw of `base` repeated `copies` times.
    Copies { base: Box<ScenarioKind>, copies: usize },
}

impl ScenarioKind {
    pub fn columns(&self) -> usize {
        match self {
            ScenarioKind::Tetrahedron => 3,
            ScenarioKind::Coins { n } | ScenarioKind::PerturbedCoins { n, .. } => n + 1,
            ScenarioKind::MvNormal { dim, .. } => *dim,
            ScenarioKind::Independent { base, copies } | ScenarioKind::Copies { base, copies } => {
                base.columns() * copies
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ScenarioKind::Coins { n } | ScenarioKind::PerturbedCoins { n, .. } if *n == 0 => {
                Err(Error::config("coins need at least one coin"))
            }
            ScenarioKind::PerturbedCoins { r, .. } if !r.is_finite() => Err(Error::config("r must be finite")),
            ScenarioKind::MvNormal { dim, pattern } => {
                if *dim == 0 {
                    return Err(Error::config("dimension must be positive"));
                }
                if let SigmaPattern::Block { size: 0, .. } = pattern {
                    return Err(Error::config("block size must be positive"));
                }
                cholesky(&pattern.matrix(*dim), *dim).map(|_| ())
            }
            ScenarioKind::Independent { base, copies } | ScenarioKind::Copies { base, copies } => {
                if *copies == 0 {
                    return Err(Error::config("copies must be positive"));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// Appends `samples` rows of this scenario, `stride` values per output
    /// row, starting at `offset`.
    fn fill(&self, out: &mut [f64], stride: usize, offset: usize, samples: usize, rng: &mut RngState) -> Result<()> {
        match self {
            ScenarioKind::Tetrahedron => {
                for s in 0..samples {
                    let side = rng.below(4);
                    let row = &mut out[s * stride + offset..];
                    for (c, v) in row[..3].iter_mut().enumerate() {
                        *v = if side == c as u64 || side == 3 { 1.0 } else { 0.0 };
                    }
                }
            }
            ScenarioKind::Coins { n } => {
                for s in 0..samples {
                    let row = &mut out[s * stride + offset..s * stride + offset + n + 1];
                    let mut parity = 0.0;
                    for v in row[..*n].iter_mut() {
                        *v = rng.bernoulli_half();
                        parity += *v;
                    }
                    row[*n] = parity % 2.0;
                }
            }
            ScenarioKind::PerturbedCoins { n, r, noise } => {
                ScenarioKind::Coins { n: *n }.fill(out, stride, offset, samples, rng)?;
                for s in 0..samples {
                    for v in out[s * stride + offset..s * stride + offset + n + 1].iter_mut() {
                        let z = match noise {
                            Noise::Normal => rng.standard_normal(),
                            Noise::CauchyCubed => {
                                let c = rng.standard_cauchy();
                                c * c * c
                            }
                        };
                        *v += r * z;
                    }
                }
            }
            ScenarioKind::MvNormal { pattern, dim } => {
                let l = cholesky(&pattern.matrix(*dim), *dim)?;
                let mut z = vec![0.0; *dim];
                for s in 0..samples {
                    z.iter_mut().for_each(|v| *v = rng.standard_normal());
                    let row = &mut out[s * stride + offset..s * stride + offset + dim];
                    for (i, v) in row.iter_mut().enumerate() {
                        *v = (0..=i).map(|k| l[i * dim + k] * z[k]).sum();
                    }
                }
            }
            ScenarioKind::Independent { base, copies } => {
                let w = base.columns();
                for c in 0..*copies {
                    base.fill(out, stride, offset + c * w, samples, rng)?;
                }
            }
            ScenarioKind::Copies { base, copies } => {
                let w = base.columns();
                base.fill(out, stride, offset, samples, rng)?;
                for s in 0..samples {
                    let start = s * stride + offset;
                    for c in 1..*copies {
                        out.copy_within(start..start + w, start + c * w);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Lower triangular factor of a row-major covariance matrix.
fn cholesky(sigma: &[f64], dim: usize) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(dim, dim, sigma);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::config("covariance matrix is not positive definite"))?;
    let l = chol.l();
    Ok((0..dim * dim).map(|idx| l[(idx / dim, idx % dim)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Transform {
    /// `ln(x^2)`.
    LnSquare,
    Arctan,
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Transform::LnSquare => libm::log(x * x),
            Transform::Arctan => libm::atan(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub transform: Option<Transform>,
    /// Dimension of every variable; empty means one variable per column.
    pub groups: Vec<usize>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Scenario { kind, transform: None, groups: Vec::new() }
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = Some(transform);
        self
    }

    pub fn dims(&self) -> Vec<usize> {
        if self.groups.is_empty() {
            vec![1; self.kind.columns()]
        } else {
            self.groups.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        let columns = self.kind.columns();
        if !self.groups.is_empty() && (self.groups.iter().sum::<usize>() != columns || self.groups.contains(&0)) {
            return Err(Error::config(format!(
                "group layout {:?} does not split {columns} columns",
                self.groups
            )));
        }
        Ok(())
    }
}

/// Independent coins triple: `(a, b, a xor b)`.
pub fn coins_triples(copies: usize) -> Scenario {
    Scenario::new(ScenarioKind::Independent { base: Box::new(ScenarioKind::Coins { n: 2 }), copies })
}

/// `N` i.i.d. samples of the scenario.
pub fn generate(scenario: &Scenario, samples: usize, rng: &mut RngState) -> Result<Dataset> {
    scenario.validate()?;
    let columns = scenario.kind.columns();
    let mut values = vec![0.0; samples * columns];
    scenario.kind.fill(&mut values, columns, 0, samples, rng)?;
    if let Some(t) = scenario.transform {
        values.iter_mut().for_each(|v| *v = t.apply(*v));
    }
    let dims = scenario.dims();
    let mut groups = Vec::with_capacity(dims.len());
    let mut start = 0;
    for d in dims {
        groups.push(start..start + d);
        start += d;
    }
    Dataset::new(values, columns, groups, None)
}

/// Marginals of a scenario: each call draws a fresh joint sample and keeps
/// one variable, so variables sampled separately are independent.
impl MarginalSampler for Scenario {
    fn dims(&self) -> Vec<usize> {
        Scenario::dims(self)
    }

    fn sample(&self, variable: usize, samples: usize, rng: &mut RngState) -> Vec<f64> {
        let data = generate(self, samples, rng).expect("validated scenario");
        let range = data.groups()[variable].clone();
        (0..samples).flat_map(|s| data.row(s)[range.clone()].to_vec()).collect()
    }
}

fn parse_num<T: FromStr>(text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::usage(format!("invalid {what} '{text}' in scenario")))
}

impl FromStr for ScenarioKind {
    type Err = Error;

    /// Spellings: `tetrahedron`, `coins:n`, `perturbed:n:r:{normal|cauchy3}`,
    /// `normal:dim`, `mvnormal:dim:const:c`, `mvnormal:dim:ar:c`,
    /// `mvnormal:dim:band:c:width`, `mvnormal:dim:block:size:c`,
    /// `independent:k:<scenario>` and `copies:k:<scenario>`.
    fn from_str(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let bad = || Error::usage(format!("unknown scenario '{text}'"));
        match parts.as_slice() {
            ["tetrahedron"] => Ok(ScenarioKind::Tetrahedron),
            ["coins", n] => Ok(ScenarioKind::Coins { n: parse_num(n, "coin count")? }),
            ["perturbed", n, r, noise] => Ok(ScenarioKind::PerturbedCoins {
                n: parse_num(n, "coin count")?,
                r: parse_num(r, "noise scale")?,
                noise: match *noise {
                    "normal" => Noise::Normal,
                    "cauchy3" => Noise::CauchyCubed,
                    _ => return Err(bad()),
                },
            }),
            ["normal", dim] => Ok(ScenarioKind::MvNormal {
                pattern: SigmaPattern::Const { c: 0.0 },
                dim: parse_num(dim, "dimension")?,
            }),
            ["mvnormal", dim, rest @ ..] => {
                let dim = parse_num(dim, "dimension")?;
                let pattern = match rest {
                    ["const", c] => SigmaPattern::Const { c: parse_num(c, "correlation")? },
                    ["ar", c] => SigmaPattern::Ar { c: parse_num(c, "correlation")? },
                    ["band", c, w] => SigmaPattern::Band {
                        c: parse_num(c, "correlation")?,
                        width: parse_num(w, "band width")?,
                    },
                    ["block", size, c] => SigmaPattern::Block {
                        size: parse_num(size, "block size")?,
                        c: parse_num(c, "correlation")?,
                    },
                    _ => return Err(bad()),
                };
                Ok(ScenarioKind::MvNormal { pattern, dim })
            }
            [wrap @ ("independent" | "copies"), k, ..] => {
                let copies = parse_num(k, "copy count")?;
                let inner = parts[2..].join(":");
                let base = Box::new(inner.parse()?);
                Ok(if *wrap == "independent" {
                    ScenarioKind::Independent { base, copies }
                } else {
                    ScenarioKind::Copies { base, copies }
                })
            }
            _ => Err(bad()),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text.trim() {
            "ln_square" => Ok(Transform::LnSquare),
            "arctan" => Ok(Transform::Arctan),
            _ => Err(Error::usage(format!("unknown transform '{text}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", content = "kind", rename_all = "snake_case"))]
pub enum PowerTest {
    Single(StatKind),
    /// Holm combination of 2-, 3- and total multivariance.
    Combined,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerConfig {
    pub test: PowerTest,
    pub method: PValueMethod,
    pub alpha: f64,
    pub psis: Vec<Psi>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerRow {
    pub samples: usize,
    pub runs: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Half-width of the 95% normal-approximation interval of `rate`.
    pub half_width: f64,
}

impl PowerRow {
    pub fn new(samples: usize, runs: usize, rejections: usize) -> Self {
        let rate = rejections as f64 / runs as f64;
        PowerRow {
            samples,
            runs,
            rejections,
            rate,
            half_width: 1.96 * libm::sqrt(rate * (1.0 - rate) / runs as f64),
        }
    }
}

/// Random stream of run `run` at the `point`-th sample size.
pub fn run_rng(seed: u64, point: usize, run: usize) -> RngState {
    RngState::derive(seed, ((point as u64) << 32) | run as u64)
}

fn shared_rng(seed: u64, point: usize) -> RngState {
    RngState::derive(seed, ((point as u64) << 32) | 0xFFFF_FFFF)
}

impl PowerConfig {
    pub fn validate(&self, shared_null: bool) -> Result<()> {
        if shared_null {
            match (self.test, self.method) {
                (PowerTest::Single(_), PValueMethod::Resampling { .. }) => {}
                _ => return Err(Error::usage("a shared null needs a single statistic with resampling")),
            }
        }
        Ok(())
    }

    /// Replicate statistics of one sample, reused as the null distribution
    /// of every run at this sample size.
    pub fn shared_null(&self, scenario: &Scenario, samples: usize, seed: u64, point: usize) -> Result<Vec<f64>> {
        let (PowerTest::Single(kind), PValueMethod::Resampling { replicates }) = (self.test, self.method) else {
            return Err(Error::usage("a shared null needs a single statistic with resampling"));
        };
        let mut rng = shared_rng(seed, point);
        let data = generate(scenario, samples, &mut rng)?;
        let eval = StatisticEvaluator::new(&data, &self.psis, kind)?;
        Ok(eval.replicate_statistics(replicates, &mut rng, false))
    }

    /// Decision of one run.
    pub fn run(&self, scenario: &Scenario, samples: usize, rng: &mut RngState, shared: Option<&[f64]>) -> Result<bool> {
        let data = generate(scenario, samples, rng)?;
        match self.test {
            PowerTest::Single(kind) => {
                let eval = StatisticEvaluator::new(&data, &self.psis, kind)?;
                if let Some(reps) = shared {
                    return Ok(eval.observed() > empirical_rejection_level(reps, self.alpha));
                }
                match self.method {
                    PValueMethod::Conservative => Ok(conservative_test(kind, eval.observed(), self.alpha)?.reject),
                    PValueMethod::Resampling { replicates } => {
                        Ok(resampling_test_with(&eval, replicates, self.alpha, rng)?.reject)
                    }
                }
            }
            PowerTest::Combined => Ok(combined_test(&data, &self.psis, self.alpha, self.method, rng)?.reject),
        }
    }
}

/// Rejection rates of the configured test on `runs` fresh samples for every
/// sample size in `sizes`. Run `r` at the `i`-th size uses the stream
/// [`run_rng`]`(seed, i, r)`, so results do not depend on execution order.
pub fn power_study(
    scenario: &Scenario,
    config: &PowerConfig,
    sizes: &[usize],
    runs: usize,
    seed: u64,
    shared_null: bool,
) -> Result<Vec<PowerRow>> {
    if runs == 0 {
        return Err(Error::usage("power studies need at least one run"));
    }
    scenario.validate()?;
    config.validate(shared_null)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (point, &samples) in sizes.iter().enumerate() {
        let shared = if shared_null { Some(config.shared_null(scenario, samples, seed, point)?) } else { None };
        let mut rejections = 0;
        for run in 0..runs {
            let mut rng = run_rng(seed, point, run);
            if config.run(scenario, samples, &mut rng, shared.as_deref())? {
                rejections += 1;
            }
        }
        rows.push(PowerRow::new(samples, runs, rejections));
    }
    Ok(rows)
}

/// Renders power rows as CSV.
pub fn power_csv(rows: &[PowerRow]) -> String {
    let mut out = String::from("N,runs,rejections,rate,half_width\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.samples, r.runs, r.rejections, r.rate, r.half_width));
    }
    out
}
