//! Distance matrices and their doubly centered, scaled forms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::psi::Psi;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    size: usize,
    entries: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::usage("matrix rows must form a square"));
        }
        Ok(Matrix {
            size,
            entries: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn zeros(size: usize) -> Self {
        Matrix {
            size,
            entries: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.size + k]
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().sum::<f64>() / (self.size * self.size) as f64
    }
}

/// How a doubly centered matrix has been divided.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scaling {
    Raw,
    /// Divided by the mean distance.
    Normalized,
    /// Divided by the `n`-th root of the mean of `|A|^n`.
    RScaled(u32),
    /// Divided by the real `n`-th root of the mean of `A^n`.
    McorScaled(u32),
}

/// Symmetric doubly centered distance matrix of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    size: usize,
    entries: Vec<f64>,
    scaling: Scaling,
    degenerate: bool,
    negative_moment: bool,
    distance_mean: f64,
}

impl CenteredMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.size + k]
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    /// True when the scaling denominator was exactly zero; the entries are
    /// then all zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// True when an odd-order Mcor scaling met a negative moment and the
    /// sign-preserving real root was used.
    pub fn negative_moment(&self) -> bool {
        self.negative_moment
    }

    /// Mean of the underlying distance matrix.
    pub fn distance_mean(&self) -> f64 {
        self.distance_mean
    }

    /// Divides a raw matrix by the denominator of `variant`.
    pub fn scaled(&self, variant: Scaling) -> Result<CenteredMatrix> {
        if self.scaling != Scaling::Raw {
            return Err(Error::usage("only raw matrices can be scaled"));
        }
        let mut negative_moment = false;
        let denom = match variant {
            Scaling::Raw => return Ok(self.clone()),
            Scaling::Normalized => self.distance_mean,
            Scaling::RScaled(n) | Scaling::McorScaled(n) => {
                if n < 2 {
                    return Err(Error::usage(format!("scaling order must be at least 2, got {n}")));
                }
                let signed = matches!(variant, Scaling::McorScaled(_)) && n % 2 == 1;
                let moment = self
                    .entries
                    .iter()
                    .map(|&a| if signed { libm::pow(a, n as f64) } else { libm::pow(libm::fabs(a), n as f64) })
                    .sum::<f64>()
                    / (self.size * self.size) as f64;
                if moment < 0.0 {
                    negative_moment = true;
                    -libm::pow(-moment, 1.0 / n as f64)
                } else {
                    libm::pow(moment, 1.0 / n as f64)
                }
            }
        };
        if denom == 0.0 {
            return Ok(CenteredMatrix {
                entries: vec![0.0; self.entries.len()],
                scaling: variant,
                degenerate: true,
                negative_moment,
                ..*self
            });
        }
        let inv = 1.0 / denom;
        Ok(CenteredMatrix {
            size: self.size,
            entries: self.entries.iter().map(|a| a * inv).collect(),
            scaling: variant,
            degenerate: false,
            negative_moment,
            distance_mean: self.distance_mean,
        })
    }

    /// Matrix of the same variable after permuting its samples by `perm`:
    /// entry `(j, k)` becomes entry `(perm[j], perm[k])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> CenteredMatrix {
        let n = self.size;
        let mut entries = Vec::with_capacity(n * n);
        for &pj in perm {
            let row = &self.entries[pj * n..(pj + 1) * n];
            entries.extend(perm.iter().map(|&pk| row[pk]));
        }
        CenteredMatrix {
            entries,
            ..self.clone()
        }
    }
}

/// Pairwise distances `psi(x_j - x_k)` of one variable.
pub fn distance_matrix(data: &Dataset, group: usize, psi: &Psi) -> Result<Matrix> {
    if group >= data.variables() {
        return Err(Error::usage(format!(
            "variable {} out of range 1..={}",
            group + 1,
            data.variables()
        )));
    }
    Ok(distance_matrix_with(data.samples(), psi, |j| data.point(j, group)))
}

/// Pairwise distances of the concatenation of several variables.
pub fn cluster_distance_matrix(data: &Dataset, members: &[usize], psi: &Psi) -> Result<Matrix> {
    if let [single] = members {
        return distance_matrix(data, *single, psi);
    }
    if members.iter().any(|&m| m >= data.variables()) {
        return Err(Error::usage("cluster member out of range"));
    }
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(data.samples());
    let mut buf = Vec::new();
    for j in 0..data.samples() {
        data.concat_points(j, members, &mut buf);
        points.push(buf.clone());
    }
    Ok(distance_matrix_with(data.samples(), psi, |j| &points[j]))
}

fn distance_matrix_with<'a>(size: usize, psi: &Psi, point: impl Fn(usize) -> &'a [f64]) -> Matrix {
    let mut m = Matrix::zeros(size);
    for j in 0..size {
        let xj = point(j);
        for k in j + 1..size {
            let d = psi.eval_diff(xj, point(k));
            m.entries[j * size + k] = d;
            m.entries[k * size + j] = d;
        }
    }
    m
}

/// Doubly centers a symmetric distance matrix:
/// `A_jk = -B_jk + rowmean_j + colmean_k - grandmean`.
pub fn double_center(b: &Matrix) -> CenteredMatrix {
    let n = b.size;
    let inv = 1.0 / n as f64;
    let row_means: Vec<f64> = (0..n)
        .map(|j| b.entries[j * n..(j + 1) * n].iter().sum::<f64>() * inv)
        .collect();
    let col_means: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|j| b.entries[j * n + k]).sum::<f64>() * inv)
        .collect();
    let grand = row_means.iter().sum::<f64>() * inv;
    let mut entries = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            entries[j * n + k] = -b.entries[j * n + k] + row_means[j] + col_means[k] - grand;
        }
    }
    CenteredMatrix {
        size: n,
        entries,
        scaling: Scaling::Raw,
        degenerate: false,
        negative_moment: false,
        distance_mean: grand,
    }
}

/// Convenience wrapper matching the three-argument form: scales `a` by the
/// denominator of `variant`. `b` must be the distance matrix `a` came from.
pub fn scale_matrix(a: &CenteredMatrix, b: &Matrix, variant: Scaling) -> Result<CenteredMatrix> {
    if b.size != a.size {
        return Err(Error::usage("distance and centered matrices differ in size"));
    }
    a.scaled(variant)
}

/// Picks the distance function of variable `i` from either one global choice
/// or one choice per variable.
pub fn psi_for(psis: &[Psi], i: usize) -> Psi {
    if psis.len() == 1 {
        psis[0]
    } else {
        psis[i]
    }
}

pub(crate) fn check_psis(psis: &[Psi], variables: usize) -> Result<()> {
    if psis.len() != 1 && psis.len() != variables {
        return Err(Error::usage(format!(
            "{} distance specs for {variables} variables",
            psis.len()
        )));
    }
    psis.iter().try_for_each(Psi::validate)
}

/// Raw centered matrices of every variable.
pub fn centered_matrices(data: &Dataset, psis: &[Psi]) -> Result<Vec<CenteredMatrix>> {
    check_psis(psis, data.variables())?;
    (0..data.variables())
        .map(|i| distance_matrix(data, i, &psi_for(psis, i)).map(|b| double_center(&b)))
        .collect()
}

/// Centered matrices of every variable, divided as `variant` prescribes.
pub fn scaled_matrices(data: &Dataset, psis: &[Psi], variant: Scaling) -> Result<Vec<CenteredMatrix>> {
    centered_matrices(data, psis)?
        .iter()
        .map(|a| a.scaled(variant))
        .collect()
}
