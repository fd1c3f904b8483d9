//! Matrix-free evaluation of the normalized test statistics.
//!
//! For many variables and samples the centered matrices do not fit in
//! memory (100 variables at 1000 samples take 800 MB). This route stores only
//! row means: a first pass over sample pairs accumulates them, a second pass
//! rebuilds every centered entry on the fly and feeds all statistics at once.

use alloc::vec;
use alloc::vec::Vec;

use crate::centering::{check_psis, psi_for};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::measures::{binomial, subset_count, CompensatedSum};
use crate::psi::Psi;

/// `N` times the normalized sample measures, each clamped at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamedStatistics {
    pub multi: f64,
    pub total: f64,
    pub m2: f64,
    /// Absent for two variables.
    pub m3: Option<f64>,
}

struct Distances<'a> {
    data: &'a Dataset,
    psis: Vec<Psi>,
    /// All variables are scalar with `psi = |x|`.
    plain: bool,
}

impl Distances<'_> {
    #[inline]
    fn fill(&self, j: usize, k: usize, out: &mut [f64]) {
        if self.plain {
            let (a, b) = (self.data.row(j), self.data.row(k));
            for ((o, x), z) in out.iter_mut().zip(a).zip(b) {
                *o = libm::fabs(x - z);
            }
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.psis[i].eval_diff(self.data.point(j, i), self.data.point(k, i));
            }
        }
    }
}

/// Computes multi, total, 2- and 3-multivariance statistics without storing
/// distance matrices. Agrees with the matrix route up to rounding.
pub fn streamed_statistics(data: &Dataset, psis: &[Psi]) -> Result<StreamedStatistics> {
    let n = data.variables();
    if n < 2 {
        return Err(Error::usage("statistics need at least 2 variables"));
    }
    check_psis(psis, n)?;
    let size = data.samples();
    let per_var: Vec<Psi> = (0..n).map(|i| psi_for(psis, i)).collect();
    let plain = data.columns() == n && per_var.iter().all(|p| *p == Psi::EuclidPower { alpha: 1.0 });
    let dist = Distances { data, psis: per_var, plain };

    // Row means of every distance matrix, stored sample-major.
    let mut means = vec![0.0; size * n];
    let mut d = vec![0.0; n];
    for j in 0..size {
        for k in j + 1..size {
            dist.fill(j, k, &mut d);
            for (i, &v) in d.iter().enumerate() {
                means[j * n + i] += v;
                means[k * n + i] += v;
            }
        }
    }
    let inv_size = 1.0 / size as f64;
    means.iter_mut().for_each(|m| *m *= inv_size);
    let mut grand = vec![0.0; n];
    for row in means.chunks_exact(n) {
        for (g, &m) in grand.iter_mut().zip(row) {
            *g += m;
        }
    }
    grand.iter_mut().for_each(|g| *g *= inv_size);
    let scale: Vec<f64> = grand.iter().map(|&g| if g == 0.0 { 0.0 } else { 1.0 / g }).collect();

    let mut sums = [CompensatedSum::default(); 8];
    let mut a = vec![0.0; n];
    for j in 0..size {
        for k in j..size {
            if k == j {
                d.iter_mut().for_each(|v| *v = 0.0);
            } else {
                dist.fill(j, k, &mut d);
            }
            let (rj, rk) = (&means[j * n..(j + 1) * n], &means[k * n..(k + 1) * n]);
            for i in 0..n {
                a[i] = (-d[i] + rj[i] + rk[i] - grand[i]) * scale[i];
            }
            let (mut prod, mut shifted, mut s, mut q, mut c) = (1.0, 1.0, 0.0, 0.0, 0.0);
            for &v in &a {
                prod *= v;
                shifted *= 1.0 + v;
                s += v;
                let v2 = v * v;
                q += v2;
                c += v2 * v;
            }
            let terms = [prod, shifted, 0.5 * (s * s - q), (s * s * s - 3.0 * s * q + 2.0 * c) / 6.0];
            let offset = if k == j { 0 } else { 4 };
            for (sum, t) in sums[offset..offset + 4].iter_mut().zip(terms) {
                sum.add(t);
            }
        }
    }
    let mean = |t: usize| (sums[t].value() + 2.0 * sums[t + 4].value()) * inv_size * inv_size;
    let big_n = size as f64;
    let stat = |v: f64| (big_n * v).max(0.0);
    Ok(StreamedStatistics {
        multi: stat(mean(0)),
        total: stat((mean(1) - 1.0) / subset_count(n)),
        m2: stat(mean(2) / binomial(n, 2)),
        m3: (n >= 3).then(|| stat(mean(3) / binomial(n, 3))),
    })
}
