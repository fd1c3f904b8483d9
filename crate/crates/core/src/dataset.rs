use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// `N` samples of `n` variables, each variable a contiguous block of columns.
///
/// Values are stored row-major, so the coordinates of one variable in one
/// sample form a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    values: Vec<f64>,
    samples: usize,
    columns: usize,
    groups: Vec<Range<usize>>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major values. Group ranges are 0-based and
    /// half-open and must be disjoint, nonempty and cover all columns.
    pub fn new(
        values: Vec<f64>,
        columns: usize,
        groups: Vec<Range<usize>>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        if columns == 0 {
            return Err(Error::data("dataset has no columns"));
        }
        if values.len() % columns != 0 {
            return Err(Error::data(format!(
                "{} values do not fill rows of {columns} columns",
                values.len()
            )));
        }
        let samples = values.len() / columns;
        if samples < 2 {
            return Err(Error::data(format!("need at least 2 samples, got {samples}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at sample {}, column {}",
                pos / columns + 1,
                pos % columns + 1
            )));
        }
        if groups.is_empty() {
            return Err(Error::data("dataset has no variables"));
        }
        let mut covered = alloc::vec![false; columns];
        for (i, g) in groups.iter().enumerate() {
            if g.start >= g.end {
                return Err(Error::data(format!("variable {} has no columns", i + 1)));
            }
            if g.end > columns {
                return Err(Error::data(format!(
                    "variable {} extends past column {columns}",
                    i + 1
                )));
            }
            for c in g.clone() {
                if covered[c] {
                    return Err(Error::data(format!("column {} used twice", c + 1)));
                }
                covered[c] = true;
            }
        }
        if let Some(c) = covered.iter().position(|c| !c) {
            return Err(Error::data(format!("column {} belongs to no variable", c + 1)));
        }
        let names = match names {
            Some(names) if names.len() == groups.len() => names,
            Some(names) => {
                return Err(Error::data(format!(
                    "{} names for {} variables",
                    names.len(),
                    groups.len()
                )))
            }
            None => (1..=groups.len()).map(|i| format!("X{i}")).collect(),
        };
        Ok(Dataset {
            values,
            samples,
            columns,
            groups,
            names,
        })
    }

    /// Each column becomes its own univariate variable.
    pub fn univariate(values: Vec<f64>, columns: usize) -> Result<Self> {
        Self::new(values, columns, (0..columns).map(|c| c..c + 1).collect(), None)
    }

    /// Builds a dataset from per-variable column-major blocks: `blocks[i]` holds
    /// `N * dims[i]` values, sample by sample.
    pub fn from_blocks(blocks: &[Vec<f64>], dims: &[usize]) -> Result<Self> {
        if blocks.len() != dims.len() || blocks.is_empty() {
            return Err(Error::usage("one dimension per block required"));
        }
        let samples = blocks[0].len() / dims[0].max(1);
        let columns: usize = dims.iter().sum();
        let mut values = Vec::with_capacity(samples * columns);
        for j in 0..samples {
            for (block, &d) in blocks.iter().zip(dims) {
                if block.len() != samples * d {
                    return Err(Error::usage("blocks have different sample counts"));
                }
                values.extend_from_slice(&block[j * d..(j + 1) * d]);
            }
        }
        let mut groups = Vec::with_capacity(dims.len());
        let mut start = 0;
        for &d in dims {
            groups.push(start..start + d);
            start += d;
        }
        Self::new(values, columns, groups, None)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn variables(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self, group: usize) -> usize {
        self.groups[group].len()
    }

    pub fn row(&self, sample: usize) -> &[f64] {
        &self.values[sample * self.columns..(sample + 1) * self.columns]
    }

    /// Coordinates of variable `group` in sample `sample`.
    #[inline]
    pub fn point(&self, sample: usize, group: usize) -> &[f64] {
        let g = &self.groups[group];
        let base = sample * self.columns;
        &self.values[base + g.start..base + g.end]
    }

    /// Concatenates the columns of several variables into one variable,
    /// sample by sample. Used for clustered variables.
    pub fn concat_points(&self, sample: usize, members: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &g in members {
            out.extend_from_slice(self.point(sample, g));
        }
    }

    /// Applies a permutation of the samples: row `j` of the result is row
    /// `perm[j]` of `self`.
    pub fn permute_samples(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.samples {
            return Err(Error::usage("permutation length differs from sample count"));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(self.row(p));
        }
        Ok(Dataset {
            values,
            ..self.clone()
        })
    }

    /// Returns a copy with every value of variable `group` transformed by `f`,
    /// which receives the point and writes the new coordinates in place.
    pub fn map_group(&self, group: usize, mut f: impl FnMut(&mut [f64])) -> Self {
        let mut out = self.clone();
        let g = self.groups[group].clone();
        for j in 0..self.samples {
            let base = j * self.columns;
            f(&mut out.values[base + g.start..base + g.end]);
        }
        out
    }

    /// Keeps only the listed variables, in the given order.
    pub fn select(&self, vars: &[usize]) -> Result<Self> {
        let dims: Vec<usize> = vars.iter().map(|&v| self.dim(v)).collect();
        let mut values = Vec::with_capacity(self.samples * dims.iter().sum::<usize>());
        for j in 0..self.samples {
            for &v in vars {
                values.extend_from_slice(self.point(j, v));
            }
        }
        let mut groups = Vec::with_capacity(vars.len());
        let mut start = 0;
        for d in dims {
            groups.push(start..start + d);
            start += d;
        }
        let names = vars.iter().map(|&v| self.names[v].clone()).collect();
        Self::new(values, start, groups, Some(names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_layouts() {
        assert!(Dataset::univariate(vec![1.0, 2.0], 2).is_err());
        assert!(Dataset::new(vec![0.0; 6], 3, vec![0..2, 1..3], None).is_err());
        assert!(Dataset::new(vec![0.0; 6], 3, vec![0..2], None).is_err());
        assert!(Dataset::new(vec![0.0; 6], 3, vec![0..0, 0..3], None).is_err());
        assert!(Dataset::univariate(vec![1.0, f64::NAN, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn points_and_select() {
        let ds = Dataset::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            3,
            vec![0..2, 2..3],
            None,
        )
        .unwrap();
        assert_eq!(ds.point(1, 0), &[4.0, 5.0]);
        assert_eq!(ds.point(0, 1), &[3.0]);
        let sel = ds.select(&[1, 0]).unwrap();
        assert_eq!(sel.values(), &[3.0, 1.0, 2.0, 6.0, 4.0, 5.0]);
        assert_eq!(sel.names(), &["X2", "X1"]);
        let blocks = Dataset::from_blocks(&[vec![1.0, 2.0, 4.0, 5.0], vec![3.0, 6.0]], &[2, 1]).unwrap();
        assert_eq!(blocks.values(), ds.values());
    }
}
