use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::Edge;

/// Symmetric `p × p` matrix of pairwise spin correlations `E[X_i X_j]`,
/// either population values of a model or empirical values from samples.
///
/// Diagonal entries are exactly 1 and all entries lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    p: usize,
    data: Vec<f64>,
}

impl CorrelationMatrix {
    /// Builds a matrix from row-major data, validating the invariants.
    pub fn new(p: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("empty correlation matrix".into()));
        }
        if data.len() != p * p {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries, got {}",
                p * p,
                data.len()
            )));
        }
        for i in 0..p {
            if data[i * p + i] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry ({i}, {i}) is {}",
                    data[i * p + i]
                )));
            }
            for j in 0..p {
                let v = data[i * p + j];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if v != data[j * p + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix { p, data })
    }

    /// Builds a matrix from a function on pairs `i < j`.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(p: usize, mut f: F) -> Result<Self> {
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            data[i * p + i] = 1.0;
            for j in i + 1..p {
                let v = f(i, j);
                data[i * p + j] = v;
                data[j * p + i] = v;
            }
        }
        CorrelationMatrix::new(p, data)
    }

    pub(crate) fn from_raw_unchecked(p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), p * p);
        CorrelationMatrix { p, data }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn edge(&self, e: Edge) -> f64 {
        self.get(e.lo(), e.hi())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|self_ij - other_ij|` over all pairs.
    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> Result<f64> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch(self.p, other.p));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV export: `p` rows of `p` comma-separated values in full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.p {
            for j in 0..self.p {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line.split(',') {
                let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad number {tok:?}"),
                })?;
                data.push(v);
            }
            rows += 1;
        }
        CorrelationMatrix::new(rows, data)
    }
}
