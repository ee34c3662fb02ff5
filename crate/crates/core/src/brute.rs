//! Brute-force enumeration of all `2^p` configurations.
//!
//! These tables are independent of the tree structure and serve as ground
//! truth for the closed forms elsewhere in the crate. State index bit `i`
//! set means `x_i = +1`.

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::model::TreeIsingModel;

/// Largest node count accepted by [`FullTable`].
pub const ENUMERATION_LIMIT: usize = 24;

/// Spin of node `i` in state `s`.
#[inline]
pub fn spin(s: usize, i: usize) -> i8 {
    if s >> i & 1 == 1 {
        1
    } else {
        -1
    }
}

/// The full joint distribution of a model over `2^p` states.
#[derive(Debug, Clone)]
pub struct FullTable {
    p: usize,
    probs: Vec<f64>,
    log_z: f64,
}

impl FullTable {
    /// Enumerates `exp(Σ θ_e x_i x_j)` over every state and normalizes with
    /// a log-sum-exp.
    pub fn new(m: &TreeIsingModel) -> Result<Self> {
        let p = m.p();
        if p > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                p,
                limit: ENUMERATION_LIMIT,
            });
        }
        let edges: Vec<(usize, usize, f64)> = m
            .edges()
            .iter()
            .zip(m.thetas())
            .map(|(e, &t)| (e.lo(), e.hi(), t))
            .collect();
        let logw: Vec<f64> = (0..1usize << p)
            .map(|s| {
                edges
                    .iter()
                    .map(|&(i, j, t)| if (s >> i ^ s >> j) & 1 == 0 { t } else { -t })
                    .sum()
            })
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logw.iter().map(|&l| (l - max).exp()).sum();
        let log_z = max + sum.ln();
        let probs = logw.iter().map(|&l| (l - log_z).exp()).collect();
        Ok(FullTable { p, probs, log_z })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// `E[X_i X_j]` by summation.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(s, &q)| q * f64::from(spin(s, i) * spin(s, j)))
            .sum()
    }

    pub fn correlations(&self) -> CorrelationMatrix {
        let p = self.p;
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            data[i * p + i] = 1.0;
            for j in i + 1..p {
                let c = self.correlation(i, j).clamp(-1.0, 1.0);
                data[i * p + j] = c;
                data[j * p + i] = c;
            }
        }
        CorrelationMatrix::from_raw_unchecked(p, data)
    }

    /// Marginal over `nodes`; entry index bit `k` set means
    /// `x_{nodes[k]} = +1`.
    pub fn marginal(&self, nodes: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << nodes.len()];
        for (s, &q) in self.probs.iter().enumerate() {
            let mut idx = 0;
            for (k, &v) in nodes.iter().enumerate() {
                idx |= (s >> v & 1) << k;
            }
            out[idx] += q;
        }
        out
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|&q| q * q.ln())
            .sum::<f64>()
    }

    /// `D(self ‖ other)` in nats.
    pub fn kl(&self, other: &FullTable) -> Result<f64> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch(self.p, other.p));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .filter(|(&a, _)| a > 0.0)
            .map(|(&a, &b)| a * (a / b).ln())
            .sum())
    }

    /// Total-variation distance between the marginals of two tables on
    /// `nodes`.
    pub fn marginal_tv(&self, other: &FullTable, nodes: &[usize]) -> f64 {
        let a = self.marginal(nodes);
        let b = other.marginal(nodes);
        0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn refuses_large_models() {
        let m = TreeIsingModel::independent(25).unwrap();
        assert!(matches!(
            FullTable::new(&m),
            Err(Error::EnumerationTooLarge { p: 25, limit: 24 })
        ));
    }

    #[test]
    fn two_node_table() {
        let m = TreeIsingModel::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let t = FullTable::new(&m).unwrap();
        assert_abs_diff_eq!(t.log_partition(), (4.0 * 1f64.cosh()).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(t.correlation(0, 1), 1f64.tanh(), epsilon = 1e-14);
        let sum: f64 = t.probs().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.marginal(&[1])[0], 0.5, epsilon = 1e-14);
    }
}
