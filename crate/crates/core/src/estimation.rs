//! Empirical correlations and the deviation / threshold radii.

use rayon::prelude::*;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::sampling::SampleMatrix;

const ROW_BLOCK: usize = 4096;

/// `(1/n) Σ_l X_i^(l) X_j^(l)` for every pair.
///
/// Spin products are summed as integers over row blocks in parallel; integer
/// addition is exact, so the result does not depend on the thread count.
pub fn empirical_correlations(s: &SampleMatrix) -> Result<CorrelationMatrix> {
    let (n, p) = (s.n(), s.p());
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let pairs = p * (p - 1) / 2;
    let sums = s
        .spins()
        .par_chunks(ROW_BLOCK * p)
        .map(|block| {
            let mut acc = vec![0i64; pairs];
            for row in block.chunks_exact(p) {
                let mut k = 0;
                for i in 0..p {
                    let xi = row[i];
                    for &xj in &row[i + 1..] {
                        acc[k] += i64::from(xi * xj);
                        k += 1;
                    }
                }
            }
            acc
        })
        .reduce(
            || vec![0i64; pairs],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut data = vec![0.0; p * p];
    let mut k = 0;
    for i in 0..p {
        data[i * p + i] = 1.0;
        for j in i + 1..p {
            let v = sums[k] as f64 / n as f64;
            data[i * p + j] = v;
            data[j * p + i] = v;
            k += 1;
        }
    }
    Ok(CorrelationMatrix::from_raw_unchecked(p, data))
}

/// `ε = √((2/n) ln(2p²/δ))`: with probability at least `1 − δ` every
/// empirical correlation is within `ε` of its population value.
pub fn hoeffding_epsilon(n: usize, p: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if p < 2 {
        return Err(Error::InvalidParameter(format!("p = {p} < 2")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} outside (0, 1)"
        )));
    }
    let p = p as f64;
    Ok((2.0 / n as f64 * (2.0 * p * p / delta).ln()).sqrt())
}

/// `τ = 4ε / √(1 − tanh β)`, the correlation above which an edge counts as
/// strong.
pub fn strong_edge_threshold(epsilon: f64, beta: f64) -> f64 {
    4.0 * epsilon / (1.0 - beta.tanh()).sqrt()
}

/// Radii for one learning problem, with the inputs they came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    pub epsilon: f64,
    pub tau: f64,
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub beta: f64,
}

impl ThresholdSpec {
    pub fn from_inputs(n: usize, p: usize, delta: f64, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta}")));
        }
        let epsilon = hoeffding_epsilon(n, p, delta)?;
        Ok(ThresholdSpec {
            epsilon,
            tau: strong_edge_threshold(epsilon, beta),
            n,
            p,
            delta,
            beta,
        })
    }

    /// Overrides the derived radii; `tau` defaults to the formula value for
    /// the given `epsilon`.
    pub fn with_overrides(mut self, epsilon: Option<f64>, tau: Option<f64>) -> Result<Self> {
        if let Some(e) = epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon = {e}")));
            }
            self.epsilon = e;
            self.tau = strong_edge_threshold(e, self.beta);
        }
        if let Some(t) = tau {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("tau = {t}")));
            }
            self.tau = t;
        }
        Ok(self)
    }

    /// The truncation cutoff `τ + ε`.
    pub fn cutoff(&self) -> f64 {
        self.tau + self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_rows_are_fully_correlated() {
        let s = SampleMatrix::new(3, [1, -1, 1].repeat(10)).unwrap();
        let c = empirical_correlations(&s).unwrap();
        assert_eq!(c.get(0, 1), -1.0);
        assert_eq!(c.get(0, 2), 1.0);
    }

    #[test]
    fn cancellation() {
        let s = SampleMatrix::new(2, vec![1, 1, 1, -1]).unwrap();
        assert_eq!(empirical_correlations(&s).unwrap().get(0, 1), 0.0);
    }

    #[test]
    fn block_boundaries_do_not_matter() {
        let n = ROW_BLOCK * 2 + 17;
        let spins: Vec<i8> = (0..n * 3)
            .map(|k| if (k * 7919) % 13 < 6 { 1 } else { -1 })
            .collect();
        let s = SampleMatrix::new(3, spins.clone()).unwrap();
        let c = empirical_correlations(&s).unwrap();
        let direct: i64 = spins.chunks(3).map(|r| i64::from(r[0] * r[2])).sum();
        assert_eq!(c.get(0, 2), direct as f64 / n as f64);
    }

    #[test]
    fn epsilon_formula() {
        assert_abs_diff_eq!(
            hoeffding_epsilon(200, 10, 0.05).unwrap(),
            (0.01 * 4000f64.ln()).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            hoeffding_epsilon(200, 10, 0.05).unwrap(),
            0.2880,
            epsilon = 5e-5
        );
        let a = hoeffding_epsilon(100, 5, 0.1).unwrap();
        let b = hoeffding_epsilon(400, 5, 0.1).unwrap();
        assert_abs_diff_eq!(a / b, 2.0, epsilon = 1e-14);
        assert!(hoeffding_epsilon(0, 5, 0.1).is_err());
        assert!(hoeffding_epsilon(10, 1, 0.1).is_err());
        assert!(hoeffding_epsilon(10, 5, 1.0).is_err());
    }

    #[test]
    fn tau_formula() {
        assert_eq!(strong_edge_threshold(0.05, 0.0), 0.2);
        assert_abs_diff_eq!(strong_edge_threshold(0.05, 1.0), 0.4096, epsilon = 1e-4);
        for beta in [0.0, 0.5, 1.0, 2.0] {
            assert!(strong_edge_threshold(0.1, beta) <= 0.4 * f64::exp(beta) + 1e-15);
        }
        let th = ThresholdSpec::from_inputs(500, 6, 0.1, 0.7).unwrap();
        assert!(th.tau >= 4.0 * th.epsilon);
        assert_eq!(th.cutoff(), th.tau + th.epsilon);
    }
}
