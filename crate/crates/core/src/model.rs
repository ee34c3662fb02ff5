//! Zero-field Ising models on trees and forests.
//!
//! A model assigns each configuration `x ∈ {-1,+1}^p` the probability
//!
//! ```text
//! P(x) = exp( Σ_{(i,j) ∈ E} θ_ij x_i x_j − Φ(θ) )
//! ```
//!
//! where `Φ(θ)` is the log-partition function. Couplings are the only stored
//! parameters; edge correlations `μ_e = tanh θ_e` are always derived.
//!
//! There is no external field, so every single-node marginal is uniform and
//! the pair marginal of any two nodes is `(1 + x_u x_v E[X_u X_v]) / 4`. That
//! formula does not hold once fields are present.

use std::fmt::Write as _;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::graph::{Edge, Forest, Tree};

/// Checks that `x` is a spin value.
pub fn check_spin(x: i8) -> Result<()> {
    if x == 1 || x == -1 {
        Ok(())
    } else {
        Err(Error::InvalidSpin(x as i64))
    }
}

/// A zero-field Ising model whose interaction graph is a tree or forest.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeIsingModel {
    structure: Forest,
    /// Couplings aligned with `structure.edges()`.
    theta: Vec<f64>,
    bounds: Option<(f64, f64)>,
}

impl TreeIsingModel {
    /// `theta[k]` is the coupling of `structure.edges()[k]`.
    pub fn new(structure: impl Into<Forest>, theta: Vec<f64>) -> Result<Self> {
        let structure = structure.into();
        if theta.len() != structure.num_edges() {
            return Err(Error::InvalidParameter(format!(
                "{} couplings for {} edges",
                theta.len(),
                structure.num_edges()
            )));
        }
        for (e, &t) in structure.edges().iter().zip(&theta) {
            if !t.is_finite() {
                return Err(Error::CouplingOutOfBounds { edge: *e, theta: t });
            }
        }
        Ok(TreeIsingModel {
            structure,
            theta,
            bounds: None,
        })
    }

    /// Builds a model from `(i, j, θ_ij)` triples.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let structure = Forest::new(p, edges.iter().map(|&(i, j, _)| (i, j)))?;
        let mut theta = vec![0.0; structure.num_edges()];
        for &(i, j, t) in edges {
            let k = structure.edge_index(Edge::new(i, j)?).unwrap();
            theta[k] = t;
        }
        TreeIsingModel::new(structure, theta)
    }

    /// Builds a model from `(i, j, μ_ij)` triples with `θ = atanh μ`.
    pub fn from_correlations(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        for &(_, _, m) in edges {
            if !(m.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge correlation {m} outside (-1, 1)"
                )));
            }
        }
        let with_theta: Vec<_> = edges.iter().map(|&(i, j, m)| (i, j, atanh(m))).collect();
        TreeIsingModel::from_edges(p, &with_theta)
    }

    /// The model with no edges (all spins independent and uniform).
    pub fn independent(p: usize) -> Result<Self> {
        TreeIsingModel::new(Forest::empty(p)?, Vec::new())
    }

    /// Declares `alpha ≤ |θ_e| ≤ beta` for every edge, failing if any
    /// coupling lies outside.
    pub fn with_bounds(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling bounds ({alpha}, {beta})"
            )));
        }
        for (e, &t) in self.structure.edges().iter().zip(&self.theta) {
            if t.abs() < alpha || t.abs() > beta {
                return Err(Error::CouplingOutOfBounds { edge: *e, theta: t });
            }
        }
        self.bounds = Some((alpha, beta));
        Ok(self)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    /// The declared upper bound `β` if present, otherwise `max_e |θ_e|`.
    pub fn max_coupling(&self) -> f64 {
        match self.bounds {
            Some((_, b)) => b,
            None => self.theta.iter().fold(0.0, |acc, t| acc.max(t.abs())),
        }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.structure.p()
    }

    #[inline]
    pub fn structure(&self) -> &Forest {
        &self.structure
    }

    /// The structure as a spanning tree, if it is one.
    pub fn tree(&self) -> Option<Tree> {
        Tree::from_forest(self.structure.clone()).ok()
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        self.structure.edges()
    }

    /// Couplings aligned with [`TreeIsingModel::edges`].
    #[inline]
    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    /// Coupling of `e`, or 0 when `e` is not an edge.
    pub fn theta(&self, e: Edge) -> f64 {
        self.structure.edge_index(e).map_or(0.0, |k| self.theta[k])
    }

    /// Edge correlation `tanh θ_e`, or 0 when `e` is not an edge.
    pub fn mu(&self, e: Edge) -> f64 {
        self.theta(e).tanh()
    }

    /// Edge correlations aligned with [`TreeIsingModel::edges`].
    pub fn mus(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.tanh()).collect()
    }

    /// `E[X_u X_v]`: the product of edge correlations along the path, 1 when
    /// `u == v`, and 0 for nodes in different components.
    pub fn pairwise_correlation(&self, u: usize, v: usize) -> Result<f64> {
        Ok(match self.structure.path_between(u, v)? {
            Some(path) => path.iter().map(|e| self.mu(*e)).product(),
            None => 0.0,
        })
    }

    /// All population pairwise correlations, in `O(p²)`.
    pub fn correlations(&self) -> CorrelationMatrix {
        let p = self.p();
        let mus = self.mus();
        let mut data = vec![0.0; p * p];
        let mut stack = Vec::new();
        for src in 0..p {
            let row = &mut data[src * p..(src + 1) * p];
            let mut seen = vec![false; p];
            row[src] = 1.0;
            seen[src] = true;
            stack.push(src);
            while let Some(v) = stack.pop() {
                for &w in self.structure.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        let k = self.structure.edge_index(Edge(v.min(w), v.max(w))).unwrap();
                        row[w] = row[v] * mus[k];
                        stack.push(w);
                    }
                }
            }
        }
        // The two directions multiply the same factors in different orders;
        // copy the upper triangle so the matrix is exactly symmetric.
        for i in 0..p {
            for j in 0..i {
                data[i * p + j] = data[j * p + i];
            }
        }
        CorrelationMatrix::from_raw_unchecked(p, data)
    }

    /// `P(X_u = x_u, X_v = x_v) = (1 + x_u x_v E[X_u X_v]) / 4` for `u ≠ v`.
    ///
    /// For `u == v` this is the singleton marginal: `1/2` when the spins agree
    /// and 0 otherwise.
    pub fn pair_marginal(&self, u: usize, v: usize, x_u: i8, x_v: i8) -> Result<f64> {
        check_spin(x_u)?;
        check_spin(x_v)?;
        let c = self.pairwise_correlation(u, v)?;
        Ok((1.0 + f64::from(x_u * x_v) * c) / 4.0 * if u == v { 2.0 } else { 1.0 })
    }

    /// `Φ(θ) = p log 2 + Σ_e log cosh θ_e`.
    pub fn log_partition(&self) -> f64 {
        let n = self.p() as f64;
        n * std::f64::consts::LN_2 + self.theta.iter().map(|&t| ln_cosh(t)).sum::<f64>()
    }

    /// Unnormalized log-weight `Σ_e θ_e x_i x_j` of a configuration.
    pub fn energy(&self, x: &[i8]) -> f64 {
        self.edges()
            .iter()
            .zip(&self.theta)
            .map(|(e, &t)| t * f64::from(x[e.lo()] * x[e.hi()]))
            .sum()
    }

    /// Serializes to the model text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "p {}", self.p()).unwrap();
        for (e, t) in self.edges().iter().zip(&self.theta) {
            writeln!(out, "edge {} {} {}", e.lo(), e.hi(), t).unwrap();
        }
        out
    }

    /// Parses the model text format: `p <int>` followed by
    /// `edge <i> <j> <theta>` lines; `#` starts a comment line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["p", n] => {
                    if p.is_some() {
                        return Err(err("duplicate `p` line".into()));
                    }
                    p = Some(
                        n.parse::<usize>()
                            .map_err(|_| err(format!("bad node count {n:?}")))?,
                    );
                }
                ["edge", i, j, t] => {
                    if p.is_none() {
                        return Err(err("`edge` before `p`".into()));
                    }
                    let i = i
                        .parse::<usize>()
                        .map_err(|_| err(format!("bad node {i:?}")))?;
                    let j = j
                        .parse::<usize>()
                        .map_err(|_| err(format!("bad node {j:?}")))?;
                    let t = t
                        .parse::<f64>()
                        .map_err(|_| err(format!("bad coupling {t:?}")))?;
                    edges.push((i, j, t));
                }
                _ => return Err(err(format!("unrecognized line {line:?}"))),
            }
        }
        let p = p.ok_or(Error::Parse {
            line: 0,
            msg: "missing `p` line".into(),
        })?;
        TreeIsingModel::from_edges(p, &edges)
    }

    pub fn write_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        TreeIsingModel::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `atanh` evaluated on `|x|` and given the sign of `x`; the std version
/// loses precision near `-1`.
pub fn atanh(x: f64) -> f64 {
    x.abs().atanh().copysign(x)
}

/// `log cosh t`, stable for large `|t|`.
pub(crate) fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// The path-graph family used to lower-bound structure learning.
///
/// Member 0 is the chain `0 - 1 - … - (p-1)` whose edge `(k, k+1)` has
/// coupling `a` for even `k` and `b` for odd `k`. For every even
/// `k ≤ p - 3` there is one further member that drops edge `(k, k+1)` and
/// adds edge `(k, k+2)` with coupling `a`. The family has `(p + 1) / 2`
/// members.
pub fn hard_family(p: usize, a: f64, b: f64) -> Result<Vec<TreeIsingModel>> {
    if p < 3 || p % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "hard family needs an odd node count ≥ 3, got {p}"
        )));
    }
    if !(a > 0.0 && a <= b && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "hard family needs 0 < a ≤ b, got a = {a}, b = {b}"
        )));
    }
    let base: Vec<(usize, usize, f64)> = (0..p - 1)
        .map(|k| (k, k + 1, if k % 2 == 0 { a } else { b }))
        .collect();
    let mut family = vec![TreeIsingModel::from_edges(p, &base)?.with_bounds(a, b)?];
    for k in (0..p - 2).step_by(2) {
        let mut edges: Vec<_> = base.iter().copied().filter(|&(i, _, _)| i != k).collect();
        edges.push((k, k + 2, a));
        family.push(TreeIsingModel::from_edges(p, &edges)?.with_bounds(a, b)?);
    }
    Ok(family)
}

/// The chain family used to lower-bound learning for small pairwise loss.
///
/// Returns `p` models on the chain `0 - … - (p-1)`. Member 0 has every
/// coupling equal to `atanh(eta)`; member `m ≥ 1` additionally sets the
/// coupling of edge `(m-1, m)` to zero (the edge stays in the structure).
pub fn chain_family(p: usize, eta: f64) -> Result<Vec<TreeIsingModel>> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} outside (0, 1)"
        )));
    }
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "chain family needs p ≥ 2, got {p}"
        )));
    }
    let chain = Tree::chain(p)?;
    let strength = eta.atanh();
    Ok((0..p)
        .map(|m| {
            let theta = (0..p - 1)
                .map(|k| if m >= 1 && k == m - 1 { 0.0 } else { strength })
                .collect();
            TreeIsingModel::new(chain.clone(), theta).expect("valid chain couplings")
        })
        .collect())
}
