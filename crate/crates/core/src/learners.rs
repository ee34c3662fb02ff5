//! Chow-Liu and truncation structure learners, and projection onto a fixed
//! structure.
//!
//! For zero-field binary trees the mutual information of an edge is
//! `log 2 − H_B((1 + μ)/2)`, which increases with `|μ|`, so the maximum
//! likelihood tree is the maximum-weight spanning tree under `|μ̂|`.

use std::fmt;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::estimation::{empirical_correlations, ThresholdSpec};
use crate::graph::{Edge, Forest, Tree};
use crate::model::TreeIsingModel;
use crate::sampling::{SampleMatrix, SeedSpec};
use crate::union_find::UnionFind;

/// `|μ̂|` at or above `1 − CLAMP_GAP` is clamped before `atanh`.
pub const CLAMP_GAP: f64 = 1e-9;

/// All pairs ordered by decreasing `|c_ij|`, ties broken by smaller `(i, j)`.
fn ranked_pairs(c: &CorrelationMatrix) -> Vec<(f64, Edge)> {
    let p = c.p();
    let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            pairs.push((c.get(i, j).abs(), Edge::new(i, j).unwrap()));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    pairs
}

/// Kruskal over the ranked pairs, stopping once `p − 1` edges are chosen.
fn kruskal(c: &CorrelationMatrix) -> Vec<(f64, Edge)> {
    let p = c.p();
    let mut uf = UnionFind::new(p);
    let mut chosen = Vec::with_capacity(p.saturating_sub(1));
    for (w, e) in ranked_pairs(c) {
        if chosen.len() + 1 == p {
            break;
        }
        if uf.union(e.lo(), e.hi()) {
            chosen.push((w, e));
        }
    }
    chosen
}

/// The Chow-Liu tree: the maximum-weight spanning tree under `|μ̂_ij|`.
pub fn chow_liu(c: &CorrelationMatrix) -> Result<Tree> {
    if c.p() < 2 {
        return Err(Error::InvalidParameter(format!(
            "Chow-Liu needs at least 2 nodes, got {}",
            c.p()
        )));
    }
    Tree::new(c.p(), kruskal(c).into_iter().map(|(_, e)| e))
}

/// The Chow-Liu tree with every edge of `|μ̂_e| < τ + ε` removed.
///
/// This equals the maximum-weight spanning forest under weights
/// `|μ̂_e| − τ − ε` restricted to positive weights (edges at exactly zero
/// weight are kept).
pub fn truncation(c: &CorrelationMatrix, th: &ThresholdSpec) -> Result<Forest> {
    let cutoff = th.cutoff();
    let kept: Vec<Edge> = if c.p() < 2 {
        Vec::new()
    } else {
        kruskal(c)
            .into_iter()
            .filter(|&(w, _)| w >= cutoff)
            .map(|(_, e)| e)
            .collect()
    };
    Forest::new(c.p(), kept)
}

/// `atanh` of `mu` after clamping `|mu|` to at most `1 − CLAMP_GAP`.
pub fn clamped_atanh(mu: f64) -> f64 {
    let lim = 1.0 - CLAMP_GAP;
    crate::model::atanh(mu.clamp(-lim, lim))
}

/// The model on `structure` whose edge correlations match `c`.
///
/// Fed population correlations of `P`, this is the KL projection of `P` onto
/// tree models with that structure.
pub fn project(c: &CorrelationMatrix, structure: &Forest) -> Result<TreeIsingModel> {
    if c.p() != structure.p() {
        return Err(Error::DimensionMismatch(c.p(), structure.p()));
    }
    let theta = structure
        .edges()
        .iter()
        .map(|&e| clamped_atanh(c.edge(e)))
        .collect();
    TreeIsingModel::new(structure.clone(), theta)
}

/// Whether `tree` satisfies the greedy exchange property under `c`: every
/// non-tree pair is no heavier than any edge on its tree path.
pub fn satisfies_exchange_property(c: &CorrelationMatrix, tree: &Tree) -> Result<bool> {
    let p = c.p();
    for w in 0..p {
        for v in w + 1..p {
            let e = Edge::new(w, v)?;
            if tree.contains_edge(e) {
                continue;
            }
            let weight = c.edge(e).abs();
            if tree.path(w, v)?.iter().any(|&f| weight > c.edge(f).abs()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ChowLiu,
    Truncation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ChowLiu => "chow-liu",
            Method::Truncation => "truncation",
        })
    }
}

/// A fitted model with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub model: TreeIsingModel,
    pub method: Method,
    pub thresholds: Option<ThresholdSpec>,
    pub seed: Option<SeedSpec>,
    pub n: usize,
}

impl LearnedModel {
    /// Model text with a provenance comment block in front.
    pub fn to_text(&self) -> String {
        let mut out = format!("# method={} n={}", self.method, self.n);
        if let Some(s) = self.seed {
            out += &format!(" seed={}/{}", s.master_seed, s.trial_index);
        }
        if let Some(th) = self.thresholds {
            out += &format!(
                "\n# epsilon={} tau={} delta={} beta={}",
                th.epsilon, th.tau, th.delta, th.beta
            );
        }
        out.push('\n');
        out + &self.model.to_text()
    }
}

/// Empirical correlations, then structure, then projection.
///
/// Truncation needs `th`; Chow-Liu ignores it.
pub fn fit(s: &SampleMatrix, method: Method, th: Option<ThresholdSpec>) -> Result<LearnedModel> {
    let c = empirical_correlations(s)?;
    let structure = match method {
        Method::ChowLiu if s.p() == 1 => Forest::empty(1)?,
        Method::ChowLiu => chow_liu(&c)?.into_forest(),
        Method::Truncation => {
            let th =
                th.ok_or_else(|| Error::InvalidParameter("truncation requires thresholds".into()))?;
            truncation(&c, &th)?
        }
    };
    Ok(LearnedModel {
        model: project(&c, &structure)?,
        method,
        thresholds: if method == Method::Truncation {
            th
        } else {
            None
        },
        seed: s.seed(),
        n: s.n(),
    })
}
