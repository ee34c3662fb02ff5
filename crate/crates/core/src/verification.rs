//! Checkers for the facts the learners rely on: the two-trees witness, the
//! high-probability events, Z/Y edge-swap statistics and concentration of
//! products of empirical means.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::estimation::{empirical_correlations, strong_edge_threshold};
use crate::evaluation::sstv2;
use crate::graph::{Edge, Tree};
use crate::learners::{chow_liu, project};
use crate::model::TreeIsingModel;
use crate::sampling::{SampleMatrix, SeedSpec};

/// Largest node count for [`enumerate_spanning_trees`].
pub const MAX_ENUMERATION_NODES: usize = 7;

/// Decodes a Prüfer sequence of length `p − 2` over `0..p` into a tree.
pub fn prufer_decode(p: usize, seq: &[usize]) -> Result<Tree> {
    if p < 2 || seq.len() != p - 2 {
        return Err(Error::InvalidParameter(format!(
            "Prüfer sequence of length {} for p = {p}",
            seq.len()
        )));
    }
    let mut degree = vec![1usize; p];
    for &x in seq {
        if x >= p {
            return Err(Error::InvalidNode { node: x, p });
        }
        degree[x] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..p).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(p - 1);
    for &x in seq {
        let Reverse(leaf) = leaves.pop().expect("a leaf always exists");
        edges.push((leaf, x));
        degree[x] -= 1;
        if degree[x] == 1 {
            leaves.push(Reverse(x));
        }
    }
    let Reverse(a) = leaves.pop().unwrap();
    let Reverse(b) = leaves.pop().unwrap();
    edges.push((a, b));
    Tree::new(p, edges)
}

/// Every labeled spanning tree on `p` nodes, in Prüfer-sequence order.
pub fn enumerate_spanning_trees(p: usize) -> Result<impl Iterator<Item = Tree>> {
    if !(2..=MAX_ENUMERATION_NODES).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "tree enumeration needs 2 ≤ p ≤ {MAX_ENUMERATION_NODES}, got {p}"
        )));
    }
    let count = p.pow(p as u32 - 2);
    Ok((0..count).map(move |mut code| {
        let mut seq = vec![0; p - 2];
        for slot in seq.iter_mut().rev() {
            *slot = code % p;
            code /= p;
        }
        prufer_decode(p, &seq).expect("valid Prüfer sequence")
    }))
}

/// Paths between every pair of nodes of one tree, with bit masks over pair
/// indices for constant-time edge membership.
#[derive(Debug, Clone)]
pub struct PathTable {
    p: usize,
    words: usize,
    nodes: Vec<Vec<usize>>,
    masks: Vec<u64>,
}

impl PathTable {
    pub fn new(t: &Tree) -> Self {
        let p = t.p();
        let pairs = p * (p - 1) / 2;
        let words = pairs.div_ceil(64).max(1);
        let mut nodes = vec![Vec::new(); pairs];
        let mut masks = vec![0u64; pairs * words];
        for u in 0..p {
            let (_, parent) = t.bfs(u);
            for v in u + 1..p {
                let k = Edge(u, v).pair_index(p);
                let mut walk = vec![v];
                let mut cur = v;
                while cur != u {
                    let next = parent[cur];
                    let bit = Edge(cur.min(next), cur.max(next)).pair_index(p);
                    masks[k * words + bit / 64] |= 1 << (bit % 64);
                    walk.push(next);
                    cur = next;
                }
                walk.reverse();
                nodes[k] = walk;
            }
        }
        PathTable {
            p,
            words,
            nodes,
            masks,
        }
    }

    fn mask(&self, a: usize, b: usize) -> &[u64] {
        let k = Edge(a.min(b), a.max(b)).pair_index(self.p);
        &self.masks[k * self.words..(k + 1) * self.words]
    }

    /// Whether edge `e` lies on the path between `a` and `b`.
    #[inline]
    pub fn contains(&self, a: usize, b: usize, e: Edge) -> bool {
        if a == b {
            return false;
        }
        let bit = e.pair_index(self.p);
        self.mask(a, b)[bit / 64] >> (bit % 64) & 1 == 1
    }

    /// Path nodes from `a` to `b`, inclusive.
    pub fn path_nodes(&self, a: usize, b: usize) -> Vec<usize> {
        if a == b {
            return vec![a];
        }
        let k = Edge(a.min(b), a.max(b)).pair_index(self.p);
        let mut nodes = self.nodes[k].clone();
        if a > b {
            nodes.reverse();
        }
        nodes
    }

    pub fn same_path(&self, other: &PathTable, a: usize, b: usize) -> bool {
        a == b || self.mask(a, b) == other.mask(a, b)
    }
}

/// A pair of edges `f = (u, ũ)` on the first tree's path and `g = (v, ṽ)` on
/// the second tree's path with
///
/// * `f` not on the second path and `g` not on the first,
/// * `f` on the first tree's path between `v` and `ṽ`,
/// * `g` on the second tree's path between `u` and `ũ`,
///
/// labeled so that `u, v` are on `w`'s side of `f` in the first tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoTreesWitness {
    pub f: Edge,
    pub g: Edge,
    pub u: usize,
    pub u_tilde: usize,
    pub v: usize,
    pub v_tilde: usize,
}

/// Witness search on precomputed path tables. `Ok(None)` means the two paths
/// coincide.
pub fn witness_from_tables(
    t1: &PathTable,
    t2: &PathTable,
    w: usize,
    w_tilde: usize,
) -> Result<Option<TwoTreesWitness>> {
    if t1.p != t2.p {
        return Err(Error::DimensionMismatch(t1.p, t2.p));
    }
    for x in [w, w_tilde] {
        if x >= t1.p {
            return Err(Error::InvalidNode { node: x, p: t1.p });
        }
    }
    if t1.same_path(t2, w, w_tilde) {
        return Ok(None);
    }
    let path1 = t1.path_nodes(w, w_tilde);
    let path2 = t2.path_nodes(w, w_tilde);
    for a in path1.windows(2) {
        let f = Edge(a[0].min(a[1]), a[0].max(a[1]));
        if t2.contains(w, w_tilde, f) {
            continue;
        }
        for b in path2.windows(2) {
            let g = Edge(b[0].min(b[1]), b[0].max(b[1]));
            if t1.contains(w, w_tilde, g)
                || !t1.contains(g.lo(), g.hi(), f)
                || !t2.contains(f.lo(), f.hi(), g)
            {
                continue;
            }
            let (v, v_tilde) = if t1.contains(w, g.lo(), f) {
                (g.hi(), g.lo())
            } else {
                (g.lo(), g.hi())
            };
            return Ok(Some(TwoTreesWitness {
                f,
                g,
                u: a[0],
                u_tilde: a[1],
                v,
                v_tilde,
            }));
        }
    }
    Err(Error::Counterexample(format!(
        "no edge pair for nodes ({w}, {w_tilde})"
    )))
}

/// The first witness in path order for nodes `w`, `w_tilde`, or `None` when
/// both trees connect them by the same path.
pub fn two_trees_witness(
    t1: &Tree,
    t2: &Tree,
    w: usize,
    w_tilde: usize,
) -> Result<Option<TwoTreesWitness>> {
    if t1.p() != t2.p() {
        return Err(Error::DimensionMismatch(t1.p(), t2.p()));
    }
    witness_from_tables(&PathTable::new(t1), &PathTable::new(t2), w, w_tilde)
}

/// Outcome of the exhaustive two-trees sweep for one node count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoTreesSweep {
    pub p: usize,
    pub trees: usize,
    pub tree_pairs: usize,
    pub witnessed: usize,
    pub equal_paths: usize,
    /// Descriptions of failures, ordered by (first tree, second tree, pair).
    pub counterexamples: Vec<String>,
}

/// Runs the witness search on every ordered tree pair and every node pair
/// `w < w̃`. Outer trees are spread across the rayon pool.
pub fn two_trees_sweep(p: usize) -> Result<TwoTreesSweep> {
    let trees: Vec<Tree> = enumerate_spanning_trees(p)?.collect();
    let tables: Vec<PathTable> = trees.iter().map(PathTable::new).collect();
    let per_tree: Vec<(usize, usize, Vec<String>)> = (0..tables.len())
        .into_par_iter()
        .map(|i| {
            let (mut found, mut equal, mut bad) = (0, 0, Vec::new());
            for (j, t2) in tables.iter().enumerate() {
                for w in 0..p {
                    for wt in w + 1..p {
                        match witness_from_tables(&tables[i], t2, w, wt) {
                            Ok(Some(_)) => found += 1,
                            Ok(None) => equal += 1,
                            Err(e) => bad.push(format!(
                                "trees {:?} / {:?}, nodes ({w}, {wt}): {e}",
                                trees[i].edges(),
                                trees[j].edges()
                            )),
                        }
                    }
                }
            }
            (found, equal, bad)
        })
        .collect();
    let mut out = TwoTreesSweep {
        p,
        trees: trees.len(),
        tree_pairs: trees.len() * trees.len(),
        witnessed: 0,
        equal_paths: 0,
        counterexamples: Vec::new(),
    };
    for (found, equal, bad) in per_tree {
        out.witnessed += found;
        out.equal_paths += equal;
        out.counterexamples.extend(bad);
    }
    Ok(out)
}

/// Z and Y sums for one edge `e = (w, w̃)` on the true path between `u` and
/// `ũ`: `Z = X_w X_w̃ − X_u X_ũ`, `Y = X_w X_w̃ + X_u X_ũ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStatistics {
    pub edge: Edge,
    pub u: usize,
    pub u_tilde: usize,
    pub n: usize,
    pub sum_z: i64,
    pub sum_y: i64,
    pub mu_e: f64,
    /// Product of edge correlations on the path minus `e`.
    pub mu_a: f64,
}

impl PathStatistics {
    /// `E[Z] = μ_e (1 − μ_A)`.
    pub fn mean_z(&self) -> f64 {
        self.mu_e * (1.0 - self.mu_a)
    }

    /// `E[Y] = μ_e (1 + μ_A)`.
    pub fn mean_y(&self) -> f64 {
        self.mu_e * (1.0 + self.mu_a)
    }

    pub fn z_deviation(&self) -> f64 {
        (self.sum_z as f64 - self.n as f64 * self.mean_z()).abs()
    }

    pub fn y_deviation(&self) -> f64 {
        (self.sum_y as f64 - self.n as f64 * self.mean_y()).abs()
    }

    /// `max{16 n ε², 4 n ε √(1 − μ_A)}`.
    pub fn z_bound(&self, eps: f64) -> f64 {
        let n = self.n as f64;
        (16.0 * n * eps * eps).max(4.0 * n * eps * (1.0 - self.mu_a).max(0.0).sqrt())
    }

    /// `max{16 n ε², 4 n ε √(1 + μ_A)}`.
    pub fn y_bound(&self, eps: f64) -> f64 {
        let n = self.n as f64;
        (16.0 * n * eps * eps).max(4.0 * n * eps * (1.0 + self.mu_a).max(0.0).sqrt())
    }

    /// The tighter `max{4 n ε², 4 n ε √(1 ∓ μ_A)}` variant, for logging.
    pub fn tight_bounds(&self, eps: f64) -> (f64, f64) {
        let n = self.n as f64;
        let floor = 4.0 * n * eps * eps;
        (
            floor.max(4.0 * n * eps * (1.0 - self.mu_a).max(0.0).sqrt()),
            floor.max(4.0 * n * eps * (1.0 + self.mu_a).max(0.0).sqrt()),
        )
    }

    pub fn bounds_hold(&self, eps: f64) -> bool {
        self.z_deviation() <= self.z_bound(eps) && self.y_deviation() <= self.y_bound(eps)
    }

    /// `(Σ Z)(Σ Y) = n² (μ̂_e² − μ̂_{uũ}²)`.
    pub fn zy_product(&self) -> i128 {
        i128::from(self.sum_z) * i128::from(self.sum_y)
    }
}

/// Z/Y sums for edge `e` of the true tree and a node pair whose true path
/// contains `e`.
pub fn zy_statistics(
    s: &SampleMatrix,
    m_true: &TreeIsingModel,
    e: Edge,
    u: usize,
    u_tilde: usize,
) -> Result<PathStatistics> {
    if s.p() != m_true.p() {
        return Err(Error::DimensionMismatch(s.p(), m_true.p()));
    }
    let path = m_true
        .structure()
        .path_between(u, u_tilde)?
        .unwrap_or_default();
    if !path.contains(&e) {
        return Err(Error::EdgeNotOnPath {
            edge: e,
            u,
            v: u_tilde,
        });
    }
    let mu_a = path
        .iter()
        .filter(|&&f| f != e)
        .map(|&f| m_true.mu(f))
        .product();
    let (w, wt) = (e.lo(), e.hi());
    let (mut sum_z, mut sum_y) = (0i64, 0i64);
    for row in s.rows() {
        let a = i64::from(row[w] * row[wt]);
        let b = i64::from(row[u] * row[u_tilde]);
        sum_z += a - b;
        sum_y += a + b;
    }
    Ok(PathStatistics {
        edge: e,
        u,
        u_tilde,
        n: s.n(),
        sum_z,
        sum_y,
        mu_e: m_true.mu(e),
        mu_a,
    })
}

/// One true edge missing from the Chow-Liu tree, with the swapped edge the
/// witness search pairs it with.
#[derive(Debug, Clone, PartialEq)]
pub struct MissedEdge {
    pub f: Edge,
    pub g: Edge,
    pub stats: PathStatistics,
    /// Both Z and Y sums were within their deviation bounds.
    pub bounds_held: bool,
    /// `|μ_f| ≤ τ`.
    pub weak: bool,
}

/// Indicators and margins of the three events on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EventReport {
    pub trial: Option<u64>,
    pub epsilon: f64,
    pub gamma: f64,
    pub tau: f64,
    pub corr: bool,
    pub strong: bool,
    pub cascade: bool,
    /// `max_{i,j} |μ_ij − μ̂_ij|`.
    pub max_corr_deviation: f64,
    /// Order-2 loss between the truth and its empirical projection.
    pub cascade_loss: f64,
    pub missed_strong_edges: Vec<Edge>,
    pub missed_edges: Vec<MissedEdge>,
}

impl EventReport {
    /// Every missed edge whose Z/Y sums stayed within bounds is weak.
    pub fn missing_edges_weak(&self) -> bool {
        self.missed_edges.iter().all(|m| !m.bounds_held || m.weak)
    }
}

/// Evaluates the correlation, strong-edge and cascade events for samples of
/// a model whose structure is a spanning tree.
///
/// `τ` uses the model's declared coupling bound `β`, or `max_e |θ_e|` when no
/// bound was declared.
pub fn check_events(
    m_true: &TreeIsingModel,
    s: &SampleMatrix,
    eps: f64,
    gamma: f64,
) -> Result<EventReport> {
    if s.p() != m_true.p() {
        return Err(Error::DimensionMismatch(s.p(), m_true.p()));
    }
    let truth = m_true
        .tree()
        .ok_or_else(|| Error::NotSpanning("event checks need a spanning tree".into()))?;
    let pop = m_true.correlations();
    let emp = empirical_correlations(s)?;
    let max_dev = pop.max_abs_diff(&emp)?;
    let tau = strong_edge_threshold(eps, m_true.max_coupling());

    let hat = chow_liu(&emp)?;
    let missed_strong: Vec<Edge> = truth
        .edges()
        .iter()
        .copied()
        .filter(|&e| !hat.contains_edge(e) && m_true.mu(e).abs() >= tau)
        .collect();

    let t_true = PathTable::new(&truth);
    let t_hat = PathTable::new(&hat);
    let mut missed_edges = Vec::new();
    for &f in truth.edges() {
        if hat.contains_edge(f) {
            continue;
        }
        let wit = witness_from_tables(&t_true, &t_hat, f.lo(), f.hi())?
            .expect("a missing edge changes the path");
        let stats = zy_statistics(s, m_true, f, wit.v, wit.v_tilde)?;
        missed_edges.push(MissedEdge {
            f,
            g: wit.g,
            bounds_held: stats.bounds_hold(eps),
            weak: m_true.mu(f).abs() <= tau,
            stats,
        });
    }

    let cascade_loss = sstv2(m_true, &project(&emp, &truth)?)?.value;
    Ok(EventReport {
        trial: s.seed().map(|x| x.trial_index),
        epsilon: eps,
        gamma,
        tau,
        corr: max_dev <= eps,
        strong: missed_strong.is_empty(),
        cascade: cascade_loss <= gamma,
        max_corr_deviation: max_dev,
        cascade_loss,
        missed_strong_edges: missed_strong,
        missed_edges,
    })
}

/// Result of checking the correlation bracket on swapped edge pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrCloseReport {
    pub pairs_checked: usize,
    /// `(f, g, |μ_f|, |μ_g|)` for every pair outside
    /// `|μ_f| − 4ε ≤ |μ_g| ≤ |μ_f|`.
    pub violations: Vec<(Edge, Edge, f64, f64)>,
}

/// For every node pair whose paths differ between the true tree and the
/// Chow-Liu tree of `emp`, checks the witness pair `(f, g)` against
/// `|μ_f| − 4ε ≤ |μ_g| ≤ |μ_f|` with population correlations.
pub fn corr_close_check(
    m_true: &TreeIsingModel,
    emp: &CorrelationMatrix,
    eps: f64,
) -> Result<CorrCloseReport> {
    let truth = m_true
        .tree()
        .ok_or_else(|| Error::NotSpanning("bracket check needs a spanning tree".into()))?;
    let hat = chow_liu(emp)?;
    let pop = m_true.correlations();
    let (t1, t2) = (PathTable::new(&truth), PathTable::new(&hat));
    let p = m_true.p();
    let mut report = CorrCloseReport {
        pairs_checked: 0,
        violations: Vec::new(),
    };
    for w in 0..p {
        for wt in w + 1..p {
            if let Some(wit) = witness_from_tables(&t1, &t2, w, wt)? {
                report.pairs_checked += 1;
                let mf = pop.edge(wit.f).abs();
                let mg = pop.edge(wit.g).abs();
                if mf - 4.0 * eps > mg + 1e-12 || mg > mf + 1e-12 {
                    report.violations.push((wit.f, wit.g, mf, mg));
                }
            }
        }
    }
    Ok(report)
}

/// Simulated tail of `|∏ μ̂_j − ∏ μ_j|` against `(8/γ) exp(−γ² n / 32)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductConcentration {
    pub trials: usize,
    pub exceedances: usize,
    pub rate: f64,
    pub bound: f64,
}

impl ProductConcentration {
    pub fn within_bound(&self) -> bool {
        self.rate <= self.bound
    }
}

/// Draws `n` independent ±1 samples per factor with means `mus`, `trials`
/// times, and counts how often the product of empirical means misses the
/// product of true means by at least `gamma`.
///
/// Each factor's count of `+1` values is drawn as one binomial variate.
pub fn product_concentration_check(
    mus: &[f64],
    n: usize,
    gamma: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ProductConcentration> {
    if mus.is_empty() || mus.iter().any(|m| !(m.abs() <= 1.0)) {
        return Err(Error::InvalidParameter(
            "factor means must lie in [-1, 1]".into(),
        ));
    }
    if n == 0 || trials == 0 || !(gamma > 0.0) {
        return Err(Error::InvalidParameter(
            "need n ≥ 1, trials ≥ 1, gamma > 0".into(),
        ));
    }
    let target: f64 = mus.iter().product();
    let dists = mus
        .iter()
        .map(|&m| Binomial::new(n as u64, ((1.0 + m) / 2.0).clamp(0.0, 1.0)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let exceedances = (0..trials as u64)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = SeedSpec::new(master_seed, t).rng();
            let prod: f64 = dists
                .iter()
                .map(|d| (2.0 * d.sample(&mut rng) as f64 - n as f64) / n as f64)
                .product();
            (prod - target).abs() >= gamma
        })
        .count();
    Ok(ProductConcentration {
        trials,
        exceedances,
        rate: exceedances as f64 / trials as f64,
        bound: 8.0 / gamma * (-gamma * gamma * n as f64 / 32.0).exp(),
    })
}
