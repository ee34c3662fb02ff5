//! Losses between tree models and exact marginal inference.
//!
//! The small-set TV loss of order `k` is the largest total-variation distance
//! between the two models' marginals over any `k` nodes. For `k = 2` on
//! zero-field models it reduces to half the largest gap between pairwise
//! correlations.

use rayon::prelude::*;

use crate::brute::FullTable;
use crate::error::{Error, Result};
use crate::graph::{Edge, Forest};
use crate::model::TreeIsingModel;

/// Largest subset accepted by [`exact_marginal`].
pub const MAX_MARGINAL_NODES: usize = 20;
/// Largest order accepted by [`sstv_k`].
pub const MAX_SSTV_ORDER: usize = 6;
/// Largest node count accepted by [`sstv_k`].
pub const MAX_SSTV_NODES: usize = 16;

/// A distribution over the spins of a node subset. Entry index bit `k` set
/// means `x_{nodes[k]} = +1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    nodes: Vec<usize>,
    probs: Vec<f64>,
}

impl MarginalTable {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a spin assignment listed in `nodes` order.
    pub fn prob(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch(spins.len(), self.nodes.len()));
        }
        let mut idx = 0;
        for (k, &x) in spins.iter().enumerate() {
            crate::model::check_spin(x)?;
            if x == 1 {
                idx |= 1 << k;
            }
        }
        Ok(self.probs[idx])
    }

    /// Total-variation distance to a table over the same node list.
    pub fn tv(&self, other: &MarginalTable) -> Result<f64> {
        if self.nodes != other.nodes {
            return Err(Error::InvalidParameter(
                "marginals over different subsets".into(),
            ));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// A loss value with the subset that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub k: usize,
    pub value: f64,
    pub argmax_subset: Vec<usize>,
}

fn check_same_p(a: &TreeIsingModel, b: &TreeIsingModel) -> Result<()> {
    if a.p() != b.p() {
        Err(Error::DimensionMismatch(a.p(), b.p()))
    } else {
        Ok(())
    }
}

/// Exact order-2 loss: `max_{u<v} |E_a[X_u X_v] − E_b[X_u X_v]| / 2`.
///
/// Ties go to the lexicographically smallest pair.
pub fn sstv2(a: &TreeIsingModel, b: &TreeIsingModel) -> Result<LossReport> {
    check_same_p(a, b)?;
    let p = a.p();
    if p < 2 {
        return Err(Error::InvalidParameter("order-2 loss needs p ≥ 2".into()));
    }
    let (ca, cb) = (a.correlations(), b.correlations());
    let mut best = (f64::NEG_INFINITY, 0, 1);
    for u in 0..p {
        for v in u + 1..p {
            let gap = (ca.get(u, v) - cb.get(u, v)).abs() / 2.0;
            if gap > best.0 {
                best = (gap, u, v);
            }
        }
    }
    Ok(LossReport {
        k: 2,
        value: best.0,
        argmax_subset: vec![best.1, best.2],
    })
}

fn validate_subset(p: usize, nodes: &[usize]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidParameter("empty node subset".into()));
    }
    if nodes.len() > MAX_MARGINAL_NODES {
        return Err(Error::BudgetExceeded(format!(
            "marginal over {} nodes (limit {MAX_MARGINAL_NODES})",
            nodes.len()
        )));
    }
    let mut seen = vec![false; p];
    for &v in nodes {
        if v >= p {
            return Err(Error::InvalidNode { node: v, p });
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidParameter(format!(
                "node {v} repeated in subset"
            )));
        }
    }
    Ok(())
}

/// Exact marginal of `m` on `nodes` by leaf elimination.
///
/// Leaves outside the subset are pruned until none remain; a pruned leaf
/// sums its edge factor `(1 + μ x_u x_v)/2` to 1. For each assignment of the
/// subset, two-entry messages are then passed to the lowest node of each
/// remaining component, whose prior is `1/2`.
pub fn exact_marginal(m: &TreeIsingModel, nodes: &[usize]) -> Result<MarginalTable> {
    let p = m.p();
    validate_subset(p, nodes)?;
    let f = m.structure();
    let mut slot = vec![usize::MAX; p];
    for (k, &v) in nodes.iter().enumerate() {
        slot[v] = k;
    }

    let mut alive = vec![true; p];
    let mut degree: Vec<usize> = (0..p).map(|v| f.neighbors(v).len()).collect();
    let mut stack: Vec<usize> = (0..p)
        .filter(|&v| slot[v] == usize::MAX && degree[v] <= 1)
        .collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &w in f.neighbors(v) {
            if alive[w] {
                degree[w] -= 1;
                if slot[w] == usize::MAX && degree[w] <= 1 {
                    stack.push(w);
                }
            }
        }
    }

    // Pruned graph in BFS order per component: (node, parent, μ of edge).
    let mut plan: Vec<(usize, usize, f64)> = Vec::new();
    let mut visited = vec![false; p];
    for root in 0..p {
        if !alive[root] || visited[root] {
            continue;
        }
        visited[root] = true;
        let start = plan.len();
        plan.push((root, root, 0.0));
        let mut head = start;
        while head < plan.len() {
            let v = plan[head].0;
            head += 1;
            for &w in f.neighbors(v) {
                if alive[w] && !visited[w] {
                    visited[w] = true;
                    plan.push((w, v, m.mu(Edge::new(v, w)?)));
                }
            }
        }
    }

    let mut msg = vec![[1.0f64; 2]; p];
    let probs = (0..1usize << nodes.len())
        .map(|assign| {
            let allowed = |v: usize| -> [bool; 2] {
                match slot[v] {
                    usize::MAX => [true, true],
                    k => {
                        let up = assign >> k & 1 == 1;
                        [!up, up]
                    }
                }
            };
            for &(v, _, _) in &plan {
                msg[v] = [1.0, 1.0];
            }
            let mut total = 1.0;
            for idx in (0..plan.len()).rev() {
                let (v, par, mu) = plan[idx];
                let ok = allowed(v);
                let inner = msg[v];
                if v == par {
                    let mut z = 0.0;
                    for s in 0..2 {
                        if ok[s] {
                            z += 0.5 * inner[s];
                        }
                    }
                    total *= z;
                } else {
                    let mut out = [0.0; 2];
                    for (sp, o) in out.iter_mut().enumerate() {
                        for s in 0..2 {
                            if ok[s] {
                                let agree = if s == sp { 1.0 } else { -1.0 };
                                *o += 0.5 * (1.0 + agree * mu) * inner[s];
                            }
                        }
                    }
                    msg[par][0] *= out[0];
                    msg[par][1] *= out[1];
                }
            }
            total
        })
        .collect();
    Ok(MarginalTable {
        nodes: nodes.to_vec(),
        probs,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// All `k`-subsets of `0..p` in lexicographic order.
pub fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > p {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < p - k + i {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Exact order-`k` loss by enumerating every `k`-subset.
///
/// Subsets are evaluated in parallel and reduced to the largest value,
/// ties going to the lexicographically first subset.
pub fn sstv_k(a: &TreeIsingModel, b: &TreeIsingModel, k: usize) -> Result<LossReport> {
    check_same_p(a, b)?;
    let p = a.p();
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!("order {k} for p = {p}")));
    }
    if k > MAX_SSTV_ORDER || p > MAX_SSTV_NODES {
        return Err(Error::BudgetExceeded(format!(
            "order {k} on {p} nodes needs {} marginal entries (limits: k ≤ {MAX_SSTV_ORDER}, p ≤ {MAX_SSTV_NODES})",
            binomial(p, k) << k
        )));
    }
    let all = subsets(p, k);
    let values = all
        .par_iter()
        .map(|s| exact_marginal(a, s)?.tv(&exact_marginal(b, s)?))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok(LossReport {
        k,
        value: values[best],
        argmax_subset: all[best].clone(),
    })
}

/// `E_{X_S ~ P} |P(X_i = +1 | X_S) − Q(X_i = +1 | X_S)|`.
pub fn conditional_prediction_error(
    p_true: &TreeIsingModel,
    q: &TreeIsingModel,
    i: usize,
    s: &[usize],
) -> Result<f64> {
    check_same_p(p_true, q)?;
    p_true.structure().check_node(i)?;
    if s.contains(&i) {
        return Err(Error::NodeInConditioningSet(i));
    }
    let mut nodes = s.to_vec();
    nodes.push(i);
    let tp = exact_marginal(p_true, &nodes)?;
    let tq = exact_marginal(q, &nodes)?;
    let top = 1 << s.len();
    let mut err = 0.0;
    for x in 0..top {
        let (pm, pp) = (tp.probs[x], tp.probs[x | top]);
        let (qm, qp) = (tq.probs[x], tq.probs[x | top]);
        let ps = pm + pp;
        if ps > 0.0 {
            err += ps * (pp / ps - qp / (qm + qp)).abs();
        }
    }
    Ok(err)
}

/// Binary entropy `H_B(q)` in nats.
pub fn binary_entropy(q: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(q) + h(1.0 - q)
}

/// Entropy of a tree model: `log 2` per component plus `H_B((1 + μ_e)/2)`
/// per edge.
pub fn entropy(m: &TreeIsingModel) -> f64 {
    m.structure().num_components() as f64 * std::f64::consts::LN_2
        + m.mus()
            .iter()
            .map(|&mu| binary_entropy((1.0 + mu) / 2.0))
            .sum::<f64>()
}

fn projection_cross_term(corr: impl Fn(Edge) -> f64, t: &Forest) -> f64 {
    t.num_components() as f64 * std::f64::consts::LN_2
        + t.edges()
            .iter()
            .map(|&e| binary_entropy((1.0 + corr(e)) / 2.0))
            .sum::<f64>()
}

/// `D(P ‖ Π_t(P))` where `Π_t(P)` matches the correlations of `P` on the
/// edges of `t`:
///
/// ```text
/// D = −H(P) + c·log 2 + Σ_{e ∈ t} H_B((1 + μ_e)/2)
/// ```
///
/// with `c` the number of components of `t`. `H(P)` is in closed form for
/// tree models.
pub fn kl_to_projection(p_true: &TreeIsingModel, t: &Forest) -> Result<f64> {
    if p_true.p() != t.p() {
        return Err(Error::DimensionMismatch(p_true.p(), t.p()));
    }
    let c = p_true.correlations();
    Ok((projection_cross_term(|e| c.edge(e), t) - entropy(p_true)).max(0.0))
}

/// Largest node count for [`kl_to_projection_table`].
pub const MAX_TABLE_NODES: usize = 12;

/// Same as [`kl_to_projection`] for an arbitrary joint distribution given as
/// a full table.
pub fn kl_to_projection_table(p_full: &FullTable, t: &Forest) -> Result<f64> {
    if p_full.p() > MAX_TABLE_NODES {
        return Err(Error::BudgetExceeded(format!(
            "full-table projection on {} nodes (limit {MAX_TABLE_NODES})",
            p_full.p()
        )));
    }
    if p_full.p() != t.p() {
        return Err(Error::DimensionMismatch(p_full.p(), t.p()));
    }
    Ok(projection_cross_term(|e| p_full.correlation(e.lo(), e.hi()), t) - p_full.entropy())
}

/// `D(a ‖ b)` in closed form:
/// `Σ_e θ^a_e μ^a_e − Φ(a) − Σ_{e ∈ b} θ^b_e E_a[X_i X_j] + Φ(b)`.
pub fn kl_divergence(a: &TreeIsingModel, b: &TreeIsingModel) -> Result<f64> {
    check_same_p(a, b)?;
    let ca = a.correlations();
    let self_term: f64 = a.thetas().iter().zip(a.mus()).map(|(t, m)| t * m).sum();
    let cross: f64 = b
        .edges()
        .iter()
        .zip(b.thetas())
        .map(|(&e, t)| t * ca.edge(e))
        .sum();
    Ok(self_term - a.log_partition() - cross + b.log_partition())
}

/// `J(a, b) = Σ_{i<j} (θ_ij − θ'_ij)(μ_ij − μ'_ij)`, which equals
/// `D(a ‖ b) + D(b ‖ a)`. Couplings of non-edges are zero and `μ` is the
/// path-product correlation.
pub fn symmetrized_kl(a: &TreeIsingModel, b: &TreeIsingModel) -> Result<f64> {
    check_same_p(a, b)?;
    let (ca, cb) = (a.correlations(), b.correlations());
    let mut pairs: Vec<Edge> = a.edges().iter().chain(b.edges()).copied().collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs
        .iter()
        .map(|&e| (a.theta(e) - b.theta(e)) * (ca.edge(e) - cb.edge(e)))
        .sum())
}
