//! Undirected forests and spanning trees on labeled nodes `0..p`.
//!
//! Edges are stored canonically as `(min, max)` and kept sorted, so iteration
//! order (and therefore every serialized form) is deterministic.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Structural limit on the number of nodes.
pub const MAX_NODES: usize = 1 << 20;

/// An unordered node pair, stored as `(lo, hi)` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge(pub(crate) usize, pub(crate) usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidEdge(a, b));
        }
        Ok(Edge(a.min(b), a.max(b)))
    }

    #[inline]
    pub fn lo(&self) -> usize {
        self.0
    }

    #[inline]
    pub fn hi(&self) -> usize {
        self.1
    }

    #[inline]
    pub fn touches(&self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }

    /// The endpoint opposite to `v`. `v` must be an endpoint.
    #[inline]
    pub fn other(&self, v: usize) -> usize {
        debug_assert!(self.touches(v));
        if self.0 == v {
            self.1
        } else {
            self.0
        }
    }

    /// Index of this pair in the row-major enumeration of all pairs
    /// `(0,1), (0,2), …, (p-2,p-1)`.
    #[inline]
    pub fn pair_index(&self, p: usize) -> usize {
        let (i, j) = (self.0, self.1);
        i * (2 * p - i - 1) / 2 + (j - i - 1)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

impl TryFrom<(usize, usize)> for Edge {
    type Error = Error;

    fn try_from((a, b): (usize, usize)) -> Result<Self> {
        Edge::new(a, b)
    }
}

/// An acyclic undirected graph on nodes `0..p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Forest {
    p: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Forest {
    pub fn new<I, E>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: Into<(usize, usize)>,
    {
        if p == 0 {
            return Err(Error::InvalidParameter(
                "node count must be positive".into(),
            ));
        }
        if p > MAX_NODES {
            return Err(Error::TooManyNodes(p));
        }
        let mut list = Vec::new();
        for e in edges {
            let (a, b) = e.into();
            for node in [a, b] {
                if node >= p {
                    return Err(Error::InvalidNode { node, p });
                }
            }
            list.push(Edge::new(a, b)?);
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0]));
        }
        let mut uf = UnionFind::new(p);
        for e in &list {
            if !uf.union(e.lo(), e.hi()) {
                return Err(Error::Cycle(*e));
            }
        }
        let mut adj = vec![Vec::new(); p];
        for e in &list {
            adj[e.lo()].push(e.hi());
            adj[e.hi()].push(e.lo());
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Ok(Forest {
            p,
            edges: list,
            adj,
        })
    }

    /// The forest with no edges.
    pub fn empty(p: usize) -> Result<Self> {
        Forest::new(p, std::iter::empty::<(usize, usize)>())
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges in ascending `(lo, hi)` order.
    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Neighbors of `v` in ascending order.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    /// Position of `e` in [`Forest::edges`].
    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.p {
            Err(Error::InvalidNode { node: v, p: self.p })
        } else {
            Ok(())
        }
    }

    pub fn is_spanning_tree(&self) -> bool {
        self.edges.len() + 1 == self.p
    }

    /// Whether every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &Forest) -> bool {
        self.p == other.p && self.edges.iter().all(|e| other.contains_edge(*e))
    }

    /// Component label of every node; the label is the smallest node id in
    /// the component.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.p];
        for root in 0..self.p {
            if label[root] != usize::MAX {
                continue;
            }
            label[root] = root;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &w in &self.adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = root;
                        stack.push(w);
                    }
                }
            }
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.p - self.edges.len()
    }

    /// Breadth-first traversal from `root`, visiting neighbors in ascending
    /// id order. Returns `(order, parent)` where `parent[root] == root` and
    /// unreached nodes have `parent == usize::MAX`.
    pub fn bfs(&self, root: usize) -> (Vec<usize>, Vec<usize>) {
        let mut parent = vec![usize::MAX; self.p];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        parent[root] = root;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &self.adj[v] {
                if parent[w] == usize::MAX {
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        (order, parent)
    }

    /// Nodes on the unique path from `u` to `v` (inclusive), or `None` when
    /// the two nodes lie in different components.
    pub fn path_nodes(&self, u: usize, v: usize) -> Result<Option<Vec<usize>>> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Ok(Some(vec![u]));
        }
        // Search from v so that walking parents from u yields u -> v order.
        let (_, parent) = self.bfs(v);
        if parent[u] == usize::MAX {
            return Ok(None);
        }
        let mut nodes = vec![u];
        let mut cur = u;
        while cur != v {
            cur = parent[cur];
            nodes.push(cur);
        }
        Ok(Some(nodes))
    }

    /// Edges on the unique path from `u` to `v`, ordered from `u` to `v`.
    /// `None` means the nodes are disconnected (only possible in a forest).
    pub fn path_between(&self, u: usize, v: usize) -> Result<Option<Vec<Edge>>> {
        Ok(self.path_nodes(u, v)?.map(|nodes| {
            nodes
                .windows(2)
                .map(|w| Edge(w[0].min(w[1]), w[0].max(w[1])))
                .collect()
        }))
    }
}

/// A spanning tree: a forest with exactly `p - 1` edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tree(Forest);

impl Tree {
    pub fn new<I, E>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: Into<(usize, usize)>,
    {
        Tree::from_forest(Forest::new(p, edges)?)
    }

    pub fn from_forest(forest: Forest) -> Result<Self> {
        if !forest.is_spanning_tree() {
            return Err(Error::NotSpanning(format!(
                "{} edges on {} nodes",
                forest.num_edges(),
                forest.p()
            )));
        }
        Ok(Tree(forest))
    }

    /// The path graph `0 - 1 - … - (p-1)`.
    pub fn chain(p: usize) -> Result<Self> {
        Tree::new(p, (1..p).map(|i| (i - 1, i)))
    }

    /// The star centered at node 0.
    pub fn star(p: usize) -> Result<Self> {
        Tree::new(p, (1..p).map(|i| (0, i)))
    }

    pub fn as_forest(&self) -> &Forest {
        &self.0
    }

    pub fn into_forest(self) -> Forest {
        self.0
    }

    /// Path edges between `u` and `v`; always connected in a tree.
    pub fn path(&self, u: usize, v: usize) -> Result<Vec<Edge>> {
        Ok(self
            .0
            .path_between(u, v)?
            .expect("spanning trees are connected"))
    }
}

impl Deref for Tree {
    type Target = Forest;

    fn deref(&self) -> &Forest {
        &self.0
    }
}

impl From<Tree> for Forest {
    fn from(t: Tree) -> Forest {
        t.0
    }
}

impl From<Edge> for (usize, usize) {
    fn from(e: Edge) -> (usize, usize) {
        (e.0, e.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(a: usize, b: usize) -> Edge {
        Edge::new(a, b).unwrap()
    }

    #[test]
    fn chain_path() {
        let t = Tree::chain(3).unwrap();
        assert_eq!(t.path_between(0, 2).unwrap(), Some(vec![e(0, 1), e(1, 2)]));
        assert_eq!(t.path_between(2, 0).unwrap(), Some(vec![e(1, 2), e(0, 1)]));
    }

    #[test]
    fn path_to_self_is_empty() {
        let t = Tree::star(4).unwrap();
        for u in 0..4 {
            assert_eq!(t.path_between(u, u).unwrap(), Some(vec![]));
        }
    }

    #[test]
    fn forest_disconnected() {
        let f = Forest::new(3, [(0, 1)]).unwrap();
        assert_eq!(f.path_between(0, 2).unwrap(), None);
        assert_eq!(f.components(), vec![0, 0, 2]);
        assert_eq!(f.num_components(), 2);
    }

    #[test]
    fn invalid_node_rejected() {
        let t = Tree::chain(3).unwrap();
        assert_eq!(
            t.path_between(0, 3),
            Err(Error::InvalidNode { node: 3, p: 3 })
        );
        assert!(matches!(
            Forest::new(3, [(0, 5)]),
            Err(Error::InvalidNode { node: 5, .. })
        ));
    }

    #[test]
    fn structural_violations() {
        assert!(matches!(
            Forest::new(3, [(1, 1)]),
            Err(Error::InvalidEdge(1, 1))
        ));
        assert!(matches!(
            Forest::new(3, [(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(_))
        ));
        assert!(matches!(
            Forest::new(3, [(0, 1), (1, 2), (0, 2)]),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(Tree::new(3, [(0, 1)]), Err(Error::NotSpanning(_))));
        assert!(matches!(Forest::empty(0), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            Forest::empty(MAX_NODES + 1),
            Err(Error::TooManyNodes(_))
        ));
    }

    #[test]
    fn edges_are_canonical_and_sorted() {
        let f = Forest::new(4, [(3, 1), (2, 0), (1, 0)]).unwrap();
        assert_eq!(f.edges(), &[e(0, 1), e(0, 2), e(1, 3)]);
        assert_eq!(f.neighbors(0), &[1, 2]);
    }

    #[test]
    fn pair_index_enumerates_pairs_in_order() {
        let p = 6;
        let mut k = 0;
        for i in 0..p {
            for j in i + 1..p {
                assert_eq!(e(i, j).pair_index(p), k);
                k += 1;
            }
        }
    }
}
