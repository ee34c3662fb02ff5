#![allow(dead_code)]

use proptest::prelude::*;
use tree_ising::verification::prufer_decode;
use tree_ising::TreeIsingModel;

/// Random spanning-tree models on `lo..=hi` nodes with `|θ| ≤ 1.5`.
pub fn tree_model(lo: usize, hi: usize) -> impl Strategy<Value = TreeIsingModel> {
    (lo..=hi).prop_flat_map(|p| {
        (
            proptest::collection::vec(0..p, p - 2),
            proptest::collection::vec(-1.5f64..1.5, p - 1),
        )
            .prop_map(move |(seq, th)| {
                let t = prufer_decode(p, &seq).unwrap();
                TreeIsingModel::new(t, th).unwrap()
            })
    })
}

/// Random forests: a tree model with some couplings dropped.
pub fn forest_model(lo: usize, hi: usize) -> impl Strategy<Value = TreeIsingModel> {
    (tree_model(lo, hi), any::<u64>()).prop_map(|(m, mask)| {
        let edges: Vec<(usize, usize, f64)> = m
            .edges()
            .iter()
            .zip(m.thetas())
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, (e, &t))| (e.lo(), e.hi(), t))
            .collect();
        TreeIsingModel::from_edges(m.p(), &edges).unwrap()
    })
}

/// Two models on the same node count.
pub fn model_pair(lo: usize, hi: usize) -> impl Strategy<Value = (TreeIsingModel, TreeIsingModel)> {
    (lo..=hi).prop_flat_map(|p| (tree_model(p, p), tree_model(p, p)))
}
