mod common;

use proptest::prelude::*;
use tree_ising::estimation::{empirical_correlations, hoeffding_epsilon, ThresholdSpec};
use tree_ising::evaluation::binary_entropy;
use tree_ising::harness::random_tree_model;
use tree_ising::learners::{chow_liu, fit, satisfies_exchange_property, truncation, Method};
use tree_ising::sampling::{sample, SeedSpec};
use tree_ising::verification::{check_events, enumerate_spanning_trees};
use tree_ising::{CorrelationMatrix, Edge, Tree, TreeIsingModel};

fn random_matrix(p: usize) -> impl Strategy<Value = CorrelationMatrix> {
    proptest::collection::vec(-1.0f64..1.0, p * (p - 1) / 2).prop_map(move |v| {
        let mut it = v.into_iter();
        CorrelationMatrix::from_upper(p, |_, _| it.next().unwrap()).unwrap()
    })
}

fn best_tree(c: &CorrelationMatrix, score: impl Fn(f64) -> f64) -> Tree {
    enumerate_spanning_trees(c.p())
        .unwrap()
        .map(|t| (t.edges().iter().map(|&e| score(c.edge(e))).sum::<f64>(), t))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn chow_liu_is_the_exhaustive_optimum(c in (3usize..=6).prop_flat_map(random_matrix)) {
        let t = chow_liu(&c).unwrap();
        prop_assert_eq!(&best_tree(&c, f64::abs), &t);
        prop_assert_eq!(&best_tree(&c, |m| -binary_entropy((1.0 + m) / 2.0)), &t);
    }

    #[test]
    fn chow_liu_has_the_exchange_property(c in (2usize..=9).prop_flat_map(random_matrix)) {
        prop_assert!(satisfies_exchange_property(&c, &chow_liu(&c).unwrap()).unwrap());
    }

    #[test]
    fn chow_liu_is_scale_invariant(c in (2usize..=9).prop_flat_map(random_matrix), k in 0.01f64..=1.0) {
        let scaled = CorrelationMatrix::from_upper(c.p(), |i, j| k * c.get(i, j)).unwrap();
        prop_assert_eq!(chow_liu(&scaled).unwrap(), chow_liu(&c).unwrap());
    }
}

fn chain3() -> TreeIsingModel {
    TreeIsingModel::from_correlations(3, &[(0, 1, 0.5), (1, 2, 0.8)]).unwrap()
}

#[test]
fn fit_recovers_the_chain_and_truncates_to_the_strongest_edge() {
    let m = chain3();
    let s = sample(&m, 100_000, SeedSpec::new(31, 0)).unwrap();
    let cl = fit(&s, Method::ChowLiu, None).unwrap();
    assert_eq!(cl.model.structure(), m.structure());
    let th = ThresholdSpec::from_inputs(s.n(), 3, 0.1, 1.0)
        .unwrap()
        .with_overrides(Some(0.01), Some(0.98))
        .unwrap();
    let tr = truncation(&empirical_correlations(&s).unwrap(), &th).unwrap();
    assert_eq!(tr.num_edges(), 0);
    let th = th.with_overrides(Some(0.01), Some(0.59)).unwrap();
    let tr = fit(&s, Method::Truncation, Some(th)).unwrap();
    assert_eq!(tr.model.edges(), &[Edge::new(1, 2).unwrap()]);
}

#[test]
fn hoeffding_radius_covers_the_deviation() {
    let (p, n, delta) = (6, 500, 0.1);
    let m = random_tree_model(p, 0.2, 1.0, SeedSpec::new(40, 0)).unwrap();
    let eps = hoeffding_epsilon(n, p, delta).unwrap();
    let covered = (0..500)
        .filter(|&t| {
            let s = sample(&m, n, SeedSpec::new(41, t)).unwrap();
            check_events(&m, &s, eps, 0.5).unwrap().corr
        })
        .count();
    assert!(covered as f64 / 500.0 >= 1.0 - delta, "{covered}");
}

#[test]
fn strong_edges_are_recovered() {
    let (p, n, delta) = (6, 2000, 0.1);
    let m = random_tree_model(p, 0.1, 1.0, SeedSpec::new(42, 0)).unwrap();
    let eps = hoeffding_epsilon(n, p, delta).unwrap();
    let hits = (0..500)
        .filter(|&t| {
            let s = sample(&m, n, SeedSpec::new(43, t)).unwrap();
            check_events(&m, &s, eps, 0.5).unwrap().strong
        })
        .count();
    assert!(hits as f64 / 500.0 >= 1.0 - delta, "{hits}");
}

#[test]
fn truncation_output_is_contained_in_the_truth() {
    let (p, n, delta) = (6, 4000, 0.1);
    let m = random_tree_model(p, 0.1, 1.0, SeedSpec::new(44, 0)).unwrap();
    let th = ThresholdSpec::from_inputs(n, p, delta, m.max_coupling()).unwrap();
    let inside = (0..500)
        .filter(|&t| {
            let s = sample(&m, n, SeedSpec::new(45, t)).unwrap();
            let f = fit(&s, Method::Truncation, Some(th)).unwrap();
            f.model.structure().is_subgraph_of(m.structure())
        })
        .count();
    assert!(inside as f64 / 500.0 >= 1.0 - delta, "{inside}");
}

#[test]
fn learned_trees_satisfy_the_exchange_property() {
    let m = random_tree_model(9, 0.05, 0.6, SeedSpec::new(46, 0)).unwrap();
    for t in 0..50 {
        let s = sample(&m, 300, SeedSpec::new(47, t)).unwrap();
        let c = empirical_correlations(&s).unwrap();
        assert!(satisfies_exchange_property(&c, &chow_liu(&c).unwrap()).unwrap());
    }
}
