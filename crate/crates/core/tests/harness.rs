use tree_ising::harness::{
    gen_model, random_tree_model, recovery_sample_count, repro_chain, summarize, sweep, sweep_csv,
    GenKind, SweepConfig,
};
use tree_ising::learners::Method;
use tree_ising::model::atanh;
use tree_ising::sampling::SeedSpec;
use tree_ising::TreeIsingModel;

fn config(workers: usize) -> SweepConfig {
    let m = random_tree_model(6, 0.2, 0.9, SeedSpec::new(80, 0)).unwrap();
    let mut cfg = SweepConfig::new(m, vec![100, 300], 4);
    cfg.master_seed = 81;
    cfg.methods = vec![Method::ChowLiu, Method::Truncation];
    cfg.workers = Some(workers);
    cfg
}

#[test]
fn sweep_output_ignores_worker_count() {
    let a = config(1);
    let b = config(3);
    let ra = sweep(&a).unwrap();
    assert_eq!(sweep_csv(&a, &ra), sweep_csv(&b, &sweep(&b).unwrap()));
    assert_eq!(sweep_csv(&a, &ra), sweep_csv(&a, &sweep(&a).unwrap()));
    assert!(ra.iter().all(|r| (0.0..=1.0).contains(&r.sstv2)));
}

#[test]
fn mean_loss_falls_with_sample_size() {
    let m = random_tree_model(6, 0.1, 1.0, SeedSpec::new(82, 0)).unwrap();
    let mut cfg = SweepConfig::new(m, vec![100, 400, 1600], 200);
    cfg.master_seed = 83;
    let rows = sweep(&cfg).unwrap();
    let means: Vec<f64> = [100, 400, 1600]
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.sstv2).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0] + 0.01), "{means:?}");
    assert_eq!(summarize(&rows, Method::ChowLiu, cfg.eta).len(), 3);
}

#[test]
fn invalid_grids_are_rejected() {
    let mut cfg = config(1);
    cfg.n_grid = vec![300, 100];
    assert!(sweep(&cfg).is_err());
    cfg.n_grid = vec![100];
    cfg.trials = 0;
    assert!(sweep(&cfg).is_err());
}

#[test]
fn generators_build_the_expected_models() {
    let chain = gen_model(&GenKind::Chain {
        p: 3,
        thetas: vec![atanh(0.1), atanh(0.9)],
    })
    .unwrap();
    let expected = TreeIsingModel::from_correlations(3, &[(0, 1, 0.1), (1, 2, 0.9)]).unwrap();
    assert_eq!(chain, vec![expected]);
    assert_eq!(
        gen_model(&GenKind::HardFamily {
            p: 5,
            alpha: 0.2,
            beta: 1.0
        })
        .unwrap()
        .len(),
        3
    );
    assert_eq!(
        gen_model(&GenKind::ChainFamily { p: 6, eta: 0.3 })
            .unwrap()
            .len(),
        6
    );
    let star = gen_model(&GenKind::Star {
        p: 5,
        thetas: vec![0.5],
    })
    .unwrap();
    assert!(star[0].edges().iter().all(|e| e.lo() == 0));
    let kind = GenKind::RandomTree {
        p: 10,
        alpha: 0.2,
        beta: 0.7,
        seed: 3,
    };
    let a = gen_model(&kind).unwrap();
    assert_eq!(a, gen_model(&kind).unwrap());
    assert!(a[0].thetas().iter().all(|t| (0.2..=0.7).contains(&t.abs())));
}

#[test]
fn chain_losses_shrink_quadratically() {
    let small = repro_chain(1e-4).unwrap().losses;
    assert!(small[2] / small[1] < 1e-3);
    assert!(repro_chain(0.0).is_err() && repro_chain(1.0).is_err());
    let r = repro_chain(0.2).unwrap();
    assert_eq!(r.unhalved()[1], 2.0 * r.losses[1]);
}

#[test]
fn sample_count_grows_with_the_weakest_edge() {
    let a = recovery_sample_count(8, 0.4, 0.8, 0.1, 8.0).unwrap();
    let b = recovery_sample_count(8, 0.2, 0.8, 0.1, 8.0).unwrap();
    assert!(b > 3 * a);
    assert!(recovery_sample_count(8, 0.4, 0.8, 0.0, 8.0).is_err());
}
