//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use tree_ising::brute::FullTable;
use tree_ising::estimation::{empirical_correlations, hoeffding_epsilon, ThresholdSpec};
use tree_ising::evaluation::{binary_entropy, exact_marginal, sstv2, sstv_k, symmetrized_kl};
use tree_ising::harness::{
    random_tree_model, recovery_sample_count, repro_chain, summarize, sweep, SweepConfig,
};
use tree_ising::learners::{chow_liu, fit, Method};
use tree_ising::model::hard_family;
use tree_ising::sampling::{sample, SeedSpec};
use tree_ising::verification::{check_events, enumerate_spanning_trees, two_trees_sweep};
use tree_ising::{CorrelationMatrix, Edge, Tree, TreeIsingModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 100 random tree models on 2..=10 nodes.
fn model_set(master: u64) -> Vec<TreeIsingModel> {
    let mut rng = SeedSpec::new(master, 0).rng();
    (0..100)
        .map(|k| {
            let p = rng.random_range(2..=10);
            random_tree_model(p, 0.0, 1.5, SeedSpec::new(master, k + 1)).unwrap()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let models = model_set(101);
    let mut rng = SeedSpec::new(101, 1000).rng();
    let (mut worst, mut checked) = (0.0f64, 0);
    for m in &models {
        let full = FullTable::new(m).unwrap();
        let mut nodes: Vec<usize> = (0..m.p()).collect();
        for _ in 0..5 {
            let k = rng.random_range(1..=m.p().min(4));
            nodes.shuffle(&mut rng);
            let s = &nodes[..k];
            let table = exact_marginal(m, s).unwrap();
            for (a, b) in table.probs().iter().zip(full.marginal(s)) {
                worst = worst.max((a - b).abs());
            }
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!(
            "{} models, {checked} subsets, max |diff| = {worst:.2e}",
            models.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let left = model_set(101);
    let mut worst_pair = 0.0f64;
    let mut worst_k2 = 0.0f64;
    let mut monotone = true;
    let mut rng = SeedSpec::new(202, 0).rng();
    for (idx, a) in left.iter().enumerate() {
        let b = random_tree_model(a.p(), 0.0, 1.5, SeedSpec::new(202, idx as u64 + 1)).unwrap();
        let b = if rng.random::<bool>() { b } else { a.clone() };
        let (fa, fb) = (FullTable::new(a).unwrap(), FullTable::new(&b).unwrap());
        let mut brute: f64 = 0.0;
        for u in 0..a.p() {
            for v in u + 1..a.p() {
                brute = brute.max(fa.marginal_tv(&fb, &[u, v]));
            }
        }
        let l2 = sstv2(a, &b).unwrap().value;
        worst_pair = worst_pair.max((l2 - brute).abs());
        worst_k2 = worst_k2.max((sstv_k(a, &b, 2).unwrap().value - l2).abs());
        let mut prev = l2;
        for k in 3..=4.min(a.p()) {
            let lk = sstv_k(a, &b, k).unwrap().value;
            if lk < prev - 1e-12 {
                monotone = false;
            }
            prev = lk;
        }
    }
    outcome(
        worst_pair <= 1e-12 && worst_k2 <= 1e-12 && monotone,
        format!(
            "100 pairs, |closed form - brute| = {worst_pair:.2e}, |order-2 enum - closed form| = {worst_k2:.2e}, monotone in k: {monotone}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = SeedSpec::new(303, 0).rng();
    let mut matched = 0;
    let mut total = 0;
    let mut failures = Vec::new();
    let trees: Vec<Vec<Tree>> = (3..=6)
        .map(|p| enumerate_spanning_trees(p).unwrap().collect())
        .collect();
    while total < 50 {
        let p = 3 + total % 4;
        let c = CorrelationMatrix::from_upper(p, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let mut w: Vec<f64> = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .map(|(i, j)| c.get(i, j).abs())
            .collect();
        w.sort_by(f64::total_cmp);
        if w.windows(2).any(|x| x[0] == x[1]) {
            continue;
        }
        total += 1;
        let cl = chow_liu(&c).unwrap();
        let score =
            |t: &Tree, f: &dyn Fn(f64) -> f64| t.edges().iter().map(|&e| f(c.edge(e))).sum::<f64>();
        let mut best_abs: Option<(&Tree, f64)> = None;
        let mut best_ent: Option<(&Tree, f64)> = None;
        for t in &trees[p - 3] {
            let a = score(t, &|m: f64| m.abs());
            let h = score(t, &|m: f64| binary_entropy((1.0 + m) / 2.0));
            if best_abs.is_none_or(|(_, s)| a > s) {
                best_abs = Some((t, a));
            }
            if best_ent.is_none_or(|(_, s)| h < s) {
                best_ent = Some((t, h));
            }
        }
        if best_abs.unwrap().0 == &cl && best_ent.unwrap().0 == &cl {
            matched += 1;
        } else {
            failures.push(format!("p={p}"));
        }
    }
    outcome(
        matched == total,
        format!("{matched}/{total} matrices match both exhaustive optima {failures:?}"),
    )
}

fn criterion_4() -> Outcome {
    let r = repro_chain(0.1).unwrap();
    let expect = [0.0, 0.05, 0.0095];
    let err = r
        .losses
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut ordered = true;
    for eps in [0.01, 0.05, 0.1, 0.3] {
        let l = repro_chain(eps).unwrap().losses;
        ordered &= l[0] < l[2] && l[2] < l[1];
    }
    outcome(
        err <= 1e-12 && ordered,
        format!(
            "losses at 0.1 = ({:.3e}, {}, {}), max err {err:.1e}; ordering chain < swapped < forest: {ordered}",
            r.losses[0], r.losses[1], r.losses[2]
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    let mut bad = 0;
    for p in 3..=6 {
        let s = two_trees_sweep(p).unwrap();
        bad += s.counterexamples.len();
        parts.push(format!(
            "p={p}: {} pairs, {} witnessed",
            s.tree_pairs, s.witnessed
        ));
    }
    outcome(
        bad == 0,
        format!("{}; counterexamples = {bad}", parts.join("; ")),
    )
}

fn weak_chain() -> TreeIsingModel {
    let edges: Vec<(usize, usize, f64)> = (0..7)
        .map(|k| (k, k + 1, if k == 3 { 0.01 } else { 0.9 }))
        .collect();
    TreeIsingModel::from_correlations(8, &edges).unwrap()
}

fn criterion_6() -> Outcome {
    let (alpha, beta, delta) = (0.4, 0.8, 0.1);
    let model = random_tree_model(8, alpha, beta, SeedSpec::new(606, 0)).unwrap();
    let n = recovery_sample_count(8, alpha, beta, delta, 8.0).unwrap();
    let mut cfg = SweepConfig::new(model, vec![n], 200);
    cfg.master_seed = 6060;
    cfg.delta = delta;
    let rows = sweep(&cfg).unwrap();
    let s = &summarize(&rows, Method::ChowLiu, cfg.eta)[0];
    let failure = 1.0 - s.recovery_rate;
    outcome(
        failure <= delta,
        format!("n = {n}, failure rate {failure:.3} over 200 trials (limit {delta})"),
    )
}

fn criterion_7() -> Outcome {
    let mut cfg = SweepConfig::new(weak_chain(), vec![4000], 200);
    cfg.master_seed = 7070;
    cfg.eta = 0.1;
    let rows = sweep(&cfg).unwrap();
    let s = &summarize(&rows, Method::ChowLiu, 0.1)[0];
    outcome(
        s.recovery_rate <= 0.6 && s.small_loss_rate >= 0.9,
        format!(
            "recovery rate {:.3} (≤ 0.6), fraction with loss ≤ 0.1: {:.3} (≥ 0.9)",
            s.recovery_rate, s.small_loss_rate
        ),
    )
}

fn criterion_8() -> Outcome {
    let m = weak_chain();
    let n = 4000;
    let th = ThresholdSpec::from_inputs(n, 8, 0.1, m.max_coupling()).unwrap();
    let (mut contained, mut cutoff_ok) = (0, 0);
    for t in 0..200 {
        let s = sample(&m, n, SeedSpec::new(8080, t)).unwrap();
        let c = empirical_correlations(&s).unwrap();
        let learned = fit(&s, Method::Truncation, Some(th)).unwrap();
        let forest = learned.model.structure();
        if forest.is_subgraph_of(m.structure()) {
            contained += 1;
        }
        if forest
            .edges()
            .iter()
            .all(|&e| c.edge(e).abs() >= th.cutoff())
        {
            cutoff_ok += 1;
        }
    }
    outcome(
        contained >= 180 && cutoff_ok == 200,
        format!(
            "eps = {:.4}, tau = {:.4}; contained {contained}/200, cutoff respected {cutoff_ok}/200",
            th.epsilon, th.tau
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut asserted = 0;
    for (pi, p) in [4usize, 6].into_iter().enumerate() {
        let model = random_tree_model(p, 0.2, 1.0, SeedSpec::new(909, pi as u64)).unwrap();
        for n in [1000usize, 4000] {
            let eps = hoeffding_epsilon(n, p, 0.1).unwrap();
            for gamma in [0.3, 0.5] {
                let (mut corr, mut cascade) = (0, 0);
                for t in 0..500 {
                    let s =
                        sample(&model, n, SeedSpec::new(9090 + n as u64 + p as u64, t)).unwrap();
                    let ev = check_events(&model, &s, eps, gamma).unwrap();
                    corr += usize::from(ev.corr);
                    cascade += usize::from(ev.cascade);
                }
                let pp = (p * p) as f64;
                let b_corr = 1.0 - 2.0 * pp * (-(n as f64) * eps * eps / 2.0).exp();
                let b_casc = 1.0 - 4.0 * pp / gamma * (-gamma * gamma * n as f64 / 32.0).exp();
                let (fc, fk) = (corr as f64 / 500.0, cascade as f64 / 500.0);
                for (f, b) in [(fc, b_corr), (fk, b_casc)] {
                    if b > 0.0 {
                        asserted += 1;
                        pass &= f >= b;
                    }
                }
                lines.push(format!(
                    "p={p} n={n} g={gamma}: corr {fc:.3}/{}, cascade {fk:.3}/{}",
                    fmt_bound(b_corr),
                    fmt_bound(b_casc)
                ));
            }
        }
    }
    outcome(
        pass,
        format!(
            "{asserted} non-vacuous bounds checked; {}",
            lines.join("; ")
        ),
    )
}

fn fmt_bound(b: f64) -> String {
    if b > 0.0 {
        format!("{b:.3}")
    } else {
        "vacuous".into()
    }
}

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    let mut bounded = true;
    let mut count = 0;
    for p in [5, 7] {
        for (alpha, beta) in [(0.2f64, 1.0f64), (0.5, 0.5)] {
            let fam = hard_family(p, alpha, beta).unwrap();
            let f0 = FullTable::new(&fam[0]).unwrap();
            for m in &fam[1..] {
                let j = symmetrized_kl(&fam[0], m).unwrap();
                let fi = FullTable::new(m).unwrap();
                let brute = f0.kl(&fi).unwrap() + fi.kl(&f0).unwrap();
                worst = worst.max((j - brute).abs());
                bounded &= j <= 4.0 * alpha * alpha * (-2.0 * beta).exp();
                count += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10 && bounded,
        format!("{count} pairs, max |J - brute| = {worst:.2e}, all within the 4a²e^(-2b) bound: {bounded}"),
    )
}

fn criterion_11() -> Outcome {
    let n = 1_000_000;
    let mut rng = SeedSpec::new(1111, 0).rng();
    let mut chi_pass = 0;
    let mut details = Vec::new();
    for k in 0..10u64 {
        let p = 1 + (k as usize % 4);
        let model = if p == 1 {
            TreeIsingModel::independent(1).unwrap()
        } else {
            random_tree_model(p, 0.1, 1.0, SeedSpec::new(1111, k + 1)).unwrap()
        };
        let seed = SeedSpec::new(rng.random(), k);
        let s = sample(&model, n, seed).unwrap();
        let probs = FullTable::new(&model).unwrap().probs().to_vec();
        let mut counts = vec![0u64; probs.len()];
        for row in s.rows() {
            let idx = row
                .iter()
                .enumerate()
                .fold(0, |a, (i, &x)| a | (usize::from(x == 1) << i));
            counts[idx] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&o, &q)| {
                let e = q * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        let df = (probs.len() - 1) as f64;
        let crit = ChiSquared::new(df).unwrap().inverse_cdf(1.0 - 1e-3);
        if stat <= crit {
            chi_pass += 1;
        }
        details.push(format!("{stat:.1}/{crit:.1}"));
    }

    // Joint law of the edge products against the product of their marginals.
    let mut worst_gap = 0.0f64;
    for (k, p) in [3usize, 4, 5].into_iter().enumerate() {
        let model = random_tree_model(p, 0.2, 1.2, SeedSpec::new(1112, k as u64)).unwrap();
        let s = sample(&model, n, SeedSpec::new(1113, k as u64)).unwrap();
        let edges: Vec<Edge> = model.edges().to_vec();
        let d = edges.len();
        let mut joint = vec![0u64; 1 << d];
        let mut plus = vec![0u64; d];
        for row in s.rows() {
            let mut idx = 0;
            for (b, e) in edges.iter().enumerate() {
                if row[e.lo()] == row[e.hi()] {
                    idx |= 1 << b;
                    plus[b] += 1;
                }
            }
            joint[idx] += 1;
        }
        for (idx, &c) in joint.iter().enumerate() {
            let prod: f64 = (0..d)
                .map(|b| {
                    let q = plus[b] as f64 / n as f64;
                    if idx >> b & 1 == 1 {
                        q
                    } else {
                        1.0 - q
                    }
                })
                .product();
            worst_gap = worst_gap.max((c as f64 / n as f64 - prod).abs());
        }
    }
    outcome(
        chi_pass == 10 && worst_gap <= 0.01,
        format!(
            "chi-square passed {chi_pass}/10 (stat/critical: {}); edge-product factorization gap {worst_gap:.2e}",
            details.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 11] = [
        (
            "oracle equivalence, inference",
            criterion_1,
            Duration::from_secs(10),
        ),
        (
            "oracle equivalence, small-set TV",
            criterion_2,
            Duration::from_secs(30),
        ),
        ("Chow-Liu optimality", criterion_3, Duration::from_secs(60)),
        (
            "three-node chain losses",
            criterion_4,
            Duration::from_secs(1),
        ),
        (
            "two-trees witness sweep",
            criterion_5,
            Duration::from_secs(900),
        ),
        (
            "structure recovery at the sufficient sample count",
            criterion_6,
            Duration::from_secs(120),
        ),
        (
            "prediction without recovery",
            criterion_7,
            Duration::from_secs(120),
        ),
        (
            "truncation containment",
            criterion_8,
            Duration::from_secs(120),
        ),
        (
            "concentration bounds",
            criterion_9,
            Duration::from_secs(300),
        ),
        (
            "symmetrized KL closed form",
            criterion_10,
            Duration::from_secs(5),
        ),
        ("sampler fidelity", criterion_11, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let pass = out.pass && took <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
