//! Seeded experiment sweeps, model generators and the verification suites
//! behind the command-line tool.
//!
//! All randomness comes from one master seed. Trial `t` at grid index `i`
//! uses [`SeedSpec`] `(master, i · trials + t)`.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{empirical_correlations, hoeffding_epsilon, ThresholdSpec};
use crate::evaluation::sstv2;
use crate::graph::{Forest, Tree};
use crate::learners::{fit, project, Method};
use crate::model::{atanh, chain_family, hard_family, TreeIsingModel};
use crate::sampling::{sample, SeedSpec, RNG_DESCRIPTION};
use crate::verification::{
    check_events, product_concentration_check, prufer_decode, two_trees_sweep, zy_statistics,
};

/// First line of every CSV written by the harness.
pub const CSV_VERSION_LINE: &str = "# tree-ising-lab v1";

/// Default constant in the sufficient sample count for structure recovery.
pub const DEFAULT_SAMPLE_CONSTANT: f64 = 8.0;

/// `ceil(C e^{2β} max{α⁻², 1} ln(p/δ))`.
pub fn recovery_sample_count(p: usize, alpha: f64, beta: f64, delta: f64, c: f64) -> Result<usize> {
    if !(alpha > 0.0 && beta >= alpha && delta > 0.0 && delta < 1.0 && c > 0.0) || p < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample count for p={p} alpha={alpha} beta={beta} delta={delta} C={c}"
        )));
    }
    let n = c * (2.0 * beta).exp() * alpha.powi(-2).max(1.0) * (p as f64 / delta).ln();
    Ok(n.ceil() as usize)
}

/// Runs `f` on a pool of `workers` threads, or on the global pool when
/// `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: TreeIsingModel,
    /// Strictly increasing sample sizes.
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    /// Loss level for the cascade event.
    pub eta: f64,
    /// Coupling bound used for `τ`; defaults to the model's.
    pub beta: Option<f64>,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub workers: Option<usize>,
    /// Adds a wall-clock column (breaks byte-identical output).
    pub timing: bool,
}

impl SweepConfig {
    pub fn new(model: TreeIsingModel, n_grid: Vec<usize>, trials: usize) -> Self {
        SweepConfig {
            model,
            n_grid,
            trials,
            delta: 0.1,
            eta: 0.1,
            beta: None,
            master_seed: 0,
            methods: vec![Method::ChowLiu],
            workers: None,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::InvalidParameter(
                "n grid must be non-empty and positive".into(),
            ));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "n grid must be strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter(
                "no learning method selected".into(),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {}", self.eta)));
        }
        if self.model.tree().is_none() {
            return Err(Error::NotSpanning(
                "sweeps need a spanning-tree model".into(),
            ));
        }
        hoeffding_epsilon(self.n_grid[0], self.model.p(), self.delta)?;
        Ok(())
    }

    fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| self.model.max_coupling())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub trial: usize,
    pub method: Method,
    pub structure_recovered: bool,
    pub sstv2: f64,
    pub corr: bool,
    pub strong: bool,
    pub cascade: bool,
    pub runtime_ms: Option<f64>,
}

fn sweep_task(cfg: &SweepConfig, n_idx: usize, t: usize) -> Result<Vec<SweepRow>> {
    let n = cfg.n_grid[n_idx];
    let seed = SeedSpec::new(cfg.master_seed, (n_idx * cfg.trials + t) as u64);
    let start = Instant::now();
    let s = sample(&cfg.model, n, seed)?;
    let th = ThresholdSpec::from_inputs(n, cfg.model.p(), cfg.delta, cfg.beta())?;
    let ev = check_events(&cfg.model, &s, th.epsilon, cfg.eta)?;
    cfg.methods
        .iter()
        .map(|&method| {
            let learned = fit(&s, method, Some(th))?;
            Ok(SweepRow {
                n,
                trial: t,
                method,
                structure_recovered: learned.model.structure() == cfg.model.structure(),
                sstv2: sstv2(&cfg.model, &learned.model)?.value,
                corr: ev.corr,
                strong: ev.strong,
                cascade: ev.cascade,
                runtime_ms: cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
            })
        })
        .collect()
}

/// Samples, fits and scores every `(n, trial)` cell. Rows come back in
/// `(n, trial, method)` order whatever the worker count.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.n_grid.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    let rows = with_workers(cfg.workers, || {
        tasks
            .par_iter()
            .map(|&(i, t)| sweep_task(cfg, i, t))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(rows.into_iter().flatten().collect())
}

/// CSV rendering of [`sweep`] output, with the version line and the
/// generator description up front.
pub fn sweep_csv(cfg: &SweepConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_VERSION_LINE}").unwrap();
    writeln!(
        out,
        "# rng={RNG_DESCRIPTION}; master_seed={}; trial_index = n_index * {} + trial",
        cfg.master_seed, cfg.trials
    )
    .unwrap();
    writeln!(
        out,
        "# p={} delta={} eta={} beta={}",
        cfg.model.p(),
        cfg.delta,
        cfg.eta,
        cfg.beta()
    )
    .unwrap();
    out.push_str("n,trial,method,recovered,sstv2,e_corr,e_strong,e_cascade");
    if cfg.timing {
        out.push_str(",runtime_ms");
    }
    out.push('\n');
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.trial,
            r.method,
            u8::from(r.structure_recovered),
            r.sstv2,
            u8::from(r.corr),
            u8::from(r.strong),
            u8::from(r.cascade)
        )
        .unwrap();
        if let Some(ms) = r.runtime_ms {
            write!(out, ",{ms:.3}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Per-`n` aggregates over trials for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub n: usize,
    pub recovery_rate: f64,
    pub mean_sstv2: f64,
    /// Fraction of trials with `sstv2 ≤ eta`.
    pub small_loss_rate: f64,
}

pub fn summarize(rows: &[SweepRow], method: Method, eta: f64) -> Vec<SweepSummary> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let sel: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.n == n && r.method == method)
                .collect();
            let k = sel.len().max(1) as f64;
            SweepSummary {
                n,
                recovery_rate: sel.iter().filter(|r| r.structure_recovered).count() as f64 / k,
                mean_sstv2: sel.iter().map(|r| r.sstv2).sum::<f64>() / k,
                small_loss_rate: sel.iter().filter(|r| r.sstv2 <= eta).count() as f64 / k,
            }
        })
        .collect()
}

/// Order-2 losses of the three-node chain against its projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRepro {
    pub epsilon: f64,
    /// Losses for the true chain, the forest `{(1,2)}` and the tree
    /// `{(0,2),(1,2)}`.
    pub losses: [f64; 3],
}

impl ChainRepro {
    /// The same values without the 1/2 total-variation factor.
    pub fn unhalved(&self) -> [f64; 3] {
        self.losses.map(|l| 2.0 * l)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_VERSION_LINE}\nstructure,edges,loss,loss_without_half\n");
        let names = [
            ("chain", "(0 1)(1 2)"),
            ("forest", "(1 2)"),
            ("swapped", "(0 2)(1 2)"),
        ];
        for ((name, edges), (l, d)) in names.iter().zip(self.losses.iter().zip(self.unhalved())) {
            writeln!(out, "{name},{edges},{l},{d}").unwrap();
        }
        out
    }
}

/// The chain `0 − 1 − 2` with `μ_01 = ε`, `μ_12 = 1 − ε`, scored against its
/// projections onto itself, onto `{(1,2)}` and onto `{(0,2),(1,2)}`.
pub fn repro_chain(epsilon: f64) -> Result<ChainRepro> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} outside (0, 1)"
        )));
    }
    let p = TreeIsingModel::from_correlations(3, &[(0, 1, epsilon), (1, 2, 1.0 - epsilon)])?;
    let c = p.correlations();
    let structures = [
        Forest::new(3, [(0, 1), (1, 2)])?,
        Forest::new(3, [(1, 2)])?,
        Forest::new(3, [(0, 2), (1, 2)])?,
    ];
    let mut losses = [0.0; 3];
    for (l, t) in losses.iter_mut().zip(&structures) {
        *l = sstv2(&p, &project(&c, t)?)?.value;
    }
    Ok(ChainRepro { epsilon, losses })
}

/// Model generators.
#[derive(Debug, Clone, PartialEq)]
pub enum GenKind {
    /// Uniform spanning tree from a random Prüfer sequence; couplings with
    /// `|θ|` uniform in `[alpha, beta]` and a random sign.
    RandomTree {
        p: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    },
    /// The path `0 − … − (p−1)`; `thetas` has one entry per edge or one
    /// entry used for every edge.
    Chain {
        p: usize,
        thetas: Vec<f64>,
    },
    /// The star centered at node 0, with `thetas` as for `Chain`.
    Star {
        p: usize,
        thetas: Vec<f64>,
    },
    HardFamily {
        p: usize,
        alpha: f64,
        beta: f64,
    },
    ChainFamily {
        p: usize,
        eta: f64,
    },
}

fn spread(thetas: &[f64], edges: usize) -> Result<Vec<f64>> {
    match thetas.len() {
        1 => Ok(vec![thetas[0]; edges]),
        k if k == edges => Ok(thetas.to_vec()),
        k => Err(Error::InvalidParameter(format!(
            "{k} couplings for {edges} edges"
        ))),
    }
}

/// Builds the models described by `kind`. Families return several models.
pub fn gen_model(kind: &GenKind) -> Result<Vec<TreeIsingModel>> {
    match *kind {
        GenKind::RandomTree {
            p,
            alpha,
            beta,
            seed,
        } => Ok(vec![random_tree_model(
            p,
            alpha,
            beta,
            SeedSpec::new(seed, 0),
        )?]),
        GenKind::Chain { p, ref thetas } => {
            let t = Tree::chain(p)?;
            let th = spread(thetas, t.num_edges())?;
            Ok(vec![TreeIsingModel::new(t, th)?])
        }
        GenKind::Star { p, ref thetas } => {
            let t = Tree::star(p)?;
            let th = spread(thetas, t.num_edges())?;
            Ok(vec![TreeIsingModel::new(t, th)?])
        }
        GenKind::HardFamily { p, alpha, beta } => hard_family(p, alpha, beta),
        GenKind::ChainFamily { p, eta } => chain_family(p, eta),
    }
}

/// A random tree model; see [`GenKind::RandomTree`].
pub fn random_tree_model(
    p: usize,
    alpha: f64,
    beta: f64,
    seed: SeedSpec,
) -> Result<TreeIsingModel> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "random tree needs p ≥ 2, got {p}"
        )));
    }
    if !(alpha >= 0.0 && alpha <= beta && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "coupling range [{alpha}, {beta}]"
        )));
    }
    let mut rng = seed.rng();
    let seq: Vec<usize> = (0..p - 2).map(|_| rng.random_range(0..p)).collect();
    let t = prufer_decode(p, &seq)?;
    let thetas = (0..t.num_edges())
        .map(|_| {
            let mag = alpha + (beta - alpha) * rng.random::<f64>();
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    TreeIsingModel::new(t, thetas)?.with_bounds(alpha, beta)
}

/// Which verification suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    TwoTrees,
    Events,
    Zy,
    Product,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub p: usize,
    pub trials: usize,
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            p: 6,
            trials: 500,
            n: 500,
            delta: 0.1,
            gamma: 0.5,
            master_seed: 0,
            workers: None,
        }
    }
}

/// One line of verification output.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub suite: &'static str,
    pub instance: String,
    pub pass: bool,
    pub margin: f64,
}

pub fn verify_csv(rows: &[VerifyRow]) -> String {
    let mut out =
        format!("{CSV_VERSION_LINE}\n# rng={RNG_DESCRIPTION}\nsuite,instance,pass,margin\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.suite,
            r.instance,
            u8::from(r.pass),
            r.margin
        )
        .unwrap();
    }
    out
}

/// Runs one suite and returns per-instance rows plus a summary row.
pub fn run_verify(suite: Suite, opt: &VerifyOptions) -> Result<Vec<VerifyRow>> {
    with_workers(opt.workers, || run_verify_inner(suite, opt))?
}

fn run_verify_inner(suite: Suite, opt: &VerifyOptions) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    match suite {
        Suite::TwoTrees => {
            let s = two_trees_sweep(opt.p)?;
            for c in &s.counterexamples {
                rows.push(VerifyRow {
                    suite: "two-trees",
                    instance: c.replace(',', ";"),
                    pass: false,
                    margin: 0.0,
                });
            }
            rows.push(VerifyRow {
                suite: "two-trees",
                instance: format!(
                    "p={} tree_pairs={} witnessed={}",
                    s.p, s.tree_pairs, s.witnessed
                ),
                pass: s.counterexamples.is_empty(),
                margin: s.counterexamples.len() as f64,
            });
        }
        Suite::Events | Suite::Zy => {
            let model =
                random_tree_model(opt.p, 0.2, 1.0, SeedSpec::new(opt.master_seed, u64::MAX))?;
            let eps = hoeffding_epsilon(opt.n, opt.p, opt.delta)?;
            let per_trial = (0..opt.trials)
                .into_par_iter()
                .map(|t| {
                    let s = sample(&model, opt.n, SeedSpec::new(opt.master_seed, t as u64))?;
                    if suite == Suite::Events {
                        let ev = check_events(&model, &s, eps, opt.gamma)?;
                        let consistent = ev.corr == (ev.max_corr_deviation <= eps);
                        Ok((
                            ev.corr,
                            VerifyRow {
                                suite: "events",
                                instance: format!("trial={t}"),
                                pass: consistent && ev.missing_edges_weak(),
                                margin: eps - ev.max_corr_deviation,
                            },
                        ))
                    } else {
                        let margin = zy_min_margin(&model, &s, eps)?;
                        Ok((
                            margin >= 0.0,
                            VerifyRow {
                                suite: "zy",
                                instance: format!("trial={t}"),
                                pass: true,
                                margin,
                            },
                        ))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let hits = per_trial.iter().filter(|(h, _)| *h).count();
            let freq = hits as f64 / opt.trials as f64;
            let pp = opt.p as f64;
            let target = if suite == Suite::Events {
                1.0 - 2.0 * pp * pp * (-(opt.n as f64) * eps * eps / 2.0).exp()
            } else {
                1.0 - opt.delta
            };
            rows.extend(per_trial.into_iter().map(|(_, r)| r));
            rows.push(VerifyRow {
                suite: if suite == Suite::Events {
                    "events"
                } else {
                    "zy"
                },
                instance: format!("frequency p={} n={} eps={eps}", opt.p, opt.n),
                pass: freq >= target,
                margin: freq - target,
            });
        }
        Suite::Product => {
            for d in 1..=4 {
                for mu in [0.0, 0.5, 0.9] {
                    let mus = vec![mu; d];
                    let r = product_concentration_check(
                        &mus,
                        opt.n,
                        opt.gamma,
                        opt.trials,
                        opt.master_seed ^ ((d as u64) << 8),
                    )?;
                    rows.push(VerifyRow {
                        suite: "product",
                        instance: format!("d={d} mu={mu} n={} gamma={}", opt.n, opt.gamma),
                        pass: r.bound >= 1.0 || r.within_bound(),
                        margin: r.bound - r.rate,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Smallest slack `bound − deviation` over every edge `e` and node pair
/// `(u, ũ)` whose true path contains `e`, for both Z and Y sums.
pub fn zy_min_margin(
    model: &TreeIsingModel,
    s: &crate::sampling::SampleMatrix,
    eps: f64,
) -> Result<f64> {
    let p = model.p();
    let mut margin = f64::INFINITY;
    for u in 0..p {
        for ut in u + 1..p {
            let Some(path) = model.structure().path_between(u, ut)? else {
                continue;
            };
            for e in path {
                let st = zy_statistics(s, model, e, u, ut)?;
                margin = margin
                    .min(st.z_bound(eps) - st.z_deviation())
                    .min(st.y_bound(eps) - st.y_deviation());
            }
        }
    }
    Ok(margin)
}

/// Empirical correlation export with the sample provenance in a comment.
pub fn correlations_csv(s: &crate::sampling::SampleMatrix) -> Result<String> {
    let c = empirical_correlations(s)?;
    let mut out = format!("{CSV_VERSION_LINE}\n");
    if let Some(seed) = s.seed() {
        writeln!(
            out,
            "# n={} seed={}/{}",
            s.n(),
            seed.master_seed,
            seed.trial_index
        )
        .unwrap();
    }
    out.push_str(&c.to_csv());
    Ok(out)
}

/// `θ = atanh(μ)` for a list of edge correlations.
pub fn thetas_from_mus(mus: &[f64]) -> Result<Vec<f64>> {
    mus.iter()
        .map(|&m| {
            if m.abs() < 1.0 {
                Ok(atanh(m))
            } else {
                Err(Error::InvalidParameter(format!("edge correlation {m}")))
            }
        })
        .collect()
}
