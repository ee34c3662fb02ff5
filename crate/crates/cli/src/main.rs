//! `tree-ising-lab`: generate, sample, learn, evaluate and verify tree Ising
//! models from the command line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tree_ising::estimation::ThresholdSpec;
use tree_ising::evaluation::{
    conditional_prediction_error, kl_to_projection, sstv2, sstv_k, symmetrized_kl,
};
use tree_ising::harness::{
    gen_model, repro_chain, run_verify, sweep, sweep_csv, verify_csv, with_workers, GenKind, Suite,
    SweepConfig, VerifyOptions, CSV_VERSION_LINE,
};
use tree_ising::learners::{fit, Method};
use tree_ising::sampling::{sample, SampleMatrix, SeedSpec};
use tree_ising::TreeIsingModel;

#[derive(Parser)]
#[command(
    name = "tree-ising-lab",
    version,
    about = "Learn and evaluate tree-structured Ising models"
)]
struct Cli {
    /// Master seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output path (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a model file, or one file per member for the families.
    GenModel(GenArgs),
    /// Draw i.i.d. samples from a model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Trial index under the master seed.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Write the packed binary format.
        #[arg(long)]
        binary: bool,
    },
    /// Fit a model to a sample file.
    Learn {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Upper bound on |θ| for the strong-edge threshold.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Compare two models under a loss and print one CSV row.
    Eval {
        #[arg(long, value_enum)]
        loss: LossArg,
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Predicted node for `cond`.
        #[arg(long)]
        node: Option<usize>,
        /// Conditioning nodes for `cond`, comma separated.
        #[arg(long, value_delimiter = ',')]
        given: Vec<usize>,
    },
    /// Monte-Carlo sweep over a grid of sample sizes.
    Sweep {
        #[arg(long, conflicts_with = "gen")]
        model: Option<PathBuf>,
        /// Generator spec, e.g. `random-tree:p=8,alpha=0.4,beta=0.8`.
        #[arg(long)]
        gen: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Loss level counted as a small prediction error.
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::ChowLiu])]
        method: Vec<MethodArg>,
        /// Add a wall-clock runtime column.
        #[arg(long)]
        timing: bool,
    },
    /// Run a verification suite; exits with 1 if any instance fails.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 6)]
        p: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// Losses of the three structures on the three-node chain.
    ReproChain {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Couplings, one per edge or a single shared value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Vec<f64>,
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    RandomTree,
    Chain,
    Star,
    HardFamily,
    ChainFamily,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    ChowLiu,
    Truncate,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::ChowLiu => Method::ChowLiu,
            MethodArg::Truncate => Method::Truncation,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Sstv2,
    SstvK,
    KlProj,
    Symkl,
    Cond,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    TwoTrees,
    Events,
    Zy,
    Product,
}

enum Failure {
    Input(String),
    Assertion(String),
}

impl From<tree_ising::Error> for Failure {
    fn from(e: tree_ising::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Outcome {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn need(v: Option<f64>, name: &str, kind: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| input(format!("{kind} needs --{name}")))
}

fn gen_kind(g: &GenArgs, seed: u64) -> Result<GenKind, Failure> {
    let name = g.kind.to_possible_value().unwrap().get_name().to_string();
    let thetas = || {
        if g.theta.is_empty() {
            Err(input(format!("{name} needs --theta")))
        } else {
            Ok(g.theta.clone())
        }
    };
    Ok(match g.kind {
        KindArg::RandomTree => GenKind::RandomTree {
            p: g.p,
            alpha: need(g.alpha, "alpha", &name)?,
            beta: need(g.beta, "beta", &name)?,
            seed,
        },
        KindArg::Chain => GenKind::Chain {
            p: g.p,
            thetas: thetas()?,
        },
        KindArg::Star => GenKind::Star {
            p: g.p,
            thetas: thetas()?,
        },
        KindArg::HardFamily => GenKind::HardFamily {
            p: g.p,
            alpha: need(g.alpha, "alpha", &name)?,
            beta: need(g.beta, "beta", &name)?,
        },
        KindArg::ChainFamily => GenKind::ChainFamily {
            p: g.p,
            eta: need(g.eta, "eta", &name)?,
        },
    })
}

/// Parses `kind:key=value,...` into generator arguments.
fn parse_gen_spec(spec: &str) -> Result<GenArgs, Failure> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let kind =
        KindArg::from_str(kind, true).map_err(|_| input(format!("unknown generator `{kind}`")))?;
    let mut g = GenArgs {
        kind,
        p: 0,
        alpha: None,
        beta: None,
        theta: Vec::new(),
        eta: None,
    };
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| input(format!("expected key=value, got `{kv}`")))?;
        let num = || {
            v.parse::<f64>()
                .map_err(|_| input(format!("bad number `{v}` for {k}")))
        };
        match k {
            "p" => {
                g.p = v
                    .parse()
                    .map_err(|_| input(format!("bad node count `{v}`")))?
            }
            "alpha" => g.alpha = Some(num()?),
            "beta" => g.beta = Some(num()?),
            "eta" => g.eta = Some(num()?),
            "theta" => {
                g.theta = v
                    .split('/')
                    .map(|t| t.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| input(format!("bad couplings `{v}`")))?
            }
            _ => return Err(input(format!("unknown generator key `{k}`"))),
        }
    }
    Ok(g)
}

fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{i}"),
    };
    path.with_file_name(name)
}

fn run(cli: Cli) -> Outcome {
    let Cli {
        seed,
        workers,
        out,
        command,
    } = cli;
    match command {
        Command::GenModel(g) => {
            let models = gen_model(&gen_kind(&g, seed)?)?;
            match (&out, models.len()) {
                (_, 1) => emit(&out, models[0].to_text().as_bytes())?,
                (Some(path), _) => {
                    for (i, m) in models.iter().enumerate() {
                        m.write_file(numbered(path, i))?;
                    }
                }
                (None, _) => {
                    let text: Vec<String> = models
                        .iter()
                        .enumerate()
                        .map(|(i, m)| format!("# member {i}\n{}", m.to_text()))
                        .collect();
                    emit(&out, text.join("\n").as_bytes())?;
                }
            }
        }
        Command::Sample {
            model,
            n,
            trial,
            binary,
        } => {
            let m = TreeIsingModel::read_file(model)?;
            let s = sample(&m, n, SeedSpec::new(seed, trial))?;
            if binary {
                let mut buf = Vec::new();
                s.write_binary(&mut buf)?;
                emit(&out, &buf)?;
            } else {
                emit(&out, s.to_text().as_bytes())?;
            }
        }
        Command::Learn {
            method,
            samples,
            delta,
            beta,
            tau,
            epsilon,
        } => {
            let s = SampleMatrix::read_file(samples)?;
            let th = match method {
                MethodArg::ChowLiu => None,
                MethodArg::Truncate => {
                    let beta = match (beta, tau) {
                        (Some(b), _) => b,
                        (None, Some(_)) => 0.0,
                        (None, None) => return Err(input("truncate needs --beta or --tau")),
                    };
                    let th = ThresholdSpec::from_inputs(s.n(), s.p(), delta, beta)?;
                    Some(th.with_overrides(epsilon, tau)?)
                }
            };
            let learned = with_workers(workers, || fit(&s, method.into(), th))??;
            emit(&out, learned.to_text().as_bytes())?;
        }
        Command::Eval {
            loss,
            model_a,
            model_b,
            k,
            node,
            given,
        } => {
            let a = TreeIsingModel::read_file(model_a)?;
            let b = TreeIsingModel::read_file(model_b)?;
            let (name, value, subset) = with_workers(workers, || -> Result<_, Failure> {
                Ok(match loss {
                    LossArg::Sstv2 => {
                        let r = sstv2(&a, &b)?;
                        ("sstv2".to_string(), r.value, r.argmax_subset)
                    }
                    LossArg::SstvK => {
                        let r = sstv_k(&a, &b, k)?;
                        (format!("sstv-{k}"), r.value, r.argmax_subset)
                    }
                    LossArg::KlProj => (
                        "kl-proj".into(),
                        kl_to_projection(&a, b.structure())?,
                        vec![],
                    ),
                    LossArg::Symkl => ("symkl".into(), symmetrized_kl(&a, &b)?, vec![]),
                    LossArg::Cond => {
                        let i = node.ok_or_else(|| input("cond needs --node"))?;
                        let v = conditional_prediction_error(&a, &b, i, &given)?;
                        ("cond".into(), v, given.clone())
                    }
                })
            })??;
            let subset: Vec<String> = subset.iter().map(usize::to_string).collect();
            let text = format!(
                "{CSV_VERSION_LINE}\nloss,value,argmax_subset\n{name},{value},{}\n",
                subset.join(" ")
            );
            emit(&out, text.as_bytes())?;
        }
        Command::Sweep {
            model,
            gen,
            n_grid,
            trials,
            delta,
            eta,
            beta,
            method,
            timing,
        } => {
            let truth = match (model, gen) {
                (Some(path), _) => TreeIsingModel::read_file(path)?,
                (None, Some(spec)) => {
                    let mut models = gen_model(&gen_kind(&parse_gen_spec(&spec)?, seed)?)?;
                    models.swap_remove(0)
                }
                (None, None) => return Err(input("sweep needs --model or --gen")),
            };
            let mut cfg = SweepConfig::new(truth, n_grid, trials);
            cfg.delta = delta;
            cfg.eta = eta;
            cfg.beta = beta;
            cfg.master_seed = seed;
            cfg.methods = method.into_iter().map(Method::from).collect();
            cfg.workers = workers;
            cfg.timing = timing;
            let rows = sweep(&cfg)?;
            emit(&out, sweep_csv(&cfg, &rows).as_bytes())?;
        }
        Command::Verify {
            suite,
            p,
            trials,
            n,
            delta,
            gamma,
        } => {
            let suite = match suite {
                SuiteArg::TwoTrees => Suite::TwoTrees,
                SuiteArg::Events => Suite::Events,
                SuiteArg::Zy => Suite::Zy,
                SuiteArg::Product => Suite::Product,
            };
            let opt = VerifyOptions {
                p,
                trials,
                n,
                delta,
                gamma,
                master_seed: seed,
                workers,
            };
            let rows = run_verify(suite, &opt)?;
            emit(&out, verify_csv(&rows).as_bytes())?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(Failure::Assertion(format!(
                    "{failed} verification rows failed"
                )));
            }
        }
        Command::ReproChain { epsilon } => {
            emit(&out, repro_chain(epsilon)?.to_csv().as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
