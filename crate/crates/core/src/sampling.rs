//! Exact ancestral sampling and the sample file formats.
//!
//! Every tree component is rooted at its lowest node id. Within a row, nodes
//! are visited component by component (ascending root id), breadth-first with
//! neighbors in ascending id order. Each visited node consumes one uniform
//! `f64` draw `u`: a root takes `+1` when `u < 1/2`, and any other node copies
//! its parent's spin when `u < (1 + μ_e) / 2` and flips it otherwise.
//!
//! The generator is ChaCha8 from `rand_chacha`, keyed by
//! [`SeedSpec::rng_key`]. Sampling is single-threaded per call, so the
//! output depends only on the model, `n` and the seed.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::TreeIsingModel;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of SplitMix64: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Describes the generator and seed derivation; written into file headers.
pub const RNG_DESCRIPTION: &str =
    "ChaCha8 (rand_chacha 0.9); stream = splitmix64 output #(trial+1) \
from state master; key = 4 successive splitmix64 outputs from state stream, little-endian";

/// A master seed plus a trial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        SeedSpec {
            master_seed,
            trial_index,
        }
    }

    /// The `(trial_index + 1)`-th SplitMix64 output of a generator whose
    /// state starts at `master_seed`. Computed in O(1).
    pub fn stream_seed(&self) -> u64 {
        let mut state = self
            .master_seed
            .wrapping_add(self.trial_index.wrapping_mul(GOLDEN_GAMMA));
        splitmix64(&mut state)
    }

    /// 32-byte ChaCha key: four SplitMix64 outputs starting from the stream
    /// seed.
    pub fn rng_key(&self) -> [u8; 32] {
        let mut state = self.stream_seed();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.rng_key())
    }
}

/// An `n × p` matrix of ±1 spins, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    spins: Vec<i8>,
    seed: Option<SeedSpec>,
}

impl SampleMatrix {
    pub fn new(p: usize, spins: Vec<i8>) -> Result<Self> {
        if p == 0 || spins.is_empty() {
            return Err(Error::EmptySamples);
        }
        if spins.len() % p != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} spins do not fill rows of length {p}",
                spins.len()
            )));
        }
        if let Some(&bad) = spins.iter().find(|&&x| x != 1 && x != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(SampleMatrix {
            n: spins.len() / p,
            p,
            spins,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: SeedSpec) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn row(&self, l: usize) -> &[i8] {
        &self.spins[l * self.p..(l + 1) * self.p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, i8> {
        self.spins.chunks_exact(self.p)
    }

    fn header(&self) -> String {
        let seed = match self.seed {
            Some(s) => format!("{}/{}", s.master_seed, s.trial_index),
            None => "unknown".into(),
        };
        format!("samples n={} p={} seed={seed}", self.n, self.p)
    }

    /// Text form: a header line, an `# rng=` comment, then one row per line
    /// of space-separated `+1`/`-1`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.spins.len() * 3 + 256);
        writeln!(out, "{}", self.header()).unwrap();
        writeln!(out, "# rng={RNG_DESCRIPTION}").unwrap();
        for row in self.rows() {
            for (k, &x) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                out.push_str(if x == 1 { "+1" } else { "-1" });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines.next().ok_or(Error::EmptySamples)?;
        let (n, p, seed) = parse_header(header)?;
        let mut spins = Vec::with_capacity(n * p);
        let mut rows = 0;
        for (idx, line) in lines {
            let before = spins.len();
            for tok in line.split_whitespace() {
                spins.push(match tok {
                    "+1" | "1" => 1,
                    "-1" => -1,
                    _ => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: format!("bad spin {tok:?}"),
                        })
                    }
                });
            }
            if spins.len() - before != p {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {p} spins, got {}", spins.len() - before),
                });
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {n} rows, found {rows}"),
            });
        }
        let m = SampleMatrix::new(p, spins)?;
        Ok(match seed {
            Some(s) => m.with_seed(s),
            None => m,
        })
    }

    /// Binary form: magic `TISB`, version byte `1`, seed flag byte, then
    /// `n`, `p`, master seed, trial index as little-endian `u64`, then the
    /// spins packed row-major at one bit per spin (bit set means `+1`,
    /// least-significant bit first, no per-row padding).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"TISB")?;
        w.write_all(&[1, u8::from(self.seed.is_some())])?;
        let s = self.seed.unwrap_or(SeedSpec::new(0, 0));
        for v in [self.n as u64, self.p as u64, s.master_seed, s.trial_index] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut bytes = vec![0u8; self.spins.len().div_ceil(8)];
        for (k, &x) in self.spins.iter().enumerate() {
            if x == 1 {
                bytes[k / 8] |= 1 << (k % 8);
            }
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: &str| Error::Parse {
            line: 0,
            msg: msg.into(),
        };
        let mut head = [0u8; 38];
        r.read_exact(&mut head)
            .map_err(|_| bad("truncated header"))?;
        if &head[..4] != b"TISB" {
            return Err(bad("bad magic"));
        }
        if head[4] != 1 {
            return Err(bad("unsupported version"));
        }
        let word = |k: usize| u64::from_le_bytes(head[6 + 8 * k..14 + 8 * k].try_into().unwrap());
        let (n, p) = (word(0) as usize, word(1) as usize);
        let total = n.checked_mul(p).ok_or_else(|| bad("dimensions overflow"))?;
        let mut bytes = vec![0u8; total.div_ceil(8)];
        r.read_exact(&mut bytes)
            .map_err(|_| bad("truncated body"))?;
        let spins = (0..total)
            .map(|k| {
                if bytes[k / 8] >> (k % 8) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        let m = SampleMatrix::new(p, spins)?;
        Ok(if head[5] == 1 {
            m.with_seed(SeedSpec::new(word(2), word(3)))
        } else {
            m
        })
    }

    /// Reads either format, detected by the magic bytes.
    pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"TISB") {
            SampleMatrix::read_binary(bytes.as_slice())
        } else {
            let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
                line: 0,
                msg: "sample file is neither text nor binary".into(),
            })?;
            SampleMatrix::from_text(&text)
        }
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, Option<SeedSpec>)> {
    let err = |msg: String| Error::Parse { line: 1, msg };
    let mut toks = line.split_whitespace();
    if toks.next() != Some("samples") {
        return Err(err(format!("bad header {line:?}")));
    }
    let (mut n, mut p, mut seed) = (None, None, None);
    for tok in toks {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("bad field {tok:?}")))?;
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| err(format!("bad number {v:?}")))
        };
        match key {
            "n" => n = Some(num(val)? as usize),
            "p" => p = Some(num(val)? as usize),
            "seed" if val == "unknown" => {}
            "seed" => {
                let (m, t) = val
                    .split_once('/')
                    .ok_or_else(|| err(format!("bad seed {val:?}")))?;
                seed = Some(SeedSpec::new(num(m)?, num(t)?));
            }
            _ => return Err(err(format!("unknown field {key:?}"))),
        }
    }
    match (n, p) {
        (Some(n), Some(p)) => Ok((n, p, seed)),
        _ => Err(err("header needs n= and p=".into())),
    }
}

/// Draws `n` i.i.d. configurations from `m`.
pub fn sample(m: &TreeIsingModel, n: usize, seed: SeedSpec) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    let p = m.p();
    let f = m.structure();
    // (node, parent, agree probability); parent == node marks a root.
    let mut plan = Vec::with_capacity(p);
    let mut seen = vec![false; p];
    for root in 0..p {
        if seen[root] {
            continue;
        }
        let (order, parent) = f.bfs(root);
        for v in order {
            seen[v] = true;
            if v == root {
                plan.push((v, v, 0.5));
            } else {
                let mu = m.mu(crate::graph::Edge::new(v, parent[v])?);
                plan.push((v, parent[v], (1.0 + mu) / 2.0));
            }
        }
    }
    let mut rng = seed.rng();
    let mut spins = vec![0i8; n * p];
    for row in spins.chunks_exact_mut(p) {
        for &(v, par, keep) in &plan {
            let u: f64 = rng.random();
            row[v] = if v == par {
                if u < 0.5 {
                    1
                } else {
                    -1
                }
            } else if u < keep {
                row[par]
            } else {
                -row[par]
            };
        }
    }
    Ok(SampleMatrix {
        n,
        p,
        spins,
        seed: Some(seed),
    })
}
