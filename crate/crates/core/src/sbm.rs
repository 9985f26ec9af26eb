//! Stochastic Block Model generator and closed-form oracles.
//!
//! Nodes are laid out block-contiguously: node `u` belongs to block `u / n`.
//! The analytic functions work per node, counting the `n - 1` same-block and
//! `n(k - 1)` other-block partners of a node.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GelatoError, Result};
use crate::graph::{pair_count, Adjacency, AttributedGraph, Attributes, NodePair};
use crate::heuristics::{autocovariance_dense, with_isolated_self_loops};
use crate::partition::{partition, PartitionConfig};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbmParams {
    /// Number of blocks.
    pub k: usize,
    /// Nodes per block.
    pub n: usize,
    /// Intra-block edge probability.
    pub p: f64,
    /// Inter-block edge probability.
    pub q: f64,
}

impl SbmParams {
    pub fn new(k: usize, n: usize, p: f64, q: f64) -> Result<Self> {
        let s = SbmParams { k, n, p, q };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k < 1 {
            problems.push("k must be >= 1".to_string());
        }
        if self.n < 2 {
            problems.push("n must be >= 2".to_string());
        }
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.q) {
            problems.push("p and q must lie in [0, 1]".to_string());
        }
        if self.q > self.p {
            problems.push(format!("q = {} exceeds p = {}", self.q, self.p));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GelatoError::param(problems.join("; ")))
        }
    }

    pub fn nodes(&self) -> usize {
        self.k * self.n
    }

    pub fn block_of(&self, u: usize) -> usize {
        u / self.n
    }
}

/// Synthetic attribute model for sampled graphs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttrMode {
    /// One-hot block indicator plus isotropic Gaussian noise of the given scale.
    BlockOneHot { sigma: f64 },
}

impl Default for AttrMode {
    fn default() -> Self {
        AttrMode::BlockOneHot { sigma: 0.1 }
    }
}

pub fn sample_sbm(params: SbmParams, seed: u64, attr_mode: Option<AttrMode>) -> Result<AttributedGraph> {
    params.validate()?;
    let total = params.nodes();
    let mut rng = rng_for(seed, "sbm/edges");
    let mut pairs = Vec::new();
    for u in 0..total {
        for v in u + 1..total {
            let prob = if params.block_of(u) == params.block_of(v) {
                params.p
            } else {
                params.q
            };
            if rng.random::<f64>() < prob {
                pairs.push((NodePair { u, v }, 1.0));
            }
        }
    }
    let adj = Adjacency::from_pairs(total, &pairs)?;
    let attrs = match attr_mode {
        None => Attributes::none(total),
        Some(AttrMode::BlockOneHot { sigma }) => {
            let mut rng = rng_for(seed, "sbm/attrs");
            let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| GelatoError::param(e.to_string()))?;
            let mut data = vec![0.0; total * params.k];
            for u in 0..total {
                for c in 0..params.k {
                    let base = if params.block_of(u) == c { 1.0 } else { 0.0 };
                    data[u * params.k + c] = base + noise.sample(&mut rng);
                }
            }
            Attributes::new(total, params.k, data)?
        }
    };
    AttributedGraph::new(adj, attrs)
}

/// Expected pair counts by block relation and link status.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCensus {
    pub intra_pos: f64,
    pub intra_neg: f64,
    pub inter_pos: f64,
    pub inter_neg: f64,
}

impl PairCensus {
    pub fn positives(&self) -> f64 {
        self.intra_pos + self.inter_pos
    }

    pub fn negatives(&self) -> f64 {
        self.intra_neg + self.inter_neg
    }

    pub fn total(&self) -> f64 {
        self.positives() + self.negatives()
    }

    /// Expected precision of a classifier that labels pairs at random,
    /// evaluated against every pair.
    pub fn unbiased_random_precision(&self) -> f64 {
        self.positives() / self.total()
    }

    /// Same classifier under balanced negative sampling.
    pub fn biased_random_precision(&self) -> f64 {
        0.5
    }

    /// Share of negatives that are intra-block (hard).
    pub fn hard_negative_share(&self) -> f64 {
        self.intra_neg / self.negatives()
    }
}

/// Expected pair census using exact `C(n, 2)` intra-block pair counts.
pub fn pair_census(params: SbmParams) -> PairCensus {
    let (k, n) = (params.k as f64, params.n as f64);
    let intra = k * pair_count(params.n) as f64;
    let inter = k * n * (k - 1.0) * n / 2.0;
    PairCensus {
        intra_pos: intra * params.p,
        intra_neg: intra * (1.0 - params.p),
        inter_pos: inter * params.q,
        inter_neg: inter * (1.0 - params.q),
    }
}

/// The three block-aware classifiers compared in the unbiased analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierSpec {
    /// Predicts every pair as a link.
    PredictAll,
    /// Predicts no links.
    PredictNone,
    /// Predicts same-block pairs as links and cross-block pairs as non-links.
    PredictWithinBlock,
}

/// Expected per-node confusion counts (standard semantics: a positive is a
/// pair that is a link).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) / (self.tp + self.tn + self.fp + self.fn_)
    }
}

pub fn expected_confusion(params: SbmParams, spec: ClassifierSpec) -> Confusion {
    let (n, k) = (params.n as f64, params.k as f64);
    let (same, other) = (n - 1.0, n * k - n);
    let (p, q) = (params.p, params.q);
    match spec {
        ClassifierSpec::PredictAll => Confusion {
            tp: same * p + other * q,
            fp: same * (1.0 - p) + other * (1.0 - q),
            tn: 0.0,
            fn_: 0.0,
        },
        ClassifierSpec::PredictNone => Confusion {
            tp: 0.0,
            fp: 0.0,
            tn: same * (1.0 - p) + other * (1.0 - q),
            fn_: same * p + other * q,
        },
        ClassifierSpec::PredictWithinBlock => Confusion {
            tp: same * p,
            fp: same * (1.0 - p),
            tn: other * (1.0 - q),
            fn_: other * q,
        },
    }
}

/// Expected per-node accuracy over all `nk - 1` partners (unbiased setting).
pub fn expected_accuracy(params: SbmParams, spec: ClassifierSpec) -> f64 {
    let (n, k) = (params.n as f64, params.k as f64);
    let (same, other) = (n - 1.0, n * k - n);
    let (p, q) = (params.p, params.q);
    let correct = match spec {
        ClassifierSpec::PredictNone => same * (1.0 - p) + other * (1.0 - q),
        ClassifierSpec::PredictWithinBlock => same * p + other * (1.0 - q),
        ClassifierSpec::PredictAll => same * p + other * q,
    };
    correct / (n * k - 1.0)
}

/// Expected accuracy under balanced negative sampling. The within-block
/// classifier scores the mean of its accuracy on positives (`a1`) and on
/// negatives (`a2`).
pub fn biased_expected_accuracy(params: SbmParams, spec: ClassifierSpec) -> f64 {
    let (n, k) = (params.n as f64, params.k as f64);
    let (same, other) = (n - 1.0, n * k - n);
    let (p, q) = (params.p, params.q);
    match spec {
        ClassifierSpec::PredictNone | ClassifierSpec::PredictAll => 0.5,
        ClassifierSpec::PredictWithinBlock => {
            let pos = same * p + other * q;
            let neg = other * (1.0 - q) + same * (1.0 - p);
            let a1 = if pos > 0.0 { same * p / pos } else { 0.0 };
            let a2 = if neg > 0.0 { other * (1.0 - q) / neg } else { 0.0 };
            (a1 + a2) / 2.0
        }
    }
}

/// One cell of the all-negative versus within-block comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem1Row {
    pub params: SbmParams,
    pub acc_none: f64,
    pub acc_within: f64,
}

impl Theorem1Row {
    pub fn winner(&self) -> &'static str {
        let diff = self.acc_none - self.acc_within;
        if diff.abs() <= 1e-12 {
            "tie"
        } else if diff > 0.0 {
            "none"
        } else {
            "within"
        }
    }

    /// The all-negative classifier should win exactly when `p < 0.5`.
    pub fn consistent(&self) -> bool {
        match self.winner() {
            "tie" => (self.params.p - 0.5).abs() < 1e-12,
            "none" => self.params.p < 0.5,
            _ => self.params.p > 0.5,
        }
    }
}

/// Default grid: `p` in 0.1..=0.9, every `q` in {0, 0.05, 0.1, ...} below `p`,
/// `k` in {2, 5, 10} and `n` in {100, 1000}.
pub fn theorem1_default_grid() -> Vec<SbmParams> {
    let mut out = Vec::new();
    for pi in 1..=9 {
        let p = pi as f64 / 10.0;
        for qi in 0..20 {
            let q = qi as f64 * 0.05;
            if q >= p - 1e-12 {
                break;
            }
            for k in [2, 5, 10] {
                for n in [100, 1000] {
                    out.push(SbmParams { k, n, p, q });
                }
            }
        }
    }
    out
}

pub fn theorem1_table(grid: &[SbmParams]) -> Vec<Theorem1Row> {
    grid.iter()
        .map(|&params| Theorem1Row {
            params,
            acc_none: expected_accuracy(params, ClassifierSpec::PredictNone),
            acc_within: expected_accuracy(params, ClassifierSpec::PredictWithinBlock),
        })
        .collect()
}

/// How often sampled graphs rank intra-block pairs above inter-block pairs
/// on average, per walk length.
#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Report {
    pub runs: usize,
    /// `(t, runs where the intra mean exceeded the inter mean)`.
    pub wins: Vec<(usize, usize)>,
}

pub fn verify_lemma1(params: SbmParams, runs: usize, ts: &[usize], seed: u64) -> Result<Lemma1Report> {
    let mut wins = vec![0usize; ts.len()];
    for run in 0..runs {
        let g = sample_sbm(params, crate::rng::derive_indexed(seed, "lemma1", run as u64), None)?;
        for (i, &t) in ts.iter().enumerate() {
            let (intra, inter) = autocov_block_means(&g, params, t)?;
            if intra > inter {
                wins[i] += 1;
            }
        }
    }
    Ok(Lemma1Report {
        runs,
        wins: ts.iter().copied().zip(wins).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    Intra,
    Inter,
}

/// Expected t = 1 Autocovariance of a pair with degrees `d_i`, `d_j` in a
/// graph with `m` edges.
pub fn expected_autocov_t1(params: SbmParams, kind: PairKind, d_i: f64, d_j: f64, m: f64) -> Result<f64> {
    if m <= 0.0 {
        return Err(GelatoError::param("m must be positive"));
    }
    let density = match kind {
        PairKind::Intra => params.p,
        PairKind::Inter => params.q,
    };
    Ok((density - d_i * d_j / (2.0 * m)) / (2.0 * m))
}

/// Mean dense Autocovariance over intra-block and inter-block pairs of an
/// SBM sample (all off-diagonal pairs, linked or not).
pub fn autocov_block_means(g: &AttributedGraph, params: SbmParams, t: usize) -> Result<(f64, f64)> {
    let adj = with_isolated_self_loops(g.adjacency());
    let r = autocovariance_dense(&adj, t)?;
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for u in 0..g.n() {
        for v in u + 1..g.n() {
            if params.block_of(u) == params.block_of(v) {
                intra += r[[u, v]];
                ni += 1;
            } else {
                inter += r[[u, v]];
                nx += 1;
            }
        }
    }
    Ok((intra / ni.max(1) as f64, inter / nx.max(1) as f64))
}

/// One row of the partition-count study.
#[derive(Clone, Debug, PartialEq)]
pub struct Lemma2Entry {
    pub k: usize,
    /// Mean over blocks of `|E_i| / |V_i|^2`.
    pub p_hat_literal: f64,
    /// Mean over blocks of `|E_i| / C(|V_i|, 2)`.
    pub p_hat_exact: f64,
    /// Expected t = 1 intra-block Autocovariance at `p_hat_exact` and mean degree.
    pub intra_autocov: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma2Report {
    pub entries: Vec<Lemma2Entry>,
    /// Whether `p_hat_exact` is non-decreasing along the sequence.
    pub monotone: bool,
}

/// Partition `g` for each count in `k_sequence` and report the within-block
/// density estimates.
pub fn verify_lemma2(g: &AttributedGraph, k_sequence: &[usize], seed: u64) -> Result<Lemma2Report> {
    if k_sequence.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GelatoError::param("k_sequence must be strictly increasing"));
    }
    let m = g.m() as f64;
    let mean_deg = if g.n() > 0 { 2.0 * m / g.n() as f64 } else { 0.0 };
    let mut entries = Vec::with_capacity(k_sequence.len());
    for &k in k_sequence {
        let part = partition(g, k, seed, &PartitionConfig::default())?;
        let mut lit = 0.0;
        let mut exact = 0.0;
        let mut counted = 0usize;
        for (&size, &edges) in part.block_sizes().iter().zip(part.intra_edge_counts()) {
            if size < 2 {
                continue;
            }
            lit += edges as f64 / (size as f64 * size as f64);
            exact += edges as f64 / pair_count(size) as f64;
            counted += 1;
        }
        let c = counted.max(1) as f64;
        let p_hat_exact = exact / c;
        let intra_autocov = if m > 0.0 {
            (p_hat_exact - mean_deg * mean_deg / (2.0 * m)) / (2.0 * m)
        } else {
            0.0
        };
        entries.push(Lemma2Entry {
            k,
            p_hat_literal: lit / c,
            p_hat_exact,
            intra_autocov,
        });
    }
    let monotone = entries.windows(2).all(|w| w[1].p_hat_exact >= w[0].p_hat_exact);
    Ok(Lemma2Report { entries, monotone })
}
