//! Attribute-enhanced graphs.
//!
//! The input topology is augmented with the most attribute-similar
//! non-edges and every pair of the enlarged set gets a combined weight
//!
//! ```text
//! Ã_uv = α A_uv + (1 - α) (β w_uv + (1 - β) s_uv)
//! ```
//!
//! where `s` is cosine similarity and `w` comes from a one-hidden-layer
//! network over the endpoint attributes. Combined weights are floored at
//! [`WEIGHT_FLOOR`] so the random-walk transition stays defined.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{GelatoError, Result};
use crate::graph::{fmt_real, Adjacency, AttributedGraph, Attributes, NodePair};
use crate::rng::{derive_indexed, rng_for};

/// Lower bound applied to combined weights.
pub const WEIGHT_FLOOR: f64 = 1e-6;

pub const DEFAULT_HIDDEN: usize = 128;

/// Most similar non-edges, best first. `count` is capped by the number of
/// candidates; nodes with all-zero attributes are never candidates.
pub fn augmentation_pairs(g: &AttributedGraph, count: usize) -> Result<Vec<NodePair>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let attrs = g.attributes();
    if attrs.dim() == 0 {
        return Err(GelatoError::AttributeRequired("augmentation"));
    }
    let n = g.n();
    let norms: Vec<f64> = (0..n).map(|u| attrs.row(u).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let adj = g.adjacency();
    let better = |a: &(f64, NodePair), b: &(f64, NodePair)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    const ROWS: usize = 64;
    let blocks: Vec<Vec<(f64, NodePair)>> = (0..n.div_ceil(ROWS))
        .into_par_iter()
        .map(|blk| {
            let mut best: Vec<(f64, NodePair)> = Vec::new();
            for u in blk * ROWS..((blk + 1) * ROWS).min(n) {
                if norms[u] == 0.0 {
                    continue;
                }
                let xu = attrs.row(u);
                for v in u + 1..n {
                    if norms[v] == 0.0 || adj.has_edge(u, v) {
                        continue;
                    }
                    let dot: f64 = xu.iter().zip(attrs.row(v)).map(|(a, b)| a * b).sum();
                    best.push((dot / (norms[u] * norms[v]), NodePair { u, v }));
                }
                if best.len() > 2 * count {
                    best.select_nth_unstable_by(count - 1, better);
                    best.truncate(count);
                }
            }
            best
        })
        .collect();
    let mut all: Vec<(f64, NodePair)> = blocks.into_iter().flatten().collect();
    all.sort_by(better);
    if all.len() < count {
        warn!("only {} augmentation candidates for {} requested", all.len(), count);
    }
    all.truncate(count);
    Ok(all.into_iter().map(|(_, p)| p).collect())
}

/// Number of pairs added for ratio `eta`.
pub fn augmentation_count(m: usize, eta: f64) -> usize {
    (eta * m as f64).round() as usize
}

/// The enlarged pair set: original edges followed by the added pairs, both sorted.
pub fn augment(g: &AttributedGraph, eta: f64) -> Result<Vec<NodePair>> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(GelatoError::param(format!("eta must be non-negative, got {eta}")));
    }
    let mut added = augmentation_pairs(g, augmentation_count(g.m(), eta))?;
    added.sort_unstable();
    let mut out = g.edges();
    out.extend(added);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMode {
    /// Features `[x_u + x_v ; |x_u - x_v|]`, invariant to endpoint order.
    Undirected,
    /// Features `[x_u ; x_v]`.
    Directed,
}

impl PairMode {
    pub fn tag(&self) -> &'static str {
        match self {
            PairMode::Undirected => "undirected",
            PairMode::Directed => "directed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "undirected" => Ok(PairMode::Undirected),
            "directed" => Ok(PairMode::Directed),
            _ => Err(GelatoError::param(format!("unknown pair mode {s:?}"))),
        }
    }
}

/// Edge-weight network: `sigmoid(w2 . dropout(relu(W1 f + b1)) + b2)`.
///
/// Parameters live in one flat vector laid out as `W1` (row-major,
/// `hidden x 2r`), `b1`, `w2`, `b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeNet {
    pub r: usize,
    pub hidden: usize,
    pub mode: PairMode,
    pub dropout: f64,
    pub theta: Vec<f64>,
}

/// Per-pair activations kept for the backward pass.
struct Trace {
    features: Vec<f64>,
    pre: Vec<f64>,
    mask: Vec<f64>,
    out: f64,
}

impl EdgeNet {
    pub fn zeros(r: usize, hidden: usize, mode: PairMode, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(GelatoError::param(format!("dropout must be in [0, 1), got {dropout}")));
        }
        if hidden == 0 {
            return Err(GelatoError::param("hidden width must be positive"));
        }
        let len = hidden * 2 * r + 2 * hidden + 1;
        Ok(EdgeNet {
            r,
            hidden,
            mode,
            dropout,
            theta: vec![0.0; len],
        })
    }

    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(r: usize, hidden: usize, mode: PairMode, dropout: f64, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(r, hidden, mode, dropout)?;
        let mut rng = rng_for(seed, "edge-net/init");
        let first = net.hidden * (net.input_dim() + 1);
        let a1 = 1.0 / (net.input_dim().max(1) as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        for (i, x) in net.theta.iter_mut().enumerate() {
            let a = if i < first { a1 } else { a2 };
            *x = rng.random_range(-a..a);
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        2 * self.r
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim();
        (w1, w1 + self.hidden, w1 + 2 * self.hidden)
    }

    fn features(&self, xu: &[f64], xv: &[f64]) -> Vec<f64> {
        match self.mode {
            PairMode::Undirected => xu
                .iter()
                .zip(xv)
                .map(|(a, b)| a + b)
                .chain(xu.iter().zip(xv).map(|(a, b)| (a - b).abs()))
                .collect(),
            PairMode::Directed => xu.iter().chain(xv).copied().collect(),
        }
    }

    /// Inverted-dropout scale per hidden unit: 0 or `1/(1-p)`.
    fn mask(&self, train: bool, seed: u64) -> Vec<f64> {
        if !train || self.dropout == 0.0 {
            return vec![1.0; self.hidden];
        }
        let keep = 1.0 - self.dropout;
        let mut rng = rng_for(seed, "edge-net/dropout");
        (0..self.hidden)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    fn trace(&self, xu: &[f64], xv: &[f64], train: bool, seed: u64) -> Trace {
        let features = self.features(xu, xv);
        let d = self.input_dim();
        let (ob1, ow2, ob2) = self.offsets();
        let mask = self.mask(train, seed);
        let mut pre = vec![0.0; self.hidden];
        let mut out = self.theta[ob2];
        for h in 0..self.hidden {
            let row = &self.theta[h * d..(h + 1) * d];
            let z: f64 = self.theta[ob1 + h] + row.iter().zip(&features).map(|(a, b)| a * b).sum::<f64>();
            pre[h] = z;
            out += self.theta[ow2 + h] * z.max(0.0) * mask[h];
        }
        Trace {
            features,
            pre,
            mask,
            out,
        }
    }

    fn check(&self, xu: &[f64], xv: &[f64]) -> Result<()> {
        for x in [xu, xv] {
            if x.len() != self.r {
                return Err(GelatoError::Dimension {
                    expected: self.r,
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    /// Weight of a single pair. Dropout is active only when `train` is set.
    pub fn edge_weight(&self, xu: &[f64], xv: &[f64], train: bool, seed: u64) -> Result<f64> {
        self.check(xu, xv)?;
        Ok(sigmoid(self.trace(xu, xv, train, seed).out))
    }

    /// Weights for a list of pairs. Pair `i` draws its dropout mask from a
    /// seed derived from `seed` and `i`.
    pub fn forward_pairs(&self, attrs: &Attributes, pairs: &[NodePair], train: bool, seed: u64) -> Vec<f64> {
        assert_eq!(attrs.dim(), self.r, "attribute width");
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let s = derive_indexed(seed, "pair", i as u64);
                sigmoid(self.trace(attrs.row(p.u), attrs.row(p.v), train, s).out)
            })
            .collect()
    }

    /// Accumulate `sum_i dw[i] * d w_i / d theta` into `grad`.
    pub fn backward_pairs(
        &self,
        attrs: &Attributes,
        pairs: &[NodePair],
        train: bool,
        seed: u64,
        dw: &[f64],
        grad: &mut [f64],
    ) {
        assert_eq!(pairs.len(), dw.len());
        assert_eq!(grad.len(), self.theta.len());
        const CHUNK: usize = 256;
        let partials: Vec<Vec<f64>> = pairs
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut local = vec![0.0; self.theta.len()];
                for (j, p) in chunk.iter().enumerate() {
                    let i = c * CHUNK + j;
                    if dw[i] != 0.0 {
                        let s = derive_indexed(seed, "pair", i as u64);
                        self.accumulate(attrs.row(p.u), attrs.row(p.v), train, s, dw[i], &mut local);
                    }
                }
                local
            })
            .collect();
        // fixed reduction order keeps runs reproducible
        for part in partials {
            for (g, x) in grad.iter_mut().zip(part) {
                *g += x;
            }
        }
    }

    fn accumulate(&self, xu: &[f64], xv: &[f64], train: bool, seed: u64, dw: f64, grad: &mut [f64]) {
        let tr = self.trace(xu, xv, train, seed);
        let w = sigmoid(tr.out);
        let dout = dw * w * (1.0 - w);
        let d = self.input_dim();
        let (ob1, ow2, ob2) = self.offsets();
        grad[ob2] += dout;
        for h in 0..self.hidden {
            let z = tr.pre[h];
            if z <= 0.0 || tr.mask[h] == 0.0 {
                continue;
            }
            grad[ow2 + h] += dout * z * tr.mask[h];
            let dz = dout * self.theta[ow2 + h] * tr.mask[h];
            grad[ob1 + h] += dz;
            for (g, f) in grad[h * d..(h + 1) * d].iter_mut().zip(&tr.features) {
                *g += dz * f;
            }
        }
    }

    /// Which hidden units are active for a pair, used to detect rectifier
    /// kinks when checking gradients numerically.
    pub fn preactivation_signs(&self, xu: &[f64], xv: &[f64], train: bool, seed: u64) -> Vec<bool> {
        self.trace(xu, xv, train, seed).pre.iter().map(|&z| z > 0.0).collect()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A graph whose pairs carry their topological, similarity, learned and
/// combined weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancedGraph {
    pub n: usize,
    pub pairs: Vec<NodePair>,
    pub a: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub combined: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl EnhancedGraph {
    /// Whether the floor replaced the raw combination of pair `i`.
    pub fn is_floored(&self, i: usize) -> bool {
        raw_combination(self.alpha, self.beta, self.a[i], self.w[i], self.s[i]) < WEIGHT_FLOOR
    }

    pub fn adjacency(&self) -> Adjacency {
        let pairs: Vec<(NodePair, f64)> = self.pairs.iter().copied().zip(self.combined.iter().copied()).collect();
        Adjacency::from_pairs(self.n, &pairs).expect("enhanced pairs are unique")
    }

    /// Adjacency with unit self-loops on nodes no pair touches. The second
    /// value maps each stored slot to its pair index, or `None` for a loop.
    pub fn adjacency_with_loops(&self) -> (Adjacency, Vec<Option<usize>>) {
        let mut touched = vec![false; self.n];
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(self.pairs.len());
        for (p, &w) in self.pairs.iter().zip(&self.combined) {
            touched[p.u] = true;
            touched[p.v] = true;
            entries.push((p.u, p.v, w));
        }
        let m = entries.len();
        for (u, t) in touched.iter().enumerate() {
            if !t {
                entries.push((u, u, 1.0));
            }
        }
        let (adj, source) = Adjacency::build(self.n, &entries).expect("enhanced pairs are unique");
        let source = source.into_iter().map(|s| (s < m).then_some(s)).collect();
        (adj, source)
    }

    /// TSV dump with columns `u v A s w Ã`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("u\tv\tA\ts\tw\tcombined\n");
        for i in 0..self.pairs.len() {
            let p = self.pairs[i];
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                p.u,
                p.v,
                fmt_real(self.a[i]),
                fmt_real(self.s[i]),
                fmt_real(self.w[i]),
                fmt_real(self.combined[i])
            );
        }
        out
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| GelatoError::io(path, e))
    }
}

#[inline]
fn raw_combination(alpha: f64, beta: f64, a: f64, w: f64, s: f64) -> f64 {
    alpha * a + (1.0 - alpha) * (beta * w + (1.0 - beta) * s)
}

/// Combine weights on the pair set `tilde`. Without attributes the
/// combination falls back to the topology alone (`α = 1`).
pub fn combine(g: &AttributedGraph, tilde: &[NodePair], w: &[f64], alpha: f64, beta: f64, eta: f64) -> Result<EnhancedGraph> {
    for (name, x) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(GelatoError::param(format!("{name} must be in [0, 1], got {x}")));
        }
    }
    if w.len() != tilde.len() {
        return Err(GelatoError::Dimension {
            expected: tilde.len(),
            got: w.len(),
        });
    }
    let alpha = if g.attr_dim() == 0 { 1.0 } else { alpha };
    let adj = g.adjacency();
    let a: Vec<f64> = tilde.iter().map(|p| adj.weight(p.u, p.v)).collect();
    let s: Vec<f64> = tilde.iter().map(|p| g.cosine(p.u, p.v)).collect();
    let combined = (0..tilde.len())
        .map(|i| raw_combination(alpha, beta, a[i], w[i], s[i]).max(WEIGHT_FLOOR))
        .collect();
    Ok(EnhancedGraph {
        n: g.n(),
        pairs: tilde.to_vec(),
        a,
        s,
        w: w.to_vec(),
        combined,
        alpha,
        beta,
        eta,
    })
}
