//! Train/validation/test pair sets.
//!
//! Positive edges are split 85/5/10 by default. Under the unbiased regime
//! the negatives of each split are every disconnected pair plus the
//! positives of later splits:
//!
//! ```text
//! train- = E- + valid+ + test+
//! valid- = E- + test+
//! test-  = E-
//! ```
//!
//! These sets are quadratic in `n`, so they are kept as a complement
//! descriptor (a pair scope minus a sorted exclusion list) and only streamed
//! or sampled on demand. The partitioned regime applies the same rules
//! inside each block of a partitioning and drops every cross-block pair.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{GelatoError, Result};
use crate::graph::{pair_count, AttributedGraph, NodePair};
use crate::partition::Partitioning;
use crate::rng::{rng_for, rng_indexed, GelatoRng};

pub const DEFAULT_RATIOS: [f64; 3] = [0.85, 0.05, 0.10];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Unbiased,
    Biased,
    Partitioned,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Unbiased => "unbiased",
            Regime::Biased => "biased",
            Regime::Partitioned => "partitioned",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(Regime::Unbiased),
            "biased" => Ok(Regime::Biased),
            "partitioned" => Ok(Regime::Partitioned),
            other => Err(GelatoError::param(format!("unknown regime {other:?}"))),
        }
    }
}

/// The universe a complement descriptor is taken over.
#[derive(Clone, Debug, PartialEq)]
pub enum PairScope {
    /// Every unordered pair of `n` nodes.
    All { n: usize },
    /// Pairs whose endpoints share a block.
    WithinBlocks { assign: Vec<usize>, blocks: Vec<Vec<usize>> },
}

impl PairScope {
    pub fn within(part: &Partitioning) -> Self {
        if part.k() == 1 {
            return PairScope::All {
                n: part.assignment().len(),
            };
        }
        PairScope::WithinBlocks {
            assign: part.assignment().to_vec(),
            blocks: (0..part.k()).map(|b| part.block(b).to_vec()).collect(),
        }
    }

    pub fn contains(&self, p: NodePair) -> bool {
        match self {
            PairScope::All { n } => p.v < *n,
            PairScope::WithinBlocks { assign, .. } => p.v < assign.len() && assign[p.u] == assign[p.v],
        }
    }

    pub fn count(&self) -> usize {
        match self {
            PairScope::All { n } => pair_count(*n),
            PairScope::WithinBlocks { blocks, .. } => blocks.iter().map(|b| pair_count(b.len())).sum(),
        }
    }

    fn iter(&self) -> Box<dyn Iterator<Item = NodePair> + '_> {
        match self {
            PairScope::All { n } => {
                let n = *n;
                Box::new((0..n).flat_map(move |u| (u + 1..n).map(move |v| NodePair { u, v })))
            }
            PairScope::WithinBlocks { blocks, .. } => Box::new(blocks.iter().flat_map(|b| {
                (0..b.len()).flat_map(move |i| (i + 1..b.len()).map(move |j| NodePair::canonical(b[i], b[j])))
            })),
        }
    }

    fn sample_one(&self, rng: &mut GelatoRng) -> Option<NodePair> {
        match self {
            PairScope::All { n } => {
                let total = pair_count(*n);
                (total > 0).then(|| NodePair::from_linear_index(rng.random_range(0..total), *n))
            }
            PairScope::WithinBlocks { blocks, .. } => {
                let total = self.count();
                if total == 0 {
                    return None;
                }
                let mut idx = rng.random_range(0..total);
                for b in blocks {
                    let c = pair_count(b.len());
                    if idx < c {
                        let local = NodePair::from_linear_index(idx, b.len());
                        return Some(NodePair::canonical(b[local.u], b[local.v]));
                    }
                    idx -= c;
                }
                unreachable!("index within total")
            }
        }
    }
}

/// A negative pair set, explicit or implicit.
#[derive(Clone, Debug, PartialEq)]
pub enum NegativeSet {
    /// Sorted, duplicate-free pairs.
    Explicit(Vec<NodePair>),
    /// Every pair of the scope except the sorted exclusion list.
    Complement { scope: PairScope, exclude: Vec<NodePair> },
}

impl NegativeSet {
    pub fn explicit(mut pairs: Vec<NodePair>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        NegativeSet::Explicit(pairs)
    }

    pub fn complement(scope: PairScope, exclude: impl IntoIterator<Item = NodePair>) -> Self {
        let mut exclude: Vec<NodePair> = exclude.into_iter().filter(|p| scope.contains(*p)).collect();
        exclude.sort_unstable();
        exclude.dedup();
        NegativeSet::Complement { scope, exclude }
    }

    pub fn len(&self) -> usize {
        match self {
            NegativeSet::Explicit(p) => p.len(),
            NegativeSet::Complement { scope, exclude } => scope.count() - exclude.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: NodePair) -> bool {
        match self {
            NegativeSet::Explicit(v) => v.binary_search(&p).is_ok(),
            NegativeSet::Complement { scope, exclude } => scope.contains(p) && exclude.binary_search(&p).is_err(),
        }
    }

    /// Stream the pairs. Complement sets are enumerated lazily.
    pub fn iter(&self) -> Box<dyn Iterator<Item = NodePair> + '_> {
        match self {
            NegativeSet::Explicit(v) => Box::new(v.iter().copied()),
            NegativeSet::Complement { scope, exclude } => {
                Box::new(scope.iter().filter(move |p| exclude.binary_search(p).is_err()))
            }
        }
    }

    pub fn materialize(&self) -> Vec<NodePair> {
        let mut v: Vec<NodePair> = self.iter().collect();
        v.sort_unstable();
        v
    }

    /// Up to `k` distinct pairs drawn uniformly without replacement.
    pub fn sample(&self, k: usize, rng: &mut GelatoRng) -> Vec<NodePair> {
        let total = self.len();
        if k == 0 || total == 0 {
            return Vec::new();
        }
        if k >= total {
            return self.materialize();
        }
        match self {
            NegativeSet::Explicit(v) => rand::seq::index::sample(rng, v.len(), k).into_iter().map(|i| v[i]).collect(),
            NegativeSet::Complement { scope, .. } => {
                // rejection sampling while the set is a large share of its scope
                if total * 4 < scope.count() || k * 2 > total {
                    let all = self.materialize();
                    return rand::seq::index::sample(rng, all.len(), k).into_iter().map(|i| all[i]).collect();
                }
                let mut seen = HashSet::with_capacity(k);
                let mut out = Vec::with_capacity(k);
                while out.len() < k {
                    let p = scope.sample_one(rng).expect("non-empty scope");
                    if self.contains(p) && seen.insert(p) {
                        out.push(p);
                    }
                }
                out
            }
        }
    }
}

/// Positive and negative pair sets for training, validation and testing.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSet {
    pub regime: Regime,
    pub n: usize,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub train_pos: Vec<NodePair>,
    pub valid_pos: Vec<NodePair>,
    pub test_pos: Vec<NodePair>,
    pub train_neg: NegativeSet,
    pub valid_neg: NegativeSet,
    pub test_neg: NegativeSet,
}

impl SplitSet {
    /// Edges visible as structure during training: every edge of `g` except
    /// validation and test positives.
    pub fn training_edges(&self, g: &AttributedGraph) -> Vec<(NodePair, f64)> {
        let hidden: HashSet<NodePair> = self.valid_pos.iter().chain(&self.test_pos).copied().collect();
        g.adjacency().pairs().filter(|(p, _)| !hidden.contains(p)).collect()
    }

    pub fn training_graph(&self, g: &AttributedGraph) -> Result<AttributedGraph> {
        g.with_edges(&self.training_edges(g))
    }

    /// Edges visible when scoring the test split: everything except test positives.
    pub fn evaluation_edges(&self, g: &AttributedGraph) -> Vec<(NodePair, f64)> {
        let hidden: HashSet<NodePair> = self.test_pos.iter().copied().collect();
        g.adjacency().pairs().filter(|(p, _)| !hidden.contains(p)).collect()
    }

    /// Same positives and evaluation sets, but training negatives restricted
    /// to pairs inside the blocks of `part`.
    pub fn with_partitioned_training(&self, part: &Partitioning) -> Self {
        let scope = PairScope::within(part);
        let mut out = self.clone();
        out.train_neg = NegativeSet::complement(scope, self.train_pos.iter().copied());
        out
    }

    pub fn section(&self, name: &str) -> Option<SectionRef<'_>> {
        Some(match name {
            "train+" => SectionRef::Positive(&self.train_pos),
            "valid+" => SectionRef::Positive(&self.valid_pos),
            "test+" => SectionRef::Positive(&self.test_pos),
            "train-" => SectionRef::Negative(&self.train_neg),
            "valid-" => SectionRef::Negative(&self.valid_neg),
            "test-" => SectionRef::Negative(&self.test_neg),
            _ => return None,
        })
    }

    /// `(section, count)` rows in file order.
    pub fn counts(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("train+", self.train_pos.len()),
            ("train-", self.train_neg.len()),
            ("valid+", self.valid_pos.len()),
            ("valid-", self.valid_neg.len()),
            ("test+", self.test_pos.len()),
            ("test-", self.test_neg.len()),
        ]
    }
}

pub enum SectionRef<'a> {
    Positive(&'a [NodePair]),
    Negative(&'a NegativeSet),
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|&r| !(0.0..=1.0).contains(&r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(GelatoError::param(format!("ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    Ok(())
}

/// Largest-remainder sizes for `m` items.
pub fn split_sizes(m: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * m as f64).collect();
    let mut sizes = [0usize; 3];
    for i in 0..3 {
        sizes[i] = exact[i].floor() as usize;
    }
    let mut rest = m - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if rest == 0 {
            break;
        }
        sizes[i] += 1;
        rest -= 1;
    }
    sizes
}

fn split_positives(mut edges: Vec<NodePair>, ratios: [f64; 3], rng: &mut GelatoRng) -> [Vec<NodePair>; 3] {
    edges.sort_unstable();
    edges.shuffle(rng);
    let [a, b, _] = split_sizes(edges.len(), ratios);
    let test = edges.split_off(a + b);
    let valid = edges.split_off(a);
    let mut out = [edges, valid, test];
    for s in &mut out {
        s.sort_unstable();
    }
    out
}

fn complement_sets(scope: PairScope, pos: &[Vec<NodePair>; 3]) -> [NegativeSet; 3] {
    let train = NegativeSet::complement(scope.clone(), pos[0].iter().copied());
    let valid = NegativeSet::complement(scope.clone(), pos[0].iter().chain(&pos[1]).copied());
    let test = NegativeSet::complement(scope, pos.iter().flatten().copied());
    [train, valid, test]
}

/// Unbiased split: positives divided by `ratios`, negatives are complements.
pub fn unbiased_split(g: &AttributedGraph, ratios: [f64; 3], seed: u64) -> Result<SplitSet> {
    check_ratios(ratios)?;
    if g.m() < 20 {
        return Err(GelatoError::param(format!("need at least 20 edges to split, got {}", g.m())));
    }
    let mut rng = rng_indexed(seed, "split/positives", 0);
    let pos = split_positives(g.edges(), ratios, &mut rng);
    let [train_neg, valid_neg, test_neg] = complement_sets(PairScope::All { n: g.n() }, &pos);
    let [train_pos, valid_pos, test_pos] = pos;
    Ok(SplitSet {
        regime: Regime::Unbiased,
        n: g.n(),
        ratios,
        seed,
        train_pos,
        valid_pos,
        test_pos,
        train_neg,
        valid_neg,
        test_neg,
    })
}

/// Per-block unbiased split; cross-block pairs (edges included) appear in no set.
pub fn partitioned_split(g: &AttributedGraph, part: &Partitioning, ratios: [f64; 3], seed: u64) -> Result<SplitSet> {
    check_ratios(ratios)?;
    if part.assignment().len() != g.n() {
        return Err(GelatoError::Dimension {
            expected: g.n(),
            got: part.assignment().len(),
        });
    }
    let mut per_block: Vec<Vec<NodePair>> = vec![Vec::new(); part.k()];
    for e in g.edges() {
        if part.block_of(e.u) == part.block_of(e.v) {
            per_block[part.block_of(e.u)].push(e);
        }
    }
    let mut pos: [Vec<NodePair>; 3] = Default::default();
    for (b, edges) in per_block.into_iter().enumerate() {
        if part.block(b).len() < 2 {
            continue;
        }
        let mut rng = rng_indexed(seed, "split/positives", b as u64);
        let parts = split_positives(edges, ratios, &mut rng);
        for (dst, src) in pos.iter_mut().zip(parts) {
            dst.extend(src);
        }
    }
    for s in &mut pos {
        s.sort_unstable();
    }
    let [train_neg, valid_neg, test_neg] = complement_sets(PairScope::within(part), &pos);
    let [train_pos, valid_pos, test_pos] = pos;
    Ok(SplitSet {
        regime: Regime::Partitioned,
        n: g.n(),
        ratios,
        seed,
        train_pos,
        valid_pos,
        test_pos,
        train_neg,
        valid_neg,
        test_neg,
    })
}

/// Biased split: positives as in the unbiased split, negatives sampled
/// uniformly from the disconnected pairs, `round(neg_per_pos * |positives|)` per split.
pub fn biased_split(g: &AttributedGraph, ratios: [f64; 3], neg_per_pos: f64, seed: u64) -> Result<SplitSet> {
    if !(neg_per_pos > 0.0) {
        return Err(GelatoError::param("neg_per_pos must be positive"));
    }
    let base = unbiased_split(g, ratios, seed)?;
    let non_edges = base.test_neg.clone();
    let mut rng = rng_for(seed, "split/biased");
    let mut draw = |count: usize| -> Result<NegativeSet> {
        let want = (neg_per_pos * count as f64).round() as usize;
        if want > non_edges.len() {
            return Err(GelatoError::param(format!(
                "requested {want} negatives but only {} disconnected pairs exist",
                non_edges.len()
            )));
        }
        Ok(NegativeSet::explicit(non_edges.sample(want, &mut rng)))
    };
    let train_neg = draw(base.train_pos.len())?;
    let valid_neg = draw(base.valid_pos.len())?;
    let test_neg = draw(base.test_pos.len())?;
    Ok(SplitSet {
        regime: Regime::Biased,
        train_neg,
        valid_neg,
        test_neg,
        ..base
    })
}

/// Negative pair counts for partitioned sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NegativeCount {
    /// `sum_i |V_i|^2 - |E_i|` (ordered pairs, self-pairs included).
    pub literal: u64,
    /// `sum_i C(|V_i|, 2) - |E_i|`, the number of disconnected intra-block pairs.
    pub exact: u64,
}

pub fn negative_pair_count(part: &Partitioning, g: &AttributedGraph) -> Result<NegativeCount> {
    if part.assignment().len() != g.n() {
        return Err(GelatoError::Dimension {
            expected: g.n(),
            got: part.assignment().len(),
        });
    }
    let mut literal = 0u64;
    let mut exact = 0u64;
    for (size, &edges) in part.block_sizes().into_iter().zip(part.intra_edge_counts()) {
        literal += (size * size - edges) as u64;
        exact += (pair_count(size) - edges) as u64;
    }
    Ok(NegativeCount { literal, exact })
}

/// One training batch: its positives are hidden from the structure it sees.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedBatch {
    /// Sorted positives of this batch.
    pub positives: Vec<NodePair>,
}

impl MaskedBatch {
    pub fn masks(&self, p: NodePair) -> bool {
        self.positives.binary_search(&p).is_ok()
    }

    /// The structural edges with this batch's positives removed.
    pub fn residual(&self, edges: &[(NodePair, f64)]) -> Vec<(NodePair, f64)> {
        edges.iter().copied().filter(|(p, _)| !self.masks(*p)).collect()
    }
}

/// Shuffle the training positives and cut them into masked batches.
pub fn positive_mask_batches(split: &SplitSet, batch_size: usize, seed: u64) -> Result<Vec<MaskedBatch>> {
    if batch_size == 0 {
        return Err(GelatoError::param("batch_size must be at least 1"));
    }
    let mut order = split.train_pos.clone();
    order.shuffle(&mut rng_for(seed, "batches"));
    Ok(order
        .chunks(batch_size)
        .map(|c| {
            let mut positives = c.to_vec();
            positives.sort_unstable();
            MaskedBatch { positives }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Split files
// ---------------------------------------------------------------------------

const SECTIONS: [&str; 6] = ["train+", "train-", "valid+", "valid-", "test+", "test-"];

fn write_pairs(out: &mut String, pairs: impl Iterator<Item = NodePair>) {
    for p in pairs {
        out.push_str(&format!("{}\t{}\n", p.u, p.v));
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".{suffix}"));
    path.with_file_name(name)
}

/// Write a split file. Complement sections become `COMPLEMENT exclude=<file>`
/// directives with the exclusion list (and the block assignment, if any)
/// stored in sidecar files next to `path`.
pub fn save_split(split: &SplitSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# gelato split\n");
    out.push_str(&format!("regime\t{}\n", split.regime.tag()));
    out.push_str(&format!("n\t{}\n", split.n));
    out.push_str(&format!("seed\t{}\n", split.seed));
    out.push_str(&format!(
        "ratios\t{}\t{}\t{}\n",
        split.ratios[0], split.ratios[1], split.ratios[2]
    ));
    let mut wrote_blocks = false;
    for name in SECTIONS {
        out.push_str(&format!("[{name}]\n"));
        match split.section(name).unwrap() {
            SectionRef::Positive(p) => write_pairs(&mut out, p.iter().copied()),
            SectionRef::Negative(NegativeSet::Explicit(p)) => write_pairs(&mut out, p.iter().copied()),
            SectionRef::Negative(NegativeSet::Complement { scope, exclude }) => {
                let ex_path = sidecar(path, &format!("{name}.exclude"));
                let mut body = String::new();
                write_pairs(&mut body, exclude.iter().copied());
                fs::write(&ex_path, body).map_err(|e| GelatoError::io(&ex_path, e))?;
                let ex_name = ex_path.file_name().unwrap().to_string_lossy().to_string();
                match scope {
                    PairScope::All { .. } => out.push_str(&format!("COMPLEMENT exclude={ex_name}\n")),
                    PairScope::WithinBlocks { assign, .. } => {
                        let bp = sidecar(path, "blocks");
                        if !wrote_blocks {
                            let mut body = String::new();
                            for (u, b) in assign.iter().enumerate() {
                                body.push_str(&format!("{u}\t{b}\n"));
                            }
                            fs::write(&bp, body).map_err(|e| GelatoError::io(&bp, e))?;
                            wrote_blocks = true;
                        }
                        let bname = bp.file_name().unwrap().to_string_lossy().to_string();
                        out.push_str(&format!("COMPLEMENT exclude={ex_name} within={bname}\n"));
                    }
                }
            }
        }
    }
    fs::write(path, out).map_err(|e| GelatoError::io(path, e))
}

fn parse_pair_line(path: &Path, line_no: usize, line: &str) -> Result<NodePair> {
    let bad = |msg: String| GelatoError::Parse {
        path: path.display().to_string(),
        line: line_no,
        message: msg,
    };
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 2 {
        return Err(bad(format!("expected a node pair, got {line:?}")));
    }
    let a: usize = f[0].parse().map_err(|_| bad(format!("bad node id {:?}", f[0])))?;
    let b: usize = f[1].parse().map_err(|_| bad(format!("bad node id {:?}", f[1])))?;
    NodePair::new(a, b).map_err(|e| bad(e.to_string()))
}

/// Read a whitespace-separated pair list, skipping blank and `#` lines.
pub fn read_pair_file(path: &Path) -> Result<Vec<NodePair>> {
    let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_pair_line(path, i + 1, l))
        .collect()
}

fn read_blocks(path: &Path, n: usize) -> Result<PairScope> {
    let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
    let mut assign = vec![usize::MAX; n];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| GelatoError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: "expected \"node<TAB>block\"".into(),
            })?;
        if f.len() != 2 || f[0] >= n {
            return Err(GelatoError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: "expected \"node<TAB>block\" with node < n".into(),
            });
        }
        assign[f[0]] = f[1];
    }
    if assign.contains(&usize::MAX) {
        return Err(GelatoError::param(format!("{}: incomplete block assignment", path.display())));
    }
    let k = assign.iter().max().map_or(1, |m| m + 1);
    let mut blocks = vec![Vec::new(); k];
    for (u, &b) in assign.iter().enumerate() {
        blocks[b].push(u);
    }
    Ok(PairScope::WithinBlocks { assign, blocks })
}

pub fn load_split(path: &Path) -> Result<SplitSet> {
    let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let err = |line: usize, msg: String| GelatoError::Parse {
        path: path.display().to_string(),
        line,
        message: msg,
    };
    let mut regime = None;
    let mut n = None;
    let mut seed = 0u64;
    let mut ratios = DEFAULT_RATIOS;
    let mut section: Option<usize> = None;
    let mut pos: [Vec<NodePair>; 3] = Default::default();
    let mut explicit: [Vec<NodePair>; 3] = Default::default();
    let mut complement: [Option<NegativeSet>; 3] = Default::default();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            let name = line.trim_start_matches('[').trim_end_matches(']');
            section = Some(
                SECTIONS
                    .iter()
                    .position(|s| *s == name)
                    .ok_or_else(|| err(ln, format!("unknown section {name:?}")))?,
            );
            continue;
        }
        match section {
            None => {
                let f: Vec<&str> = line.split_whitespace().collect();
                match f.as_slice() {
                    ["regime", r] => regime = Some(Regime::parse(r).map_err(|e| err(ln, e.to_string()))?),
                    ["n", v] => n = Some(v.parse::<usize>().map_err(|_| err(ln, "bad n".into()))?),
                    ["seed", v] => seed = v.parse().map_err(|_| err(ln, "bad seed".into()))?,
                    ["ratios", a, b, c] => {
                        let p = |s: &str| s.parse::<f64>().map_err(|_| err(ln, "bad ratio".into()));
                        ratios = [p(a)?, p(b)?, p(c)?];
                    }
                    _ => return Err(err(ln, format!("unexpected header line {line:?}"))),
                }
            }
            Some(s) => {
                let idx = s / 2;
                if s % 2 == 0 {
                    pos[idx].push(parse_pair_line(path, ln, line)?);
                } else if let Some(rest) = line.strip_prefix("COMPLEMENT") {
                    let n = n.ok_or_else(|| err(ln, "n must precede sections".into()))?;
                    let mut exclude = None;
                    let mut scope = PairScope::All { n };
                    for tok in rest.split_whitespace() {
                        if let Some(f) = tok.strip_prefix("exclude=") {
                            exclude = Some(read_pair_file(&dir.join(f))?);
                        } else if let Some(f) = tok.strip_prefix("within=") {
                            scope = read_blocks(&dir.join(f), n)?;
                        } else {
                            return Err(err(ln, format!("unknown directive argument {tok:?}")));
                        }
                    }
                    complement[idx] = Some(NegativeSet::complement(scope, exclude.unwrap_or_default()));
                } else {
                    explicit[idx].push(parse_pair_line(path, ln, line)?);
                }
            }
        }
    }
    let regime = regime.ok_or_else(|| err(1, "missing regime".into()))?;
    let n = n.ok_or_else(|| err(1, "missing n".into()))?;
    let [c0, c1, c2] = complement;
    let [e0, e1, e2] = explicit;
    let neg = |c: Option<NegativeSet>, e: Vec<NodePair>| c.unwrap_or_else(|| NegativeSet::explicit(e));
    let [train_pos, valid_pos, test_pos] = pos;
    Ok(SplitSet {
        regime,
        n,
        ratios,
        seed,
        train_pos,
        valid_pos,
        test_pos,
        train_neg: neg(c0, e0),
        valid_neg: neg(c1, e1),
        test_neg: neg(c2, e2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{partition, PartitionConfig};
    use crate::sbm::{sample_sbm, SbmParams};

    fn cliques(count: usize, size: usize) -> AttributedGraph {
        let mut edges = Vec::new();
        for b in 0..count {
            for i in 0..size {
                for j in i + 1..size {
                    edges.push((b * size + i, b * size + j));
                }
            }
        }
        AttributedGraph::from_edges(count * size, &edges, None).unwrap()
    }

    #[test]
    fn sizes_largest_remainder() {
        assert_eq!(split_sizes(100, DEFAULT_RATIOS), [85, 5, 10]);
        assert_eq!(split_sizes(20, DEFAULT_RATIOS), [17, 1, 2]);
        for m in 0..200 {
            let s = split_sizes(m, DEFAULT_RATIOS);
            assert_eq!(s.iter().sum::<usize>(), m);
            for i in 0..3 {
                assert!((s[i] as f64 - DEFAULT_RATIOS[i] * m as f64).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn toy_counts() {
        // 10 nodes, 20 edges
        let mut edges = Vec::new();
        'outer: for u in 0..10 {
            for v in u + 1..10 {
                if edges.len() == 20 {
                    break 'outer;
                }
                edges.push((u, v));
            }
        }
        let g = AttributedGraph::from_edges(10, &edges, None).unwrap();
        let s = unbiased_split(&g, DEFAULT_RATIOS, 1).unwrap();
        assert_eq!(s.test_neg.len(), 45 - 20);
        assert_eq!(s.train_neg.len(), 25 + s.valid_pos.len() + s.test_pos.len());
        assert_eq!(s.valid_neg.len(), 25 + s.test_pos.len());
    }

    #[test]
    fn too_few_edges_and_bad_ratios() {
        let g = cliques(1, 5);
        assert!(unbiased_split(&g, DEFAULT_RATIOS, 0).is_err());
        let g = cliques(1, 8);
        assert!(unbiased_split(&g, [0.5, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn invariants_hold() {
        let g = sample_sbm(SbmParams::new(3, 20, 0.3, 0.05).unwrap(), 3, None).unwrap();
        let s = unbiased_split(&g, DEFAULT_RATIOS, 5).unwrap();
        let all: HashSet<NodePair> = s.train_pos.iter().chain(&s.valid_pos).chain(&s.test_pos).copied().collect();
        assert_eq!(all.len(), g.m());
        assert_eq!(all, g.edges().into_iter().collect());
        for p in s.valid_pos.iter().chain(&s.test_pos) {
            assert!(s.train_neg.contains(*p));
        }
        for p in &s.test_pos {
            assert!(s.valid_neg.contains(*p));
        }
        for e in g.edges() {
            assert!(!s.test_neg.contains(e));
        }
        for p in &s.train_pos {
            assert!(!s.train_neg.contains(*p));
        }
        let train_graph = s.training_graph(&g).unwrap();
        for p in s.test_pos.iter().chain(&s.valid_pos) {
            assert!(!train_graph.has_edge(*p));
        }
    }

    #[test]
    fn partitioned_single_block_equals_unbiased() {
        let g = sample_sbm(SbmParams::new(2, 20, 0.3, 0.05).unwrap(), 8, None).unwrap();
        let part = Partitioning::single(&g);
        let a = unbiased_split(&g, DEFAULT_RATIOS, 2).unwrap();
        let b = partitioned_split(&g, &part, DEFAULT_RATIOS, 2).unwrap();
        assert_eq!(b.regime, Regime::Partitioned);
        assert_eq!(SplitSet { regime: Regime::Unbiased, ..b }, a);
    }

    #[test]
    fn partitioned_cliques_have_no_negatives() {
        let g = cliques(2, 5);
        let part = Partitioning::from_assignment(&g, (0..10).map(|u| u / 5).collect(), 2).unwrap();
        let s = partitioned_split(&g, &part, DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(s.test_neg.len(), 0);
        assert_eq!(negative_pair_count(&part, &g).unwrap().exact, 0);
    }

    #[test]
    fn partitioned_counts_match_enumeration() {
        let params = SbmParams::new(4, 25, 0.3, 0.02).unwrap();
        let g = sample_sbm(params, 1, None).unwrap();
        let part = partition(&g, 4, 1, &PartitionConfig::default()).unwrap();
        let s = partitioned_split(&g, &part, DEFAULT_RATIOS, 3).unwrap();
        let mut brute = 0;
        for u in 0..g.n() {
            for v in u + 1..g.n() {
                if part.block_of(u) == part.block_of(v) && !g.has_edge(NodePair { u, v }) {
                    brute += 1;
                }
            }
        }
        assert_eq!(s.test_neg.len(), brute);
        assert_eq!(negative_pair_count(&part, &g).unwrap().exact as usize, brute);
        // containment in the unbiased negatives
        let u = unbiased_split(&g, DEFAULT_RATIOS, 3).unwrap();
        for p in s.test_neg.iter() {
            assert!(u.test_neg.contains(p));
            assert_eq!(part.block_of(p.u), part.block_of(p.v));
        }
        // cross-block edges are in no set
        for e in g.edges() {
            if part.block_of(e.u) != part.block_of(e.v) {
                assert!(!s.train_pos.contains(&e) && !s.valid_pos.contains(&e) && !s.test_pos.contains(&e));
            }
        }
    }

    #[test]
    fn negative_count_forms() {
        // one block of 4 nodes with 2 edges
        let g = AttributedGraph::from_edges(4, &[(0, 1), (2, 3)], None).unwrap();
        let c = negative_pair_count(&Partitioning::single(&g), &g).unwrap();
        assert_eq!((c.literal, c.exact), (14, 4));
        let singletons = Partitioning::from_assignment(&g, vec![0, 1, 2, 3], 4).unwrap();
        assert_eq!(negative_pair_count(&singletons, &g).unwrap().exact, 0);
        let tri = cliques(2, 3);
        let part = Partitioning::from_assignment(&tri, vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        assert_eq!(negative_pair_count(&part, &tri).unwrap().exact, 0);
    }

    #[test]
    fn biased_counts_and_determinism() {
        let g = sample_sbm(SbmParams::new(2, 20, 0.3, 0.05).unwrap(), 4, None).unwrap();
        let a = biased_split(&g, DEFAULT_RATIOS, 1.0, 9).unwrap();
        assert_eq!(a.test_neg.len(), a.test_pos.len());
        assert_eq!(a.train_neg.len(), a.train_pos.len());
        for p in a.test_neg.iter() {
            assert!(!g.has_edge(p));
        }
        assert_eq!(a, biased_split(&g, DEFAULT_RATIOS, 1.0, 9).unwrap());
        assert!(biased_split(&g, DEFAULT_RATIOS, 0.0, 9).is_err());
    }

    #[test]
    fn biased_infeasible() {
        // K8 minus three edges: 25 edges, 3 non-edges, test+ has 3 pairs... request 4x
        let mut edges = Vec::new();
        for u in 0..8 {
            for v in u + 1..8 {
                edges.push((u, v));
            }
        }
        edges.truncate(25);
        let g = AttributedGraph::from_edges(8, &edges, None).unwrap();
        assert!(matches!(biased_split(&g, DEFAULT_RATIOS, 4.0, 0), Err(GelatoError::Parameter(_))));
    }

    #[test]
    fn batches_partition_train_positives() {
        let g = sample_sbm(SbmParams::new(2, 15, 0.4, 0.05).unwrap(), 2, None).unwrap();
        let s = unbiased_split(&g, DEFAULT_RATIOS, 1).unwrap();
        let edges = s.training_edges(&g);
        for bs in [1, 7, s.train_pos.len(), s.train_pos.len() + 10] {
            let batches = positive_mask_batches(&s, bs, 3).unwrap();
            let mut union: Vec<NodePair> = batches.iter().flat_map(|b| b.positives.clone()).collect();
            union.sort_unstable();
            assert_eq!(union, s.train_pos);
            if bs >= s.train_pos.len() {
                assert_eq!(batches.len(), 1);
            }
            if bs == 1 {
                assert_eq!(batches.len(), s.train_pos.len());
            }
            for b in &batches {
                let residual = b.residual(&edges);
                assert_eq!(residual.len(), edges.len() - b.positives.len());
                assert!(residual.iter().all(|(p, _)| !b.masks(*p)));
            }
        }
        assert!(positive_mask_batches(&s, 0, 0).is_err());
    }

    #[test]
    fn sampling_is_uniform_enough_and_valid() {
        let g = sample_sbm(SbmParams::new(2, 20, 0.3, 0.05).unwrap(), 4, None).unwrap();
        let s = unbiased_split(&g, DEFAULT_RATIOS, 1).unwrap();
        let mut rng = rng_for(1, "t");
        let sample = s.train_neg.sample(50, &mut rng);
        assert_eq!(sample.len(), 50);
        assert_eq!(sample.iter().collect::<HashSet<_>>().len(), 50);
        assert!(sample.iter().all(|p| s.train_neg.contains(*p)));
    }

    #[test]
    fn split_file_roundtrip() {
        let g = sample_sbm(SbmParams::new(3, 12, 0.4, 0.05).unwrap(), 4, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let part = partition(&g, 3, 0, &PartitionConfig::default()).unwrap();
        let splits = vec![
            unbiased_split(&g, DEFAULT_RATIOS, 1).unwrap(),
            biased_split(&g, DEFAULT_RATIOS, 2.0, 1).unwrap(),
            partitioned_split(&g, &part, DEFAULT_RATIOS, 1).unwrap(),
        ];
        for (i, s) in splits.iter().enumerate() {
            let path = dir.path().join(format!("split{i}.txt"));
            save_split(s, &path).unwrap();
            let back = load_split(&path).unwrap();
            assert_eq!(&back, s);
        }
    }
}
