//! End-to-end training of the edge-weight network.
//!
//! A forward pass builds the enhanced graph from the (positive-masked)
//! training structure, propagates a block of walk rows `t` steps through the
//! transition matrix, gathers Autocovariance scores for the batch pairs,
//! standardizes them and applies the N-pair loss. The backward pass runs the
//! same chain in reverse by hand:
//!
//! ```text
//! loss -> standardization -> R_B -> (P_t, d, vol) -> ... -> P_1 -> T -> Ã -> w -> θ
//! ```
//!
//! Each step back through the walk is `dP_{l-1} = dP_l Tᵀ` with
//! `dT_ij += Σ_b P_{l-1}[b,i] dP_l[b,j]` restricted to the stored entries
//! of `T`, so memory stays at `O(|B| n)` per step.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::Rng;
use ndarray::Array2;
use rayon::prelude::*;

use crate::enhancer::{augmentation_count, augmentation_pairs, combine, EdgeNet, EnhancedGraph, PairMode, DEFAULT_HIDDEN};
use crate::error::{GelatoError, Result};
use crate::graph::{AttributedGraph, NodePair};
use crate::heuristics::{autocovariance_pairs, walk_blocks};
use crate::metrics::precision_at_full_recall;
use crate::rng::{derive_indexed, rng_for, rng_indexed};
use crate::splits::{positive_mask_batches, Regime, SplitSet};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub t: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Contrast negatives drawn per positive.
    pub contrast: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub hidden: usize,
    pub mode: PairMode,
    /// Source rows per block when scoring many pairs.
    pub block_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            dropout: 0.5,
            t: 3,
            epochs: 20,
            batch_size: 256,
            contrast: 50,
            seed: 0,
            alpha: 0.5,
            beta: 0.5,
            eta: 0.0,
            hidden: DEFAULT_HIDDEN,
            mode: PairMode::Undirected,
            block_size: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr must be positive, got {}", self.lr));
        }
        if self.t == 0 {
            problems.push("t must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        for (name, x) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&x) {
                problems.push(format!("{name} must be in [0, 1], got {x}"));
            }
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            problems.push(format!("eta must be non-negative, got {}", self.eta));
        }
        if self.batch_size == 0 || self.contrast == 0 || self.hidden == 0 || self.block_size == 0 {
            problems.push("batch_size, contrast, hidden and block_size must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GelatoError::Config(problems))
        }
    }
}

/// Network parameters plus the combination hyperparameters they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub net: EdgeNet,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub t: usize,
}

impl ModelState {
    pub fn new(r: usize, config: &TrainConfig) -> Result<Self> {
        Ok(ModelState {
            net: EdgeNet::new(r, config.hidden, config.mode, config.dropout, derive_indexed(config.seed, "init", 0))?,
            alpha: config.alpha,
            beta: config.beta,
            eta: config.eta,
            t: config.t,
        })
    }

    /// Eval-mode enhanced graph over `structure`.
    pub fn enhanced(&self, structure: &AttributedGraph) -> Result<EnhancedGraph> {
        let added = if self.eta > 0.0 {
            augmentation_pairs(structure, augmentation_count(structure.m(), self.eta))?
        } else {
            Vec::new()
        };
        let tilde = tilde_pairs(structure, &[], &added);
        let w = self.edge_weights(structure, &tilde, false, 0);
        combine(structure, &tilde, &w, self.alpha, self.beta, self.eta)
    }

    fn edge_weights(&self, structure: &AttributedGraph, tilde: &[NodePair], train: bool, seed: u64) -> Vec<f64> {
        if structure.attr_dim() == 0 {
            vec![0.0; tilde.len()]
        } else {
            self.net.forward_pairs(structure.attributes(), tilde, train, seed)
        }
    }

    /// Raw (unstandardized) Autocovariance scores on the enhanced graph.
    pub fn score_pairs(&self, structure: &AttributedGraph, pairs: &[NodePair], block_size: usize) -> Result<Vec<f64>> {
        let (adj, _) = self.enhanced(structure)?.adjacency_with_loops();
        autocovariance_pairs(&adj, self.t, pairs, block_size)
    }

    pub fn save(&self, path: &Path, selection: f64) -> Result<()> {
        let mut out = String::from("gelato-model 1\n");
        let _ = writeln!(out, "mode {}", self.net.mode.tag());
        let _ = writeln!(out, "r {}", self.net.r);
        let _ = writeln!(out, "hidden {}", self.net.hidden);
        let _ = writeln!(out, "dropout {}", self.net.dropout);
        let _ = writeln!(out, "alpha {}", self.alpha);
        let _ = writeln!(out, "beta {}", self.beta);
        let _ = writeln!(out, "eta {}", self.eta);
        let _ = writeln!(out, "t {}", self.t);
        let _ = writeln!(out, "selection {selection}");
        let _ = writeln!(out, "theta {}", self.net.theta.len());
        for x in &self.net.theta {
            let _ = writeln!(out, "{x}");
        }
        fs::write(path, out).map_err(|e| GelatoError::io(path, e))
    }

    /// Load a checkpoint; returns the model and its selection metric.
    pub fn load(path: &Path) -> Result<(Self, f64)> {
        let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
        let bad = |line: usize, message: String| GelatoError::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "gelato-model 1")) => {}
            _ => return Err(bad(1, "not a version-1 model checkpoint".into())),
        }
        let mut fields: HashMap<&str, &str> = HashMap::new();
        let mut theta = Vec::new();
        let mut expected = None;
        for (i, line) in lines {
            if let Some(count) = expected {
                if theta.len() < count {
                    theta.push(line.trim().parse::<f64>().map_err(|_| bad(i + 1, format!("bad parameter {line:?}")))?);
                    continue;
                }
            }
            let (k, v) = line.split_once(' ').ok_or_else(|| bad(i + 1, format!("bad line {line:?}")))?;
            if k == "theta" {
                expected = Some(v.parse::<usize>().map_err(|_| bad(i + 1, "bad parameter count".into()))?);
            } else {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(0, format!("missing field {k}")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(0, format!("bad value for {k}"))) };
        let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(0, format!("bad value for {k}"))) };
        let mut net = EdgeNet::zeros(int("r")?, int("hidden")?, PairMode::parse(get("mode")?)?, num("dropout")?)?;
        if theta.len() != net.theta.len() {
            return Err(GelatoError::Dimension {
                expected: net.theta.len(),
                got: theta.len(),
            });
        }
        net.theta = theta;
        let model = ModelState {
            net,
            alpha: num("alpha")?,
            beta: num("beta")?,
            eta: num("eta")?,
            t: int("t")?,
        };
        Ok((model, num("selection")?))
    }
}

/// Structural edges minus `masked`, then the augmented pairs.
fn tilde_pairs(structure: &AttributedGraph, masked: &[NodePair], added: &[NodePair]) -> Vec<NodePair> {
    let mut out: Vec<NodePair> = structure
        .edges()
        .into_iter()
        .filter(|p| masked.binary_search(p).is_err())
        .collect();
    out.extend_from_slice(added);
    out
}

/// N-pair loss `-Σ log(exp(z_pos) / (exp(z_pos) + Σ exp(z_neg)))`.
pub fn npair_loss(pos: &[f64], negs: &[Vec<f64>]) -> f64 {
    if pos.is_empty() {
        warn!("N-pair loss over an empty positive set");
        return 0.0;
    }
    assert_eq!(pos.len(), negs.len(), "one contrast set per positive");
    pos.iter().zip(negs).map(|(&p, n)| logsumexp(p, n) - p).sum()
}

fn logsumexp(first: f64, rest: &[f64]) -> f64 {
    let m = rest.iter().copied().fold(first, f64::max);
    let s: f64 = (first - m).exp() + rest.iter().map(|x| (x - m).exp()).sum::<f64>();
    m + s.ln()
}

/// Batch pairs laid out as `[pos_0, negs_0.., pos_1, negs_1.., ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastBatch {
    pub pairs: Vec<NodePair>,
    /// `(start, negatives)`: the positive sits at `start`, its negatives follow.
    pub groups: Vec<(usize, usize)>,
}

impl ContrastBatch {
    pub fn new(positives: &[NodePair], negatives: &[Vec<NodePair>]) -> Result<Self> {
        if positives.len() != negatives.len() {
            return Err(GelatoError::Dimension {
                expected: positives.len(),
                got: negatives.len(),
            });
        }
        let mut pairs = Vec::new();
        let mut groups = Vec::new();
        for (p, negs) in positives.iter().zip(negatives) {
            if negs.is_empty() {
                return Err(GelatoError::param(format!("positive {p} has no contrast negatives")));
            }
            groups.push((pairs.len(), negs.len()));
            pairs.push(*p);
            pairs.extend_from_slice(negs);
        }
        Ok(ContrastBatch { pairs, groups })
    }

    pub fn positives(&self) -> Vec<NodePair> {
        let mut v: Vec<NodePair> = self.groups.iter().map(|&(s, _)| self.pairs[s]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Everything the backward pass needs from a forward pass.
pub struct Forward {
    pub tilde: Vec<NodePair>,
    pub enhanced: EnhancedGraph,
    /// Raw gathered scores.
    pub raw: Vec<f64>,
    /// Standardized scores (equal to `raw` when standardization was skipped).
    pub scores: Vec<f64>,
    pub standardized: bool,
    pub sigma: f64,
    adj: crate::graph::Adjacency,
    source: Vec<Option<usize>>,
    d: Vec<f64>,
    vol: f64,
    trans: crate::graph::Adjacency,
    rows: Vec<usize>,
    row_of: HashMap<usize, usize>,
    walks: Vec<Array2<f64>>,
}

/// Context shared by every batch of a training run.
pub struct TrainingGraph<'a> {
    pub structure: &'a AttributedGraph,
    pub added: Vec<NodePair>,
}

impl<'a> TrainingGraph<'a> {
    pub fn new(structure: &'a AttributedGraph, eta: f64) -> Result<Self> {
        let added = if eta > 0.0 {
            augmentation_pairs(structure, augmentation_count(structure.m(), eta))?
        } else {
            Vec::new()
        };
        Ok(TrainingGraph { structure, added })
    }
}

/// Forward pass for `pairs` with the batch positives `masked` removed from
/// the structure. Dropout is active when `train` is set.
pub fn forward_scores(
    model: &ModelState,
    ctx: &TrainingGraph,
    masked: &[NodePair],
    pairs: &[NodePair],
    train: bool,
    seed: u64,
) -> Result<Forward> {
    let mut masked = masked.to_vec();
    masked.sort_unstable();
    let tilde = tilde_pairs(ctx.structure, &masked, &ctx.added);
    let w = model.edge_weights(ctx.structure, &tilde, train, seed);
    let enhanced = combine(ctx.structure, &tilde, &w, model.alpha, model.beta, model.eta)?;
    let (adj, source) = enhanced.adjacency_with_loops();
    let deg = adj.degrees();
    let trans = adj.transition()?;
    let mut rows: Vec<usize> = pairs.iter().map(|p| p.u).collect();
    rows.sort_unstable();
    rows.dedup();
    if let Some(p) = pairs.iter().find(|p| p.v >= adj.n()) {
        return Err(GelatoError::Range { node: p.v, n: adj.n() });
    }
    let row_of: HashMap<usize, usize> = rows.iter().enumerate().map(|(b, &u)| (u, b)).collect();
    let walks = walk_blocks(&trans, &rows, model.t);
    let top = walks.last().unwrap();
    let (d, vol) = (deg.d, deg.vol);
    let raw: Vec<f64> = pairs
        .iter()
        .map(|p| d[p.u] / vol * top[[row_of[&p.u], p.v]] - d[p.u] * d[p.v] / (vol * vol))
        .collect();
    let (scores, standardized, sigma) = standardize(&raw);
    Ok(Forward {
        tilde,
        enhanced,
        raw,
        scores,
        standardized,
        sigma,
        adj,
        source,
        d,
        vol,
        trans,
        rows,
        row_of,
        walks,
    })
}

/// Subtract the mean and divide by the population standard deviation.
/// Skipped (with a warning) when the scores have no spread.
fn standardize(raw: &[f64]) -> (Vec<f64>, bool, f64) {
    let n = raw.len() as f64;
    if raw.is_empty() {
        return (Vec::new(), false, 0.0);
    }
    let mu = raw.iter().sum::<f64>() / n;
    let sigma = (raw.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
    let scale = raw.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(sigma > 1e-12 * scale) {
        warn!("scores have no spread; standardization skipped for this batch");
        return (raw.to_vec(), false, 0.0);
    }
    (raw.iter().map(|x| (x - mu) / sigma).collect(), true, sigma)
}

/// Loss over a contrast batch and its gradient with respect to the scores.
fn contrast_loss(scores: &[f64], groups: &[(usize, usize)]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; scores.len()];
    let mut loss = 0.0;
    for &(s, k) in groups {
        let z = &scores[s..=s + k];
        let lse = logsumexp(z[0], &z[1..]);
        loss += lse - z[0];
        for (j, &x) in z.iter().enumerate() {
            grad[s + j] += (x - lse).exp();
        }
        grad[s] -= 1.0;
    }
    (loss, grad)
}

/// Per-parameter gradient accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    pub values: Vec<f64>,
    pub valid: bool,
}

impl GradientBuffer {
    pub fn zeros(len: usize) -> Self {
        GradientBuffer {
            values: vec![0.0; len],
            valid: true,
        }
    }

    fn seal(mut self) -> Self {
        self.valid = self.values.iter().all(|x| x.is_finite());
        self
    }
}

/// Batch loss and its exact gradient with respect to the network parameters.
pub fn loss_and_gradient(
    model: &ModelState,
    ctx: &TrainingGraph,
    batch: &ContrastBatch,
    seed: u64,
) -> Result<(f64, GradientBuffer)> {
    let masked = batch.positives();
    let fwd = forward_scores(model, ctx, &masked, &batch.pairs, true, seed)?;
    let (loss, g_scores) = contrast_loss(&fwd.scores, &batch.groups);
    let mut buffer = GradientBuffer::zeros(model.net.param_count());
    let coef = (1.0 - fwd.enhanced.alpha) * fwd.enhanced.beta;
    if coef == 0.0 || ctx.structure.attr_dim() == 0 {
        return Ok((loss, buffer.seal()));
    }
    let g_raw = standardize_backward(&fwd, &g_scores);
    let d_tilde = weight_adjoints(&fwd, &batch.pairs, &g_raw, model.t);
    let dw: Vec<f64> = (0..fwd.tilde.len())
        .map(|e| if fwd.enhanced.is_floored(e) { 0.0 } else { coef * d_tilde[e] })
        .collect();
    model
        .net
        .backward_pairs(ctx.structure.attributes(), &fwd.tilde, true, seed, &dw, &mut buffer.values);
    Ok((loss, buffer.seal()))
}

fn standardize_backward(fwd: &Forward, g: &[f64]) -> Vec<f64> {
    if !fwd.standardized {
        return g.to_vec();
    }
    let n = g.len() as f64;
    let mean_g = g.iter().sum::<f64>() / n;
    let mean_gz = g.iter().zip(&fwd.scores).map(|(a, z)| a * z).sum::<f64>() / n;
    g.iter()
        .zip(&fwd.scores)
        .map(|(gi, zi)| (gi - mean_g - zi * mean_gz) / fwd.sigma)
        .collect()
}

/// Adjoint of every enhanced pair weight given the adjoints of the raw scores.
fn weight_adjoints(fwd: &Forward, pairs: &[NodePair], g_raw: &[f64], t: usize) -> Vec<f64> {
    let n = fwd.adj.n();
    let nb = fwd.rows.len();
    let (d, vol) = (&fwd.d, fwd.vol);
    let top = fwd.walks.last().unwrap();
    let mut dd = vec![0.0; n];
    let mut dvol = 0.0;
    // transposed layout: row i holds column i of the |B| x n block
    let mut gt = Array2::<f64>::zeros((n, nb));
    for (p, &g) in pairs.iter().zip(g_raw) {
        let b = fwd.row_of[&p.u];
        let pv = top[[b, p.v]];
        gt[[p.v, b]] += g * d[p.u] / vol;
        dd[p.u] += g * (pv / vol - d[p.v] / (vol * vol));
        dd[p.v] -= g * d[p.u] / (vol * vol);
        dvol += g * (-d[p.u] * pv / (vol * vol) + 2.0 * d[p.u] * d[p.v] / (vol * vol * vol));
    }

    let trans = &fwd.trans;
    let (indptr, indices, tw) = (trans.indptr(), trans.indices(), trans.weights());
    let slot_row: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, indptr[i + 1] - indptr[i])).collect();
    let mut dt = vec![0.0; trans.nnz()];
    for l in (2..=t).rev() {
        let pt = fwd.walks[l - 2].t().as_standard_layout().to_owned();
        let contrib: Vec<f64> = (0..dt.len())
            .into_par_iter()
            .map(|s| pt.row(slot_row[s]).dot(&gt.row(indices[s])))
            .collect();
        for (a, c) in dt.iter_mut().zip(contrib) {
            *a += c;
        }
        let mut next = Array2::<f64>::zeros((n, nb));
        next.axis_iter_mut(ndarray::Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut out)| {
                for s in indptr[i]..indptr[i + 1] {
                    out.scaled_add(tw[s], &gt.row(indices[s]));
                }
            });
        gt = next;
    }
    // P_1 is the batch rows of T itself
    for (b, &u) in fwd.rows.iter().enumerate() {
        for s in indptr[u]..indptr[u + 1] {
            dt[s] += gt[[indices[s], b]];
        }
    }

    // T = D^-1 Ã, d = row sums of Ã, vol = Σ d
    let mut da = vec![0.0; dt.len()];
    for i in 0..n {
        for s in indptr[i]..indptr[i + 1] {
            da[s] = dt[s] / d[i];
            dd[i] -= dt[s] * tw[s] / d[i];
        }
    }
    for i in 0..n {
        let total = dd[i] + dvol;
        for a in &mut da[indptr[i]..indptr[i + 1]] {
            *a += total;
        }
    }
    let mut out = vec![0.0; fwd.tilde.len()];
    for (s, src) in fwd.source.iter().enumerate() {
        if let Some(e) = src {
            out[*e] += da[s];
        }
    }
    out
}

/// First and second moment estimates for Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Invalid gradients leave everything
/// untouched; returns whether the update was applied.
pub fn adam_step(params: &mut [f64], grads: &GradientBuffer, state: &mut AdamState, lr: f64) -> bool {
    assert_eq!(params.len(), grads.values.len());
    assert_eq!(params.len(), state.m.len());
    if !grads.valid {
        return false;
    }
    state.step += 1;
    let c1 = 1.0 - state.beta1.powi(state.step as i32);
    let c2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads.values[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (vhat.sqrt() + state.eps);
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss per positive.
    pub loss: f64,
    pub val_prec: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ModelState,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
    pub skipped_updates: usize,
}

pub fn history_tsv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch\tloss\tval_prec\n");
    for r in history {
        let _ = writeln!(out, "{}\t{}\t{}", r.epoch, r.loss, r.val_prec);
    }
    out
}

/// prec@100% of `model` on the validation split, scored on the training structure.
pub fn validation_precision(model: &ModelState, structure: &AttributedGraph, split: &SplitSet, block_size: usize) -> Result<f64> {
    let neg: Vec<NodePair> = split.valid_neg.iter().collect();
    let mut pairs = split.valid_pos.clone();
    pairs.extend_from_slice(&neg);
    let scores = model.score_pairs(structure, &pairs, block_size)?;
    let (pos, neg) = scores.split_at(split.valid_pos.len());
    precision_at_full_recall(pos, neg)
}

/// Loss as a function of the parameters with everything else frozen.
fn frozen_loss(model: &ModelState, ctx: &TrainingGraph, batch: &ContrastBatch, seed: u64) -> Result<(f64, Vec<bool>)> {
    let fwd = forward_scores(model, ctx, &batch.positives(), &batch.pairs, true, seed)?;
    let floored = (0..fwd.tilde.len()).map(|e| fwd.enhanced.is_floored(e)).collect();
    Ok((contrast_loss(&fwd.scores, &batch.groups).0, floored))
}

fn relu_pattern(model: &ModelState, ctx: &TrainingGraph, masked: &[NodePair], seed: u64) -> Vec<bool> {
    let mut masked = masked.to_vec();
    masked.sort_unstable();
    let tilde = tilde_pairs(ctx.structure, &masked, &ctx.added);
    tilde
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            let s = derive_indexed(seed, "pair", i as u64);
            model.net.preactivation_signs(ctx.structure.attributes().row(p.u), ctx.structure.attributes().row(p.v), true, s)
        })
        .collect()
}


/// Result of comparing the analytic gradient with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub checked: usize,
    /// Coordinates skipped because a ReLU or weight-floor kink fell inside the stencil.
    pub skipped: usize,
    pub max_rel_error: f64,
}

/// Central-difference check of `loss_and_gradient` on `coords` distinct
/// parameters chosen by `pick_seed`, with dropout masks frozen by `seed`.
/// Relative error uses a floor of 1e-6 on the denominator.
pub fn check_gradient(
    model: &ModelState,
    ctx: &TrainingGraph,
    batch: &ContrastBatch,
    seed: u64,
    coords: usize,
    h: f64,
    pick_seed: u64,
) -> Result<GradientCheck> {
    let (_, grad) = loss_and_gradient(model, ctx, batch, seed)?;
    if !grad.valid {
        return Err(GelatoError::param("gradient is not finite"));
    }
    let count = model.net.param_count();
    let mut rng = rng_for(pick_seed, "gradient-check");
    let mut seen = std::collections::HashSet::new();
    let masked = batch.positives();
    let mut report = GradientCheck {
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
    };
    while report.checked < coords && seen.len() < count {
        let i = rng.random_range(0..count);
        if !seen.insert(i) {
            continue;
        }
        let mut plus = model.clone();
        plus.net.theta[i] += h;
        let mut minus = model.clone();
        minus.net.theta[i] -= h;
        let (lp, fp) = frozen_loss(&plus, ctx, batch, seed)?;
        let (lm, fm) = frozen_loss(&minus, ctx, batch, seed)?;
        if fp != fm || relu_pattern(&plus, ctx, &masked, seed) != relu_pattern(&minus, ctx, &masked, seed) {
            report.skipped += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * h);
        let an = grad.values[i];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

/// One N-pair group per positive, each with `k` negatives drawn from the training pool.
pub fn contrast_batch(split: &SplitSet, positives: &[NodePair], k: usize, rng: &mut crate::rng::GelatoRng) -> Result<ContrastBatch> {
    let negs: Vec<Vec<NodePair>> = positives.iter().map(|_| split.train_neg.sample(k, rng)).collect();
    ContrastBatch::new(positives, &negs)
}

/// Train with positive masking and keep the parameters with the best
/// validation prec@100% (epoch 0 is the untrained model).
pub fn train(g: &AttributedGraph, split: &SplitSet, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if split.regime == Regime::Biased {
        return Err(GelatoError::param("training needs an unbiased or partitioned split"));
    }
    if g.attr_dim() == 0 && (config.beta > 0.0 && config.alpha < 1.0 || config.eta > 0.0) {
        return Err(GelatoError::AttributeRequired("training with beta > 0 or eta > 0"));
    }
    if split.train_neg.is_empty() {
        return Err(GelatoError::param("split has no training negatives"));
    }
    let structure = split.training_graph(g)?;
    let ctx = TrainingGraph::new(&structure, config.eta)?;
    let mut model = ModelState::new(g.attr_dim(), config)?;
    let mut adam = AdamState::new(model.net.param_count());
    let n_pos = split.train_pos.len().max(1) as f64;

    let epoch_batches = |epoch: usize| positive_mask_batches(split, config.batch_size, derive_indexed(config.seed, "epoch", epoch as u64));

    // epoch 0: forward-only loss of the untrained model
    let mut loss0 = 0.0;
    let mut rng = rng_indexed(config.seed, "contrast", 0);
    for (bi, batch) in epoch_batches(0)?.iter().enumerate() {
        let cb = contrast_batch(split, &batch.positives, config.contrast, &mut rng)?;
        let seed = derive_indexed(derive_indexed(config.seed, "dropout", 0), "batch", bi as u64);
        let fwd = forward_scores(&model, &ctx, &batch.positives, &cb.pairs, true, seed)?;
        loss0 += contrast_loss(&fwd.scores, &cb.groups).0;
    }
    let val0 = validation_precision(&model, &structure, split, config.block_size)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        loss: loss0 / n_pos,
        val_prec: val0,
    }];
    let mut best = (model.clone(), 0usize, val0);
    let mut skipped = 0;

    for epoch in 1..=config.epochs {
        let mut rng = rng_indexed(config.seed, "contrast", epoch as u64);
        let mut total = 0.0;
        for (bi, batch) in epoch_batches(epoch)?.iter().enumerate() {
            let cb = contrast_batch(split, &batch.positives, config.contrast, &mut rng)?;
            let seed = derive_indexed(derive_indexed(config.seed, "dropout", epoch as u64), "batch", bi as u64);
            let (loss, grad) = loss_and_gradient(&model, &ctx, &cb, seed)?;
            total += loss;
            if !adam_step(&mut model.net.theta, &grad, &mut adam, config.lr) {
                warn!("epoch {epoch} batch {bi}: non-finite gradient, update skipped");
                skipped += 1;
            }
        }
        let val = validation_precision(&model, &structure, split, config.block_size)?;
        info!("epoch {epoch}: loss {:.6} val prec@100% {val:.6}", total / n_pos);
        history.push(EpochRecord {
            epoch,
            loss: total / n_pos,
            val_prec: val,
        });
        if val > best.2 {
            best = (model.clone(), epoch, val);
        }
    }
    Ok(TrainOutcome {
        model: best.0,
        history,
        best_epoch: best.1,
        best_val: best.2,
        skipped_updates: skipped,
    })
}

/// Hyperparameter grids for the combination weights and augmentation ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            alpha: vec![0.0, 0.25, 0.5, 0.75],
            beta: vec![0.25, 0.5, 0.75, 1.0],
            eta: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub best_val: f64,
    pub best_epoch: usize,
}

/// Train every grid cell from scratch; returns all cells and the outcome
/// of the best one (first cell wins ties).
pub fn grid_search(g: &AttributedGraph, split: &SplitSet, base: &TrainConfig, grid: &Grid) -> Result<(Vec<GridCell>, TrainOutcome)> {
    let mut cells = Vec::new();
    let mut best: Option<TrainOutcome> = None;
    for &alpha in &grid.alpha {
        for &beta in &grid.beta {
            for &eta in &grid.eta {
                let config = TrainConfig {
                    alpha,
                    beta,
                    eta,
                    ..base.clone()
                };
                let out = train(g, split, &config)?;
                cells.push(GridCell {
                    alpha,
                    beta,
                    eta,
                    best_val: out.best_val,
                    best_epoch: out.best_epoch,
                });
                if best.as_ref().is_none_or(|b| out.best_val > b.best_val) {
                    best = Some(out);
                }
            }
        }
    }
    let best = best.ok_or_else(|| GelatoError::param("empty hyperparameter grid"))?;
    Ok((cells, best))
}
