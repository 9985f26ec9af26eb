//! Topological similarity scores.
//!
//! Autocovariance of a weighted graph with degrees `d` and volume `vol`:
//!
//! ```text
//! R = D/vol * (D^-1 A)^t - d d^T / vol^2
//! ```
//!
//! The dense form materializes `n x n` matrices and is only meant for small
//! graphs and as an oracle. The batched form propagates a dense
//! `|batch| x n` block through the sparse transition matrix `t` times, so
//! memory stays `O(|batch| * n)` plus the sparse matrix.

use std::collections::BTreeMap;

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};

use crate::error::{GelatoError, Result};
use crate::graph::{Adjacency, NodePair};

/// Dense path is refused above this many nodes unless the caller raises the cap.
pub const DEFAULT_DENSE_CAP: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    CommonNeighbors,
    AdamicAdar,
    Autocovariance,
}

impl Metric {
    pub fn tag(&self) -> &'static str {
        match self {
            Metric::CommonNeighbors => "cn",
            Metric::AdamicAdar => "aa",
            Metric::Autocovariance => "ac",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cn" => Ok(Metric::CommonNeighbors),
            "aa" => Ok(Metric::AdamicAdar),
            "ac" => Ok(Metric::Autocovariance),
            _ => Err(GelatoError::param(format!("unknown metric {s:?} (expected cn, aa or ac)"))),
        }
    }
}

/// Rows of a score matrix for a batch of nodes.
#[derive(Clone, Debug)]
pub struct ScoreBlock {
    pub rows: Vec<usize>,
    pub scores: Array2<f64>,
    pub metric: Metric,
    pub t: Option<usize>,
}

impl ScoreBlock {
    pub fn row_of(&self, node: usize) -> Option<usize> {
        self.rows.iter().position(|&r| r == node)
    }
}

fn sorted_neighbors(adj: &Adjacency, u: usize) -> Vec<usize> {
    adj.neighbors(u).collect()
}

fn intersect_sorted(a: &[usize], b: &[usize], mut f: impl FnMut(usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

pub fn common_neighbors(adj: &Adjacency, pairs: &[NodePair]) -> Vec<f64> {
    pairs
        .iter()
        .map(|p| {
            let (a, b) = (sorted_neighbors(adj, p.u), sorted_neighbors(adj, p.v));
            let mut c = 0usize;
            intersect_sorted(&a, &b, |_| c += 1);
            c as f64
        })
        .collect()
}

pub fn adamic_adar(adj: &Adjacency, pairs: &[NodePair]) -> Vec<f64> {
    pairs
        .iter()
        .map(|p| {
            let (a, b) = (sorted_neighbors(adj, p.u), sorted_neighbors(adj, p.v));
            let mut s = 0.0;
            // A common neighbor is adjacent to both ends, so its degree is at least 2.
            intersect_sorted(&a, &b, |w| s += 1.0 / (adj.neighbor_count(w) as f64).ln());
            s
        })
        .collect()
}

fn check_degrees(adj: &Adjacency) -> Result<(Vec<f64>, f64)> {
    let deg = adj.degrees();
    if let Some(u) = deg.d.iter().position(|&x| x <= 0.0) {
        return Err(GelatoError::ZeroDegree { node: u });
    }
    Ok((deg.d, deg.vol))
}

/// Dense Autocovariance matrix. Every node must have positive degree.
pub fn autocovariance_dense(adj: &Adjacency, t: usize) -> Result<Array2<f64>> {
    autocovariance_dense_capped(adj, t, DEFAULT_DENSE_CAP)
}

pub fn autocovariance_dense_capped(adj: &Adjacency, t: usize, cap: usize) -> Result<Array2<f64>> {
    let n = adj.n();
    if n > cap {
        return Err(GelatoError::param(format!(
            "dense Autocovariance refused for n = {n} > {cap}; use the batched path"
        )));
    }
    let (d, vol) = check_degrees(adj)?;
    let mut trans = Array2::<f64>::zeros((n, n));
    for u in 0..n {
        let (cols, ws) = adj.row(u);
        for (&v, &w) in cols.iter().zip(ws) {
            trans[[u, v]] = w / d[u];
        }
    }
    let mut walk = Array2::<f64>::eye(n);
    for _ in 0..t {
        walk = walk.dot(&trans);
    }
    let mut r = walk;
    for u in 0..n {
        for v in 0..n {
            r[[u, v]] = d[u] / vol * r[[u, v]] - d[u] * d[v] / (vol * vol);
        }
    }
    Ok(r)
}

/// `out = block * trans` for a dense block and a sparse matrix.
pub(crate) fn dense_times_sparse(block: &Array2<f64>, trans: &Adjacency) -> Array2<f64> {
    let n = trans.n();
    let mut out = Array2::<f64>::zeros((block.nrows(), n));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(block.axis_iter(Axis(0)).into_par_iter())
        .for_each(|(mut dst, src)| {
            for (i, &p) in src.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let (cols, ws) = trans.row(i);
                for (&j, &w) in cols.iter().zip(ws) {
                    dst[j] += p * w;
                }
            }
        });
    out
}

/// Walk blocks `P_1 .. P_t` for the batch rows, where `P_l` holds the
/// batch rows of `(D^-1 A)^l`. For `t = 0` a single identity block is returned.
pub fn walk_blocks(trans: &Adjacency, batch: &[usize], t: usize) -> Vec<Array2<f64>> {
    let n = trans.n();
    let mut first = Array2::<f64>::zeros((batch.len(), n));
    if t == 0 {
        for (b, &u) in batch.iter().enumerate() {
            first[[b, u]] = 1.0;
        }
        return vec![first];
    }
    for (b, &u) in batch.iter().enumerate() {
        let (cols, ws) = trans.row(u);
        for (&v, &w) in cols.iter().zip(ws) {
            first[[b, v]] = w;
        }
    }
    let mut blocks = Vec::with_capacity(t);
    blocks.push(first);
    for _ in 1..t {
        let next = dense_times_sparse(blocks.last().unwrap(), trans);
        blocks.push(next);
    }
    blocks
}

/// Autocovariance rows for a batch of nodes using sparse propagation.
pub fn autocovariance_batched(adj: &Adjacency, t: usize, batch: &[usize]) -> Result<ScoreBlock> {
    if batch.is_empty() {
        return Err(GelatoError::param("empty batch"));
    }
    if let Some(&u) = batch.iter().find(|&&u| u >= adj.n()) {
        return Err(GelatoError::Range { node: u, n: adj.n() });
    }
    let (d, vol) = check_degrees(adj)?;
    let trans = adj.transition()?;
    let mut walk = walk_blocks(&trans, batch, t).pop().unwrap();
    for (b, &u) in batch.iter().enumerate() {
        let scale = d[u] / vol;
        let mut row = walk.row_mut(b);
        for (v, x) in row.iter_mut().enumerate() {
            *x = scale * *x - d[u] * d[v] / (vol * vol);
        }
    }
    Ok(ScoreBlock {
        rows: batch.to_vec(),
        scores: walk,
        metric: Metric::Autocovariance,
        t: Some(t),
    })
}

/// Autocovariance for arbitrary pairs, computed in row blocks of at most
/// `block_size` distinct source nodes. Output follows the input order.
pub fn autocovariance_pairs(adj: &Adjacency, t: usize, pairs: &[NodePair], block_size: usize) -> Result<Vec<f64>> {
    let block_size = block_size.max(1);
    let mut by_row: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        if p.v >= adj.n() {
            return Err(GelatoError::Range { node: p.v, n: adj.n() });
        }
        by_row.entry(p.u).or_default().push(i);
    }
    let rows: Vec<usize> = by_row.keys().copied().collect();
    let mut out = vec![0.0; pairs.len()];
    for chunk in rows.chunks(block_size) {
        let block = autocovariance_batched(adj, t, chunk)?;
        for (b, u) in chunk.iter().enumerate() {
            for &i in &by_row[u] {
                out[i] = block.scores[[b, pairs[i].v]];
            }
        }
    }
    Ok(out)
}

pub fn score_pairs(adj: &Adjacency, metric: Metric, t: usize, pairs: &[NodePair], block_size: usize) -> Result<Vec<f64>> {
    match metric {
        Metric::CommonNeighbors => Ok(common_neighbors(adj, pairs)),
        Metric::AdamicAdar => Ok(adamic_adar(adj, pairs)),
        Metric::Autocovariance => autocovariance_pairs(adj, t, pairs, block_size),
    }
}

/// Add weight-1 self-loops to isolated nodes so every row of the
/// transition matrix is a distribution.
pub fn with_isolated_self_loops(adj: &Adjacency) -> Adjacency {
    let isolated: Vec<usize> = (0..adj.n()).filter(|&u| adj.row(u).0.is_empty()).collect();
    if isolated.is_empty() {
        return adj.clone();
    }
    let mut entries: Vec<(usize, usize, f64)> = adj.pairs().map(|(p, w)| (p.u, p.v, w)).collect();
    for u in 0..adj.n() {
        let w = adj.weight(u, u);
        if w > 0.0 {
            entries.push((u, u, w));
        }
    }
    entries.extend(isolated.into_iter().map(|u| (u, u, 1.0)));
    Adjacency::build(adj.n(), &entries).expect("valid entries").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttributedGraph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize, edges: &[(usize, usize)]) -> Adjacency {
        AttributedGraph::from_edges(n, edges, None).unwrap().adjacency().clone()
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Adjacency {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        unit(n, &edges)
    }

    #[test]
    fn triangle_and_star() {
        let k3 = unit(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(common_neighbors(&k3, &[NodePair { u: 0, v: 1 }]), vec![1.0]);
        let star = unit(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(common_neighbors(&star, &[NodePair { u: 0, v: 1 }]), vec![0.0]);
    }

    #[test]
    fn adamic_adar_path() {
        let path = unit(3, &[(0, 2), (2, 1)]);
        let s = adamic_adar(&path, &[NodePair { u: 0, v: 1 }])[0];
        assert!((s - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((s - 1.4427).abs() < 1e-4);
        assert_eq!(adamic_adar(&path, &[NodePair { u: 0, v: 2 }])[0], 0.0);
    }

    #[test]
    fn cn_aa_match_brute_force() {
        let adj = random_graph(50, 0.15, 3);
        let dense: Vec<Vec<bool>> = (0..50).map(|u| (0..50).map(|v| adj.has_edge(u, v)).collect()).collect();
        let pairs: Vec<NodePair> = (0..50).flat_map(|u| (u + 1..50).map(move |v| NodePair { u, v })).collect();
        let cn = common_neighbors(&adj, &pairs);
        let aa = adamic_adar(&adj, &pairs);
        for (i, p) in pairs.iter().enumerate() {
            let mut c = 0.0;
            let mut a = 0.0;
            for w in 0..50 {
                if dense[p.u][w] && dense[p.v][w] {
                    c += 1.0;
                    let deg = dense[w].iter().filter(|&&x| x).count() as f64;
                    a += 1.0 / deg.ln();
                }
            }
            assert_eq!(cn[i], c);
            assert!((aa[i] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_t1() {
        let r = autocovariance_dense(&unit(3, &[(0, 1), (1, 2), (0, 2)]), 1).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                if u != v {
                    assert!((r[[u, v]] - 1.0 / 18.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn t0_is_negative_degree_product() {
        let adj = random_graph(20, 0.3, 9);
        let adj = with_isolated_self_loops(&adj);
        let r = autocovariance_dense(&adj, 0).unwrap();
        let deg = adj.degrees();
        for u in 0..20 {
            for v in 0..20 {
                if u != v {
                    let want = -deg.d[u] * deg.d[v] / (deg.vol * deg.vol);
                    assert!((r[[u, v]] - want).abs() < 1e-15);
                }
            }
        }
        let b = autocovariance_batched(&adj, 0, &[3, 7]).unwrap();
        for (i, &u) in [3usize, 7].iter().enumerate() {
            for v in 0..20 {
                assert!((b.scores[[i, v]] - r[[u, v]]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn path_t2() {
        let r = autocovariance_dense(&unit(3, &[(0, 1), (1, 2)]), 2).unwrap();
        assert!((r[[0, 2]] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn zero_degree_is_named() {
        let adj = unit(3, &[(0, 1)]);
        assert!(matches!(autocovariance_dense(&adj, 1), Err(GelatoError::ZeroDegree { node: 2 })));
        assert!(matches!(autocovariance_batched(&adj, 1, &[0]), Err(GelatoError::ZeroDegree { node: 2 })));
    }

    #[test]
    fn dense_cap() {
        let adj = unit(3, &[(0, 1), (1, 2)]);
        assert!(autocovariance_dense_capped(&adj, 1, 2).is_err());
    }

    #[test]
    fn batched_matches_dense_and_is_symmetric() {
        for seed in 0..5u64 {
            let adj = with_isolated_self_loops(&random_graph(40, 0.1, seed));
            for t in 0..5 {
                let dense = autocovariance_dense(&adj, t).unwrap();
                for u in 0..40 {
                    for v in 0..40 {
                        assert!((dense[[u, v]] - dense[[v, u]]).abs() < 1e-12);
                    }
                }
                let single = autocovariance_batched(&adj, t, &[11]).unwrap();
                let full: Vec<usize> = (0..40).rev().collect();
                let block = autocovariance_batched(&adj, t, &full).unwrap();
                for v in 0..40 {
                    assert!((single.scores[[0, v]] - dense[[11, v]]).abs() < 1e-12);
                    for (b, &u) in full.iter().enumerate() {
                        assert!((block.scores[[b, v]] - dense[[u, v]]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let adj = with_isolated_self_loops(&random_graph(30, 0.05, 1));
        let tr = adj.transition().unwrap();
        for u in 0..30 {
            let s: f64 = tr.row(u).1.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pairs_follow_input_order() {
        let adj = with_isolated_self_loops(&random_graph(25, 0.2, 4));
        let dense = autocovariance_dense(&adj, 3).unwrap();
        let pairs = vec![NodePair { u: 5, v: 9 }, NodePair { u: 0, v: 24 }, NodePair { u: 5, v: 6 }];
        let got = autocovariance_pairs(&adj, 3, &pairs, 1).unwrap();
        for (p, s) in pairs.iter().zip(got) {
            assert!((s - dense[[p.u, p.v]]).abs() < 1e-12);
        }
    }
}
