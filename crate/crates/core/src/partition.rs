//! Balanced k-way partitioning and modularity.
//!
//! Multilevel scheme: heavy-edge matching shrinks the graph until it has at
//! most `max(4k, 64)` vertices, a greedy graph-growing pass produces the
//! initial partition, and every level on the way back runs a balancing pass
//! followed by boundary refinement that only accepts moves which do not
//! increase the cut.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{GelatoError, Result};
use crate::graph::AttributedGraph;
use crate::rng::{rng_for, GelatoRng};

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionConfig {
    /// Allowed block overweight: `max |V_i| <= ceil((1 + imbalance) n / k)`.
    pub imbalance: f64,
    pub refine_passes: usize,
    pub initial_tries: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            imbalance: 0.05,
            refine_passes: 16,
            initial_tries: 4,
        }
    }
}

/// Largest admissible block size.
pub fn balance_cap(n: usize, k: usize, imbalance: f64) -> usize {
    ((1.0 + imbalance) * n as f64 / k as f64 - 1e-9).ceil().max(1.0) as usize
}

/// Node-to-block assignment with per-block inventories.
#[derive(Clone, Debug, PartialEq)]
pub struct Partitioning {
    assign: Vec<usize>,
    k: usize,
    blocks: Vec<Vec<usize>>,
    intra_edges: Vec<usize>,
}

impl Partitioning {
    pub fn from_assignment(g: &AttributedGraph, assign: Vec<usize>, k: usize) -> Result<Self> {
        if assign.len() != g.n() {
            return Err(GelatoError::Dimension {
                expected: g.n(),
                got: assign.len(),
            });
        }
        if let Some(&b) = assign.iter().find(|&&b| b >= k) {
            return Err(GelatoError::param(format!("block id {b} out of range for k = {k}")));
        }
        let mut blocks = vec![Vec::new(); k];
        for (u, &b) in assign.iter().enumerate() {
            blocks[b].push(u);
        }
        let mut intra_edges = vec![0usize; k];
        for e in g.edges() {
            if assign[e.u] == assign[e.v] {
                intra_edges[assign[e.u]] += 1;
            }
        }
        Ok(Partitioning {
            assign,
            k,
            blocks,
            intra_edges,
        })
    }

    /// Every node in block 0.
    pub fn single(g: &AttributedGraph) -> Self {
        Self::from_assignment(g, vec![0; g.n()], 1).expect("valid")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    #[inline]
    pub fn block_of(&self, u: usize) -> usize {
        self.assign[u]
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// `|E_i|` per block.
    pub fn intra_edge_counts(&self) -> &[usize] {
        &self.intra_edges
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Total weight of edges whose endpoints lie in different blocks.
    pub fn edge_cut(&self, g: &AttributedGraph) -> f64 {
        g.adjacency()
            .pairs()
            .filter(|(p, _)| self.assign[p.u] != self.assign[p.v])
            .map(|(_, w)| w)
            .sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (u, b) in self.assign.iter().enumerate() {
            out.push_str(&format!("{u}\t{b}\n"));
        }
        fs::write(path, out).map_err(|e| GelatoError::io(path, e))
    }

    pub fn load(path: &Path, g: &AttributedGraph) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
        let mut assign = vec![usize::MAX; g.n()];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || GelatoError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("expected \"node<TAB>block\", got {line:?}"),
            };
            let mut it = line.split_whitespace();
            let u: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let b: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            if u >= g.n() {
                return Err(GelatoError::Range { node: u, n: g.n() });
            }
            assign[u] = b;
        }
        if let Some(u) = assign.iter().position(|&b| b == usize::MAX) {
            return Err(GelatoError::param(format!("node {u} missing from partition file")));
        }
        let k = assign.iter().max().map_or(1, |&m| m + 1);
        Self::from_assignment(g, assign, k)
    }
}

/// Weighted working graph used across coarsening levels.
#[derive(Clone, Debug)]
struct WorkGraph {
    vwgt: Vec<usize>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl WorkGraph {
    fn from_graph(g: &AttributedGraph) -> Self {
        let a = g.adjacency();
        WorkGraph {
            vwgt: vec![1; g.n()],
            adj: (0..g.n())
                .map(|u| {
                    let (cols, ws) = a.row(u);
                    cols.iter().copied().zip(ws.iter().copied()).collect()
                })
                .collect(),
        }
    }

    fn n(&self) -> usize {
        self.vwgt.len()
    }

    fn total_weight(&self) -> usize {
        self.vwgt.iter().sum()
    }

    fn cut(&self, assign: &[usize]) -> f64 {
        let mut c = 0.0;
        for u in 0..self.n() {
            for &(v, w) in &self.adj[u] {
                if u < v && assign[u] != assign[v] {
                    c += w;
                }
            }
        }
        c
    }

    /// Heavy-edge matching. Returns the coarse graph and the fine-to-coarse map.
    fn coarsen(&self, rng: &mut GelatoRng, max_vwgt: usize) -> (WorkGraph, Vec<usize>) {
        let n = self.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut mate = vec![usize::MAX; n];
        for &u in &order {
            if mate[u] != usize::MAX {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for &(v, w) in &self.adj[u] {
                if v == u || mate[v] != usize::MAX || self.vwgt[u] + self.vwgt[v] > max_vwgt {
                    continue;
                }
                best = match best {
                    Some((bv, bw)) if bw > w || (bw == w && bv < v) => Some((bv, bw)),
                    _ => Some((v, w)),
                };
            }
            match best {
                Some((v, _)) => {
                    mate[u] = v;
                    mate[v] = u;
                }
                None => mate[u] = u,
            }
        }
        let mut cmap = vec![usize::MAX; n];
        let mut next = 0;
        for u in 0..n {
            if cmap[u] == usize::MAX {
                cmap[u] = next;
                cmap[mate[u]] = next;
                next += 1;
            }
        }
        let mut vwgt = vec![0usize; next];
        for u in 0..n {
            vwgt[cmap[u]] += self.vwgt[u];
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); next];
        let mut slot = vec![usize::MAX; next];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); next];
        for u in 0..n {
            members[cmap[u]].push(u);
        }
        for cu in 0..next {
            for &u in &members[cu] {
                for &(v, w) in &self.adj[u] {
                    let cv = cmap[v];
                    if cv == cu {
                        continue;
                    }
                    if slot[cv] == usize::MAX {
                        slot[cv] = adj[cu].len();
                        adj[cu].push((cv, w));
                    } else {
                        adj[cu][slot[cv]].1 += w;
                    }
                }
            }
            for &(cv, _) in &adj[cu] {
                slot[cv] = usize::MAX;
            }
            adj[cu].sort_by_key(|e| e.0);
        }
        (WorkGraph { vwgt, adj }, cmap)
    }

    /// Connection weight from `u` to each block.
    fn connections(&self, u: usize, assign: &[usize], conn: &mut [f64]) {
        conn.iter_mut().for_each(|c| *c = 0.0);
        for &(v, w) in &self.adj[u] {
            if v != u {
                conn[assign[v]] += w;
            }
        }
    }
}

/// Greedy graph growing: fill blocks one at a time by absorbing the
/// unassigned vertex most connected to the current block.
fn grow_initial(g: &WorkGraph, k: usize, start: Option<usize>) -> Vec<usize> {
    let n = g.n();
    let total = g.total_weight() as f64;
    let mut assign = vec![usize::MAX; n];
    let mut conn = vec![0.0f64; n];
    let mut remaining = total;
    for b in 0..k.saturating_sub(1) {
        let target = remaining / (k - b) as f64;
        let mut weight = 0.0;
        conn.iter_mut().for_each(|c| *c = 0.0);
        let mut first = true;
        while weight < target {
            let mut pick: Option<usize> = None;
            for v in 0..n {
                if assign[v] != usize::MAX || conn[v] <= 0.0 {
                    continue;
                }
                pick = match pick {
                    Some(p) if conn[p] >= conn[v] => Some(p),
                    _ => Some(v),
                };
            }
            let pick = match pick {
                Some(p) => p,
                None => {
                    // new seed for this block
                    let seed = if first {
                        start.filter(|&s| assign[s] == usize::MAX)
                    } else {
                        None
                    };
                    match seed.or_else(|| (0..n).find(|&v| assign[v] == usize::MAX)) {
                        Some(s) => s,
                        None => break,
                    }
                }
            };
            first = false;
            let w = g.vwgt[pick] as f64;
            // do not overshoot by more than half the vertex weight
            if weight > 0.0 && weight + w - target > target - weight && weight + w > target {
                break;
            }
            assign[pick] = b;
            weight += w;
            for &(v, ew) in &g.adj[pick] {
                if assign[v] == usize::MAX {
                    conn[v] += ew;
                }
            }
        }
        remaining -= weight;
    }
    for a in assign.iter_mut() {
        if *a == usize::MAX {
            *a = k - 1;
        }
    }
    assign
}

fn block_weights(g: &WorkGraph, assign: &[usize], k: usize) -> Vec<usize> {
    let mut bw = vec![0usize; k];
    for u in 0..g.n() {
        bw[assign[u]] += g.vwgt[u];
    }
    bw
}

/// Move vertices out of overweight blocks, choosing the smallest cut increase.
fn balance(g: &WorkGraph, assign: &mut [usize], k: usize, cap: usize) {
    let mut bw = block_weights(g, assign, k);
    let mut conn = vec![0.0; k];
    for _ in 0..g.n() {
        let Some(heavy) = (0..k).filter(|&b| bw[b] > cap).max_by_key(|&b| (bw[b], std::cmp::Reverse(b))) else {
            return;
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for u in 0..g.n() {
            if assign[u] != heavy {
                continue;
            }
            g.connections(u, assign, &mut conn);
            for b in 0..k {
                if b == heavy || bw[b] + g.vwgt[u] > cap {
                    continue;
                }
                let loss = conn[heavy] - conn[b];
                if best.is_none_or(|(l, _, _)| loss < l) {
                    best = Some((loss, u, b));
                }
            }
        }
        let Some((_, u, b)) = best else { return };
        bw[heavy] -= g.vwgt[u];
        bw[b] += g.vwgt[u];
        assign[u] = b;
    }
}

/// Boundary refinement. A move is taken when it strictly lowers the cut, or
/// keeps the cut and strictly improves balance; the cap is never exceeded by
/// a move and no block is emptied.
#[cfg(test)]
fn refine_assignment(
    adj: &[Vec<(usize, f64)>],
    vwgt: &[usize],
    assign: &mut [usize],
    k: usize,
    cap: usize,
    passes: usize,
) {
    let g = WorkGraph {
        vwgt: vwgt.to_vec(),
        adj: adj.to_vec(),
    };
    refine(&g, assign, k, cap, passes);
}

fn refine(g: &WorkGraph, assign: &mut [usize], k: usize, cap: usize, passes: usize) {
    let mut bw = block_weights(g, assign, k);
    let mut conn = vec![0.0; k];
    for _ in 0..passes {
        let mut moved = false;
        for u in 0..g.n() {
            let a = assign[u];
            if bw[a] == g.vwgt[u] || !g.adj[u].iter().any(|&(v, _)| assign[v] != a) {
                continue;
            }
            g.connections(u, assign, &mut conn);
            let mut best: Option<(f64, usize)> = None;
            for b in 0..k {
                if b == a || bw[b] + g.vwgt[u] > cap {
                    continue;
                }
                let gain = conn[b] - conn[a];
                let balances = bw[b] + g.vwgt[u] < bw[a];
                if gain > 0.0 || (gain == 0.0 && balances && conn[b] > 0.0) {
                    if best.is_none_or(|(bg, _)| gain > bg) {
                        best = Some((gain, b));
                    }
                }
            }
            if let Some((_, b)) = best {
                bw[a] -= g.vwgt[u];
                bw[b] += g.vwgt[u];
                assign[u] = b;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Give every empty block one vertex from the largest block.
fn fill_empty(g: &WorkGraph, assign: &mut [usize], k: usize) {
    let mut conn = vec![0.0; k];
    loop {
        let bw = block_weights(g, assign, k);
        let Some(empty) = (0..k).find(|&b| bw[b] == 0) else { return };
        let heavy = (0..k).max_by_key(|&b| (bw[b], std::cmp::Reverse(b))).unwrap();
        if bw[heavy] <= 1 {
            return;
        }
        let mut best: Option<(f64, usize)> = None;
        for u in 0..g.n() {
            if assign[u] != heavy {
                continue;
            }
            g.connections(u, assign, &mut conn);
            if best.is_none_or(|(l, _)| conn[heavy] < l) {
                best = Some((conn[heavy], u));
            }
        }
        assign[best.unwrap().1] = empty;
    }
}

/// Balanced k-way partition of `g`. Deterministic for a fixed seed.
pub fn partition(g: &AttributedGraph, k: usize, seed: u64, config: &PartitionConfig) -> Result<Partitioning> {
    let n = g.n();
    if k == 0 {
        return Err(GelatoError::param("k must be at least 1"));
    }
    if k > n {
        return Err(GelatoError::param(format!("k = {k} exceeds node count {n}")));
    }
    if k == 1 {
        return Ok(Partitioning::single(g));
    }
    let mut rng = rng_for(seed, "partition");
    let cap = balance_cap(n, k, config.imbalance);

    let target = (4 * k).max(64);
    let mut levels: Vec<(WorkGraph, Vec<usize>)> = Vec::new();
    let mut current = WorkGraph::from_graph(g);
    let max_vwgt = ((1.5 * n as f64 / target as f64).ceil() as usize).max(2);
    while current.n() > target {
        let (coarse, cmap) = current.coarsen(&mut rng, max_vwgt);
        if coarse.n() as f64 > 0.95 * current.n() as f64 {
            break;
        }
        let fine = std::mem::replace(&mut current, coarse);
        levels.push((fine, cmap));
    }

    // Initial partition on the coarsest graph, best of several starts.
    let coarse_cap = cap.max(current.vwgt.iter().copied().max().unwrap_or(1) + cap / 2);
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for attempt in 0..config.initial_tries.max(1) {
        let start = if attempt == 0 {
            None
        } else {
            Some(rng.random_range(0..current.n()))
        };
        let mut assign = grow_initial(&current, k, start);
        balance(&current, &mut assign, k, coarse_cap);
        refine(&current, &mut assign, k, coarse_cap, config.refine_passes);
        let over: usize = block_weights(&current, &assign, k)
            .iter()
            .map(|&w| w.saturating_sub(cap))
            .sum();
        let cut = current.cut(&assign);
        let better = match &best {
            None => true,
            Some((bc, bo, _)) => (over, cut) < (*bo, *bc) && (over < *bo || cut < *bc),
        };
        if better {
            best = Some((cut, over, assign));
        }
    }
    let mut assign = best.unwrap().2;

    while let Some((fine, cmap)) = levels.pop() {
        assign = (0..fine.n()).map(|u| assign[cmap[u]]).collect();
        current = fine;
        let level_cap = if levels.is_empty() {
            cap
        } else {
            cap.max(current.vwgt.iter().copied().max().unwrap_or(1) + cap / 2)
        };
        balance(&current, &mut assign, k, level_cap);
        refine(&current, &mut assign, k, level_cap, config.refine_passes);
    }
    balance(&current, &mut assign, k, cap);
    fill_empty(&current, &mut assign, k);
    refine(&current, &mut assign, k, cap, config.refine_passes);
    Partitioning::from_assignment(g, assign, k)
}

/// Modularity of a k-way partition:
/// `Q = (1/vol) * sum_ij (A_ij - d_i d_j / vol) [b_i == b_j]`.
pub fn modularity(g: &AttributedGraph, part: &Partitioning) -> Result<f64> {
    if part.assignment().len() != g.n() {
        return Err(GelatoError::Dimension {
            expected: g.n(),
            got: part.assignment().len(),
        });
    }
    let deg = g.degrees();
    if deg.vol <= 0.0 {
        return Err(GelatoError::Undefined("modularity of a graph without edges"));
    }
    let mut inside = vec![0.0; part.k()];
    let mut vol_b = vec![0.0; part.k()];
    for u in 0..g.n() {
        vol_b[part.block_of(u)] += deg.d[u];
    }
    for (p, w) in g.adjacency().pairs() {
        if part.block_of(p.u) == part.block_of(p.v) {
            inside[part.block_of(p.u)] += 2.0 * w;
        }
    }
    Ok(inside
        .iter()
        .zip(&vol_b)
        .map(|(i, v)| i / deg.vol - (v / deg.vol) * (v / deg.vol))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn modularity_brute(g: &AttributedGraph, assign: &[usize]) -> f64 {
        let deg = g.degrees();
        let mut q = 0.0;
        for i in 0..g.n() {
            for j in 0..g.n() {
                if assign[i] == assign[j] {
                    q += g.adjacency().weight(i, j) - deg.d[i] * deg.d[j] / deg.vol;
                }
            }
        }
        q / deg.vol
    }

    #[test]
    fn single_block() {
        let g = cliques(2, 4);
        let p = partition(&g, 1, 0, &PartitionConfig::default()).unwrap();
        assert!(p.assignment().iter().all(|&b| b == 0));
        assert_eq!(p.edge_cut(&g), 0.0);
        assert!(modularity(&g, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn k_exceeds_n() {
        let g = cliques(1, 3);
        assert!(partition(&g, 4, 0, &PartitionConfig::default()).is_err());
    }

    #[test]
    fn disjoint_cliques_zero_cut() {
        let g = cliques(4, 10);
        for seed in 0..10 {
            let p = partition(&g, 4, seed, &PartitionConfig::default()).unwrap();
            assert_eq!(p.edge_cut(&g), 0.0, "seed {seed}: {:?}", p.assignment());
            assert_eq!(p.block_sizes(), vec![10; 4]);
        }
        // large enough to go through coarsening
        let g = cliques(8, 20);
        let p = partition(&g, 8, 3, &PartitionConfig::default()).unwrap();
        assert_eq!(p.edge_cut(&g), 0.0);
    }

    #[test]
    fn planted_bisection() {
        let params = SbmParams::new(2, 50, 0.5, 0.01).unwrap();
        let mut good = 0;
        for seed in 0..50 {
            let g = sample_sbm(params, seed, None).unwrap();
            let planted: Vec<usize> = (0..100).map(|u| params.block_of(u)).collect();
            let planted_cut = Partitioning::from_assignment(&g, planted, 2).unwrap().edge_cut(&g);
            let p = partition(&g, 2, seed, &PartitionConfig::default()).unwrap();
            assert!(p.max_block_size() <= balance_cap(100, 2, 0.05));
            if p.edge_cut(&g) <= 2.0 * planted_cut.max(1.0) {
                good += 1;
            }
        }
        assert!(good >= 45, "{good}/50");
    }

    #[test]
    fn balanced_and_deterministic() {
        let params = SbmParams::new(5, 40, 0.2, 0.02).unwrap();
        let g = sample_sbm(params, 4, None).unwrap();
        for k in [2, 3, 5, 7, 16] {
            let a = partition(&g, k, 9, &PartitionConfig::default()).unwrap();
            let b = partition(&g, k, 9, &PartitionConfig::default()).unwrap();
            assert_eq!(a, b);
            assert!(a.max_block_size() <= balance_cap(200, k, 0.05), "k={k} {:?}", a.block_sizes());
            assert!(a.block_sizes().iter().all(|&s| s > 0));
            assert_eq!(a.block_sizes().iter().sum::<usize>(), 200);
        }
    }

    #[test]
    fn refinement_never_worsens() {
        use rand::{Rng, SeedableRng};
        let g = sample_sbm(SbmParams::new(4, 30, 0.25, 0.05).unwrap(), 1, None).unwrap();
        let wg = WorkGraph::from_graph(&g);
        let cap = balance_cap(120, 4, 0.05);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            // random balanced start
            let mut assign: Vec<usize> = (0..120).map(|u| u % 4).collect();
            assign.shuffle(&mut rng);
            let _ = rng.random::<u8>();
            let before = wg.cut(&assign);
            refine_assignment(&wg.adj, &wg.vwgt, &mut assign, 4, cap, 10);
            assert!(wg.cut(&assign) <= before);
            assert!(block_weights(&wg, &assign, 4).iter().all(|&w| w <= cap));
        }
    }

    #[test]
    fn two_triangles() {
        let g = AttributedGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], None).unwrap();
        let p = Partitioning::from_assignment(&g, vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        assert_eq!(modularity(&g, &p).unwrap(), 0.5);
        assert!((modularity_brute(&g, p.assignment()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn modularity_matches_brute_force_and_bounds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut sum_abs = 0.0;
        for seed in 0..100 {
            let g = sample_sbm(SbmParams::new(1, 200, 0.05, 0.05).unwrap(), seed, None).unwrap();
            let assign: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
            let p = Partitioning::from_assignment(&g, assign.clone(), 4).unwrap();
            let q = modularity(&g, &p).unwrap();
            if seed < 5 {
                assert!((q - modularity_brute(&g, &assign)).abs() < 1e-12);
            }
            assert!((-0.5..1.0).contains(&q));
            assert!(q.abs() < 0.1);
            sum_abs += q.abs();
        }
        assert!(sum_abs / 100.0 < 0.05);
    }

    #[test]
    fn bisection_modularity_orders_like_spin_form() {
        // For k = 2 the k-way value is an affine function of the +-1 form.
        let g = sample_sbm(SbmParams::new(2, 8, 0.6, 0.1).unwrap(), 2, None).unwrap();
        let deg = g.degrees();
        let spin_form = |assign: &[usize]| {
            let s: Vec<f64> = assign.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
            let mut q = 0.0;
            for i in 0..g.n() {
                for j in 0..g.n() {
                    q += (g.adjacency().weight(i, j) - deg.d[i] * deg.d[j] / deg.vol) * s[i] * s[j];
                }
            }
            q / (2.0 * deg.vol)
        };
        for mask in [0u32, 0b1010_1010, 0xff, 0x0f0f, 0x1234, 0xabcd] {
            let assign: Vec<usize> = (0..16).map(|u| ((mask >> u) & 1) as usize).collect();
            let p = Partitioning::from_assignment(&g, assign.clone(), 2).unwrap();
            let q = modularity(&g, &p).unwrap();
            // delta = (s_i s_j + 1) / 2 and sum_ij (A_ij - d_i d_j / vol) = 0
            assert!((q - spin_form(&assign)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_graph_modularity_undefined() {
        let g = AttributedGraph::from_edges(3, &[], None).unwrap();
        assert!(matches!(
            modularity(&g, &Partitioning::single(&g)),
            Err(GelatoError::Undefined(_))
        ));
    }

    #[test]
    fn file_roundtrip() {
        let g = cliques(3, 4);
        let p = partition(&g, 3, 1, &PartitionConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        p.save(&path).unwrap();
        assert_eq!(Partitioning::load(&path, &g).unwrap(), p);
    }
}
