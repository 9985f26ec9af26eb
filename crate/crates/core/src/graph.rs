//! Sparse attributed graphs.
//!
//! Adjacency is stored in compressed-row layout with both orientations of
//! every undirected pair present. Node ids are dense `0..n`; ids that never
//! appear in the edge file are isolated nodes.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{GelatoError, Result};

/// An unordered node pair stored in canonical order `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePair {
    pub u: usize,
    pub v: usize,
}

impl NodePair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(GelatoError::param(format!("self pair ({a}, {a})")));
        }
        Ok(Self::canonical(a, b))
    }

    /// Canonical pair without the self-pair check. Callers guarantee `a != b`.
    #[inline]
    pub(crate) fn canonical(a: usize, b: usize) -> Self {
        debug_assert_ne!(a, b);
        if a < b {
            NodePair { u: a, v: b }
        } else {
            NodePair { u: b, v: a }
        }
    }

    /// Rank of the pair in the row-major enumeration of all `u < v` pairs of `n` nodes.
    pub fn linear_index(&self, n: usize) -> usize {
        let u = self.u;
        u * (2 * n - u - 1) / 2 + (self.v - u - 1)
    }

    /// Inverse of [`NodePair::linear_index`].
    pub fn from_linear_index(idx: usize, n: usize) -> Self {
        // Row u holds n - u - 1 pairs.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if mid * (2 * n - mid - 1) / 2 <= idx {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let u = lo;
        let start = u * (2 * n - u - 1) / 2;
        NodePair {
            u,
            v: u + 1 + (idx - start),
        }
    }
}

impl fmt::Display for NodePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.u, self.v)
    }
}

/// Number of unordered pairs among `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Weighted degrees and total volume.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeView {
    pub d: Vec<f64>,
    pub vol: f64,
}

/// Symmetric sparse adjacency in CSR form. Self-loops are representable
/// (stored once on the diagonal) so the trainer can patch isolated nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Adjacency {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Build from undirected entries `(u, v, w)` with `u <= v`. Returns the
    /// adjacency and, for each stored slot, the index of the entry it came from.
    /// Entries must be unique.
    pub fn build(n: usize, entries: &[(usize, usize, f64)]) -> Result<(Self, Vec<usize>)> {
        let mut counts = vec![0usize; n + 1];
        for &(u, v, _) in entries {
            if u >= n || v >= n {
                return Err(GelatoError::Range { node: u.max(v), n });
            }
            counts[u + 1] += 1;
            if u != v {
                counts[v + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[n];
        let mut fill = counts.clone();
        let mut indices = vec![0usize; nnz];
        let mut weights = vec![0.0f64; nnz];
        let mut source = vec![0usize; nnz];
        for (idx, &(u, v, w)) in entries.iter().enumerate() {
            let s = fill[u];
            indices[s] = v;
            weights[s] = w;
            source[s] = idx;
            fill[u] += 1;
            if u != v {
                let s = fill[v];
                indices[s] = u;
                weights[s] = w;
                source[s] = idx;
                fill[v] += 1;
            }
        }
        // Sort each row by column.
        for row in 0..n {
            let (a, b) = (counts[row], counts[row + 1]);
            let mut order: Vec<usize> = (a..b).collect();
            order.sort_unstable_by_key(|&s| indices[s]);
            let cols: Vec<usize> = order.iter().map(|&s| indices[s]).collect();
            if cols.windows(2).any(|w| w[0] == w[1]) {
                return Err(GelatoError::param(format!("repeated entry in row {row}")));
            }
            let ws: Vec<f64> = order.iter().map(|&s| weights[s]).collect();
            let src: Vec<usize> = order.iter().map(|&s| source[s]).collect();
            indices[a..b].copy_from_slice(&cols);
            weights[a..b].copy_from_slice(&ws);
            source[a..b].copy_from_slice(&src);
        }
        Ok((
            Adjacency {
                n,
                indptr: counts,
                indices,
                weights,
            },
            source,
        ))
    }

    pub fn from_pairs(n: usize, pairs: &[(NodePair, f64)]) -> Result<Self> {
        let entries: Vec<(usize, usize, f64)> = pairs.iter().map(|(p, w)| (p.u, p.v, *w)).collect();
        Ok(Self::build(n, &entries)?.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[u], self.indptr[u + 1]);
        (&self.indices[a..b], &self.weights[a..b])
    }

    /// Neighbor ids of `u`, excluding a self-loop if present.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(u).0.iter().copied().filter(move |&v| v != u)
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let (cols, ws) = self.row(u);
        match cols.binary_search(&v) {
            Ok(i) => ws[i],
            Err(_) => 0.0,
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.row(u).0.binary_search(&v).is_ok()
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.n).any(|u| self.has_edge(u, u))
    }

    /// Unweighted neighbor count (self-loop excluded).
    pub fn neighbor_count(&self, u: usize) -> usize {
        let (cols, _) = self.row(u);
        cols.len() - usize::from(cols.binary_search(&u).is_ok())
    }

    pub fn degrees(&self) -> DegreeView {
        let d: Vec<f64> = (0..self.n).map(|u| self.row(u).1.iter().sum()).collect();
        let vol = d.iter().sum();
        DegreeView { d, vol }
    }

    /// Canonical off-diagonal pairs with their weights, in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (NodePair, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            let (cols, ws) = self.row(u);
            cols.iter()
                .zip(ws)
                .filter(move |(&v, _)| v > u)
                .map(move |(&v, &w)| (NodePair { u, v }, w))
        })
    }

    /// Number of undirected off-diagonal edges.
    pub fn edge_count(&self) -> usize {
        self.pairs().count()
    }

    /// Copy without the listed pairs.
    pub fn without(&self, removed: &[NodePair]) -> Self {
        let drop: std::collections::HashSet<NodePair> = removed.iter().copied().collect();
        let kept: Vec<(NodePair, f64)> = self.pairs().filter(|(p, _)| !drop.contains(p)).collect();
        Adjacency::from_pairs(self.n, &kept).expect("subset of a valid adjacency")
    }

    /// Row-normalized transition matrix `D^-1 A` in the same layout.
    pub fn transition(&self) -> Result<Adjacency> {
        let deg = self.degrees();
        let mut out = self.clone();
        for u in 0..self.n {
            if deg.d[u] <= 0.0 {
                return Err(GelatoError::ZeroDegree { node: u });
            }
            let (a, b) = (self.indptr[u], self.indptr[u + 1]);
            for w in &mut out.weights[a..b] {
                *w /= deg.d[u];
            }
        }
        Ok(out)
    }
}

/// Row-major `n x r` attribute matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Attributes {
    n: usize,
    r: usize,
    data: Vec<f64>,
}

impl Attributes {
    pub fn new(n: usize, r: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * r {
            return Err(GelatoError::Dimension {
                expected: n * r,
                got: data.len(),
            });
        }
        Ok(Attributes { n, r, data })
    }

    pub fn none(n: usize) -> Self {
        Attributes {
            n,
            r: 0,
            data: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.r..(u + 1) * self.r]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Immutable undirected weighted graph with node attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    adj: Adjacency,
    attrs: Attributes,
}

impl AttributedGraph {
    pub fn new(adj: Adjacency, attrs: Attributes) -> Result<Self> {
        if attrs.n() != adj.n() {
            return Err(GelatoError::Dimension {
                expected: adj.n(),
                got: attrs.n(),
            });
        }
        if adj.has_self_loops() {
            return Err(GelatoError::param("self-loops are not allowed in an input graph"));
        }
        if adj.weights().iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(GelatoError::param("edge weights must be positive and finite"));
        }
        Ok(AttributedGraph { adj, attrs })
    }

    /// Unit-weight graph from an edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], attrs: Option<Attributes>) -> Result<Self> {
        let mut pairs = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            pairs.push((NodePair::new(a, b)?, 1.0));
        }
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by_key(|p| p.0);
        let adj = Adjacency::from_pairs(n, &pairs)?;
        Self::new(adj, attrs.unwrap_or_else(|| Attributes::none(n)))
    }

    pub fn n(&self) -> usize {
        self.adj.n()
    }

    pub fn m(&self) -> usize {
        self.adj.edge_count()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adj
    }

    pub fn attributes(&self) -> &Attributes {
        &self.attrs
    }

    pub fn attr_dim(&self) -> usize {
        self.attrs.dim()
    }

    pub fn degrees(&self) -> DegreeView {
        self.adj.degrees()
    }

    pub fn edges(&self) -> Vec<NodePair> {
        self.adj.pairs().map(|(p, _)| p).collect()
    }

    pub fn has_edge(&self, p: NodePair) -> bool {
        self.adj.has_edge(p.u, p.v)
    }

    /// Same nodes and attributes, different edge set.
    pub fn with_edges(&self, pairs: &[(NodePair, f64)]) -> Result<Self> {
        Self::new(Adjacency::from_pairs(self.n(), pairs)?, self.attrs.clone())
    }

    pub fn cosine(&self, u: usize, v: usize) -> f64 {
        cosine_similarity(self.attrs.row(u), self.attrs.row(v)).unwrap_or(0.0)
    }

    /// Write the edge list (and the attribute file if `r > 0`) in the
    /// canonical text formats.
    pub fn save(&self, edge_path: &Path, attr_path: Option<&Path>) -> Result<()> {
        let weighted = self.adj.weights().iter().any(|&w| w != 1.0);
        let mut out = String::new();
        for (p, w) in self.adj.pairs() {
            if weighted {
                out.push_str(&format!("{}\t{}\t{}\n", p.u, p.v, fmt_real(w)));
            } else {
                out.push_str(&format!("{}\t{}\n", p.u, p.v));
            }
        }
        fs::write(edge_path, out).map_err(|e| GelatoError::io(edge_path, e))?;
        if let Some(path) = attr_path {
            write_attributes(&self.attrs, path)?;
        }
        Ok(())
    }
}

/// Real number formatted with 17 significant digits (round-half-even).
pub fn fmt_real(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        return format!("{}", x as i64);
    }
    format!("{:.16e}", x)
}

/// Cosine similarity; zero-norm vectors are similar to nothing (0).
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(GelatoError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 || ny == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GelatoError {
    GelatoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load an edge file and an optional attribute file.
///
/// Both orientations of an edge may be listed if their weights agree;
/// the same orientation listed twice is a duplicate.
pub fn load_graph(edge_path: &Path, attr_path: Option<&Path>) -> Result<AttributedGraph> {
    let text = fs::read_to_string(edge_path).map_err(|e| GelatoError::io(edge_path, e))?;
    let mut seen: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    let mut max_id: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_err(edge_path, lineno, format!("expected 2 or 3 fields, got {}", fields.len())));
        }
        let a: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(edge_path, lineno, format!("bad node id {:?}", fields[0])))?;
        let b: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(edge_path, lineno, format!("bad node id {:?}", fields[1])))?;
        let w: f64 = match fields.get(2) {
            Some(s) => s
                .parse()
                .map_err(|_| parse_err(edge_path, lineno, format!("bad weight {s:?}")))?,
            None => 1.0,
        };
        if !(w > 0.0 && w.is_finite()) {
            return Err(parse_err(edge_path, lineno, format!("weight must be positive, got {w}")));
        }
        if a == b {
            return Err(parse_err(edge_path, lineno, format!("self-loop on node {a}")));
        }
        max_id = Some(max_id.map_or(a.max(b), |m| m.max(a).max(b)));
        if seen.contains_key(&(a, b)) {
            return Err(GelatoError::Duplicate { u: a, v: b, line: lineno });
        }
        if let Some(&(w0, _)) = seen.get(&(b, a)) {
            if w0 != w {
                return Err(GelatoError::Conflict {
                    u: a.min(b),
                    v: a.max(b),
                    first: w0,
                    second: w,
                });
            }
        }
        seen.insert((a, b), (w, lineno));
    }

    let attrs = match attr_path {
        Some(p) => Some(load_attributes(p)?),
        None => None,
    };
    let n = match (&attrs, max_id) {
        (Some(x), Some(m)) => {
            if m >= x.n() {
                return Err(GelatoError::Range { node: m, n: x.n() });
            }
            x.n()
        }
        (Some(x), None) => x.n(),
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };
    let mut pairs: Vec<(NodePair, f64)> = seen
        .into_iter()
        .map(|((a, b), (w, _))| (NodePair::canonical(a, b), w))
        .collect();
    pairs.sort_by_key(|p| p.0);
    pairs.dedup_by_key(|p| p.0);
    let adj = Adjacency::from_pairs(n, &pairs)?;
    AttributedGraph::new(adj, attrs.unwrap_or_else(|| Attributes::none(n)))
}

pub fn load_attributes(path: &Path) -> Result<Attributes> {
    let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing header \"n r\""))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, hl + 1, "header must be two integers \"n r\""))?;
    if dims.len() != 2 {
        return Err(parse_err(path, hl + 1, "header must be two integers \"n r\""));
    }
    let (n, r) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(n * r);
    let mut rows = 0;
    for (ln, line) in lines {
        if rows == n {
            return Err(parse_err(path, ln + 1, format!("more than {n} attribute rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, ln + 1, format!("bad real {tok:?}")))?;
            data.push(x);
        }
        if data.len() - before != r {
            return Err(parse_err(path, ln + 1, format!("expected {r} values, got {}", data.len() - before)));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(path, text.lines().count(), format!("expected {n} attribute rows, got {rows}")));
    }
    Attributes::new(n, r, data)
}

pub fn write_attributes(attrs: &Attributes, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| GelatoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| GelatoError::io(path, e);
    writeln!(w, "{} {}", attrs.n(), attrs.dim()).map_err(io)?;
    for u in 0..attrs.n() {
        let row: Vec<String> = attrs.row(u).iter().map(|&x| format!("{:.16e}", x)).collect();
        writeln!(w, "{}", row.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}
