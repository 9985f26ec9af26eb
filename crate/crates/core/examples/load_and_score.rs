//! Load an edge list, then rank a few candidate pairs with each heuristic.

use std::fs;

use gelato::heuristics::{score_pairs, with_isolated_self_loops, Metric};
use gelato::{load_graph, NodePair};

fn main() -> gelato::Result<()> {
    let dir = tempfile_dir();
    let edges = dir.join("edges.txt");
    // two triangles joined by a bridge
    fs::write(&edges, "0 1\n0 2\n1 2\n2 3\n3 4\n3 5\n4 5\n").unwrap();
    let g = load_graph(&edges, None)?;
    println!("n = {}, m = {}", g.n(), g.m());

    let pairs = [NodePair::new(0, 3)?, NodePair::new(1, 4)?, NodePair::new(4, 2)?];
    for metric in [Metric::CommonNeighbors, Metric::AdamicAdar, Metric::Autocovariance] {
        let adj = with_isolated_self_loops(g.adjacency());
        let scores = score_pairs(&adj, metric, 3, &pairs, 64)?;
        let shown: Vec<String> = pairs.iter().zip(&scores).map(|(p, s)| format!("({},{})={s:.4}", p.u, p.v)).collect();
        println!("{:>3}: {}", metric.tag(), shown.join("  "));
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("gelato-load-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}
