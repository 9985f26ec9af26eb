//! Batched Autocovariance rows agree with the dense matrix.

use gelato::heuristics::{autocovariance_batched, autocovariance_dense, with_isolated_self_loops};
use gelato::sbm::{sample_sbm, SbmParams};

fn main() -> gelato::Result<()> {
    let g = sample_sbm(SbmParams::new(3, 40, 0.25, 0.02)?, 7, None)?;
    let adj = with_isolated_self_loops(g.adjacency());
    let t = 3;
    let dense = autocovariance_dense(&adj, t)?;
    let batch = [0, 5, 41, 90, 119];
    let block = autocovariance_batched(&adj, t, &batch)?;
    let mut worst = 0.0f64;
    for (b, &u) in block.rows.iter().enumerate() {
        for v in 0..g.n() {
            worst = worst.max((block.scores[[b, v]] - dense[[u, v]]).abs());
        }
    }
    println!("rows {:?}, t = {t}, max |batched - dense| = {worst:.2e}", block.rows);
    println!("R[0,1] = {:.3e} (same block), R[0,41] = {:.3e} (different blocks)", dense[[0, 1]], dense[[0, 41]]);
    Ok(())
}
