//! Build the enhanced graph from topology, attribute similarity and an
//! untrained edge network.

use gelato::enhancer::{augment, combine, EdgeNet, PairMode};
use gelato::sbm::{sample_sbm, AttrMode, SbmParams};

fn main() -> gelato::Result<()> {
    let g = sample_sbm(SbmParams::new(3, 20, 0.3, 0.03)?, 5, Some(AttrMode::default()))?;
    let eta = 0.5;
    let tilde = augment(&g, eta)?;
    let net = EdgeNet::new(g.attr_dim(), 16, PairMode::Undirected, 0.0, 0)?;
    let w = net.forward_pairs(g.attributes(), &tilde, false, 0);
    let enhanced = combine(&g, &tilde, &w, 0.5, 0.5, eta)?;
    println!("{} edges, {} pairs after augmentation", g.m(), enhanced.pairs.len());
    for line in enhanced.to_tsv().lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
