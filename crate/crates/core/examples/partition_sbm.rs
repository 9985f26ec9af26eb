//! Recover planted blocks with the multilevel partitioner.

use gelato::partition::{modularity, partition, PartitionConfig};
use gelato::sbm::{sample_sbm, SbmParams};

fn main() -> gelato::Result<()> {
    let params = SbmParams::new(4, 50, 0.3, 0.02)?;
    let g = sample_sbm(params, 1, None)?;
    let part = partition(&g, 4, 0, &PartitionConfig::default())?;
    let agree = (0..g.n())
        .flat_map(|u| (u + 1..g.n()).map(move |v| (u, v)))
        .filter(|&(u, v)| (params.block_of(u) == params.block_of(v)) == (part.block_of(u) == part.block_of(v)))
        .count();
    let total = g.n() * (g.n() - 1) / 2;
    println!("block sizes {:?}", part.block_sizes());
    println!("edge cut {} of {} edges, modularity {:.3}", part.edge_cut(&g), g.m(), modularity(&g, &part)?);
    println!("pairwise agreement with planted blocks {:.4}", agree as f64 / total as f64);
    Ok(())
}
