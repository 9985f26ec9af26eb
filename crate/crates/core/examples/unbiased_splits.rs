//! Compare the three split regimes on one graph.

use gelato::partition::{partition, PartitionConfig};
use gelato::sbm::{sample_sbm, SbmParams};
use gelato::splits::{biased_split, negative_pair_count, partitioned_split, unbiased_split, DEFAULT_RATIOS};

fn main() -> gelato::Result<()> {
    let g = sample_sbm(SbmParams::new(4, 50, 0.3, 0.02)?, 3, None)?;
    let part = partition(&g, 4, 3, &PartitionConfig::default())?;
    let splits = [
        unbiased_split(&g, DEFAULT_RATIOS, 3)?,
        biased_split(&g, DEFAULT_RATIOS, 1.0, 3)?,
        partitioned_split(&g, &part, DEFAULT_RATIOS, 3)?,
    ];
    for s in &splits {
        let counts: Vec<String> = s.counts().iter().map(|(k, c)| format!("{k}={c}")).collect();
        println!("{:<12} {}", s.regime.tag(), counts.join(" "));
    }
    let count = negative_pair_count(&part, &g)?;
    println!(
        "within-block negatives {} vs all negatives {}",
        count.exact,
        g.n() * (g.n() - 1) / 2 - g.m()
    );
    Ok(())
}
