//! Train on an attributed SBM and compare with plain Autocovariance.

use gelato::heuristics::{autocovariance_pairs, with_isolated_self_loops};
use gelato::metrics::rank_metrics;
use gelato::sbm::{sample_sbm, AttrMode, SbmParams};
use gelato::splits::{unbiased_split, DEFAULT_RATIOS};
use gelato::trainer::{history_tsv, train, TrainConfig};
use gelato::NodePair;

fn main() -> gelato::Result<()> {
    let g = sample_sbm(SbmParams::new(4, 50, 0.3, 0.02)?, 0, Some(AttrMode::default()))?;
    let split = unbiased_split(&g, DEFAULT_RATIOS, 0)?;
    let config = TrainConfig {
        epochs: 5,
        batch_size: 64,
        ..TrainConfig::default()
    };
    let outcome = train(&g, &split, &config)?;
    print!("{}", history_tsv(&outcome.history));
    println!("best epoch {}", outcome.best_epoch);

    let eval = g.with_edges(&split.evaluation_edges(&g))?;
    let mut pairs = split.test_pos.clone();
    pairs.extend(split.test_neg.iter());
    let k = vec![(0.1 * (pairs.len() - split.test_pos.len()) as f64).round() as usize];
    let report = |name: &str, scores: Vec<f64>| -> gelato::Result<()> {
        let (pos, neg) = scores.split_at(split.test_pos.len());
        let r = rank_metrics(pos, neg, &k)?;
        println!("{name:<10} hits@{} {:.3}  prec@100% {:.4}", k[0], r.get("hits", Some(k[0])).unwrap(), r.get("prec@100%", None).unwrap());
        Ok(())
    };
    report("gelato", outcome.model.score_pairs(&eval, &pairs, 512)?)?;
    let pairs: Vec<NodePair> = pairs;
    report("ac", autocovariance_pairs(&with_isolated_self_loops(eval.adjacency()), 3, &pairs, 512)?)?;
    Ok(())
}
