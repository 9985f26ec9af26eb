//! How sampled negatives inflate ranking metrics.

use gelato::metrics::{inflation_demo, rank_metrics, InflationSetup};

fn main() -> gelato::Result<()> {
    let r = inflation_demo(InflationSetup::default())?;
    println!("biased   AUC {:.4}  AP {:.4}", r.biased_auc, r.biased_ap);
    println!("unbiased AUC {:.4}  AP {:.4}", r.unbiased_auc, r.unbiased_ap);
    println!("unbiased precision at full recall {:.4}", r.unbiased_precision_full_recall);

    // small explicit case: same positives, more negatives
    let pos = [0.9, 0.8, 0.4];
    let few = [0.5, 0.1];
    let many: Vec<f64> = (0..200).map(|i| i as f64 / 400.0 + 0.3).collect();
    for (name, neg) in [("few", &few[..]), ("many", &many[..])] {
        let m = rank_metrics(&pos, neg, &[1])?;
        print!("{name:<5}");
        for key in ["mrr", "ap", "prec@100%"] {
            print!("  {key} {:.3}", m.get(key, None).unwrap());
        }
        println!();
    }
    Ok(())
}
