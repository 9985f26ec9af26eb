//! Closed-form SBM quantities and a sampled check.

use gelato::sbm::{
    expected_accuracy, pair_census, theorem1_default_grid, theorem1_table, verify_lemma1, ClassifierSpec, SbmParams,
};

fn main() -> gelato::Result<()> {
    let params = SbmParams::new(10, 1000, 0.9, 0.1)?;
    let c = pair_census(params);
    println!("intra negatives {:.0}, inter negatives {:.0}", c.intra_neg, c.inter_neg);
    println!(
        "random precision: biased {:.3}, unbiased {:.3}",
        c.biased_random_precision(),
        c.unbiased_random_precision()
    );
    for spec in [ClassifierSpec::PredictNone, ClassifierSpec::PredictWithinBlock] {
        println!("{spec:?}: expected accuracy {:.4}", expected_accuracy(params, spec));
    }
    let rows = theorem1_table(&theorem1_default_grid());
    println!("{} grid cells, all consistent: {}", rows.len(), rows.iter().all(|r| r.consistent()));
    let report = verify_lemma1(SbmParams::new(4, 50, 0.3, 0.05)?, 20, &[1, 3], 0)?;
    println!("intra > inter Autocovariance: {:?} of {}", report.wins, report.runs);
    Ok(())
}
