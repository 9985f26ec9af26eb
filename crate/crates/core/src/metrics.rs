//! Rank-based evaluation.
//!
//! Every metric here breaks ties against positives: a negative with the
//! same score as a positive ranks above it. Scores are grouped by value, so
//! the same code runs on raw score lists and on "counted" inputs where each
//! distinct score carries a (possibly fractional) multiplicity.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{GelatoError, Result};

/// A distinct score and how many items carry it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreMass {
    pub score: f64,
    pub count: f64,
}

impl ScoreMass {
    pub fn new(score: f64, count: f64) -> Self {
        ScoreMass { score, count }
    }
}

/// Distinct scores in descending order with their positive and negative mass.
struct Merged {
    levels: Vec<(f64, f64, f64)>,
    pos_total: f64,
    neg_total: f64,
}

fn check_finite(masses: &[ScoreMass]) -> Result<()> {
    for m in masses {
        if m.score.is_nan() {
            return Err(GelatoError::param("NaN score"));
        }
        if !(m.count >= 0.0 && m.count.is_finite()) {
            return Err(GelatoError::param(format!("invalid count {}", m.count)));
        }
    }
    Ok(())
}

fn masses(scores: &[f64]) -> Vec<ScoreMass> {
    scores.iter().map(|&s| ScoreMass::new(s, 1.0)).collect()
}

fn merge(pos: &[ScoreMass], neg: &[ScoreMass]) -> Result<Merged> {
    check_finite(pos)?;
    check_finite(neg)?;
    let mut all: Vec<(f64, f64, f64)> = pos
        .iter()
        .map(|m| (m.score, m.count, 0.0))
        .chain(neg.iter().map(|m| (m.score, 0.0, m.count)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut levels: Vec<(f64, f64, f64)> = Vec::new();
    for (s, p, n) in all {
        match levels.last_mut() {
            Some(last) if last.0 == s => {
                last.1 += p;
                last.2 += n;
            }
            _ => levels.push((s, p, n)),
        }
    }
    Ok(Merged {
        pos_total: levels.iter().map(|l| l.1).sum(),
        neg_total: levels.iter().map(|l| l.2).sum(),
        levels,
    })
}

impl Merged {
    /// Score of the k-th largest negative.
    fn kth_negative(&self, k: usize) -> Option<f64> {
        let mut seen = 0.0;
        for &(s, _, n) in &self.levels {
            seen += n;
            if n > 0.0 && seen + 1e-9 >= k as f64 {
                return Some(s);
            }
        }
        None
    }

    fn hits(&self, k: usize) -> Result<f64> {
        if k == 0 || k as f64 > self.neg_total + 1e-9 {
            return Err(GelatoError::param(format!(
                "hits@k needs 1 <= k <= {} negatives, got k={k}",
                self.neg_total
            )));
        }
        if self.pos_total == 0.0 {
            return Err(GelatoError::param("no positives"));
        }
        let thr = self.kth_negative(k).expect("k within negatives");
        let above: f64 = self.levels.iter().filter(|l| l.0 > thr).map(|l| l.1).sum();
        Ok(above / self.pos_total)
    }

    fn precision_at(&self, k: usize) -> Result<f64> {
        let total = self.pos_total + self.neg_total;
        if k == 0 || k as f64 > total + 1e-9 {
            return Err(GelatoError::param(format!("prec@k needs 1 <= k <= {total}, got k={k}")));
        }
        let mut left = k as f64;
        let mut hit = 0.0;
        for &(_, p, n) in &self.levels {
            left -= n.min(left);
            let take = p.min(left);
            hit += take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        Ok(hit / k as f64)
    }

    /// AP, MRR and AUC in one pass.
    fn summary(&self) -> Result<(f64, f64, f64)> {
        if self.pos_total == 0.0 {
            return Err(GelatoError::param("no positives"));
        }
        let mut above_pos = 0.0;
        let mut at_or_above_neg = 0.0;
        let mut ap = 0.0;
        let mut rr = 0.0;
        let mut auc = 0.0;
        for &(_, p, n) in &self.levels {
            at_or_above_neg += n;
            if p > 0.0 {
                let whole = p.round();
                if (p - whole).abs() > 1e-9 {
                    return Err(GelatoError::param("positive counts must be whole numbers"));
                }
                for j in 1..=whole as u64 {
                    let hits = above_pos + j as f64;
                    ap += hits / (hits + at_or_above_neg);
                }
                rr += p / (1.0 + at_or_above_neg);
                let below = self.neg_total - at_or_above_neg;
                auc += p * (below + 0.5 * n);
            }
            above_pos += p;
        }
        let auc = if self.neg_total > 0.0 {
            auc / (self.pos_total * self.neg_total)
        } else {
            f64::NAN
        };
        Ok((ap / self.pos_total, rr / self.pos_total, auc))
    }
}

/// Fraction of positives scoring strictly above the k-th largest negative.
pub fn hits_at_k(pos: &[f64], neg: &[f64], k: usize) -> Result<f64> {
    merge(&masses(pos), &masses(neg))?.hits(k)
}

/// Evaluation results keyed by `(metric, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub values: Vec<(String, Option<usize>, f64)>,
    pub positives: f64,
    pub negatives: f64,
    pub regime: String,
}

impl MetricsReport {
    pub fn get(&self, metric: &str, k: Option<usize>) -> Option<f64> {
        self.values.iter().find(|(m, kk, _)| m == metric && *kk == k).map(|v| v.2)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# regime\t{}", self.regime);
        let _ = writeln!(out, "# positives\t{}", self.positives);
        let _ = writeln!(out, "# negatives\t{}", self.negatives);
        out.push_str("metric\tk\tvalue\n");
        for (m, k, v) in &self.values {
            let k = k.map_or("-".to_string(), |k| k.to_string());
            let _ = writeln!(out, "{m}\t{k}\t{v}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| GelatoError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GelatoError::io(path, e))?;
        let bad = |line: usize, message: &str| GelatoError::Parse {
            path: path.display().to_string(),
            line,
            message: message.to_string(),
        };
        let mut report = MetricsReport {
            values: Vec::new(),
            positives: 0.0,
            negatives: 0.0,
            regime: String::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["# regime", r] => report.regime = r.to_string(),
                ["# positives", v] => report.positives = v.parse().map_err(|_| bad(i + 1, "bad count"))?,
                ["# negatives", v] => report.negatives = v.parse().map_err(|_| bad(i + 1, "bad count"))?,
                ["metric", "k", "value"] => {}
                [m, k, v] => {
                    let k = if *k == "-" {
                        None
                    } else {
                        Some(k.parse().map_err(|_| bad(i + 1, "bad k"))?)
                    };
                    let v = v.parse().map_err(|_| bad(i + 1, "bad value"))?;
                    report.values.push((m.to_string(), k, v));
                }
                [""] => {}
                _ => return Err(bad(i + 1, "expected metric<TAB>k<TAB>value")),
            }
        }
        Ok(report)
    }
}

/// hits@k, prec@k for every k in `k_list`, plus AP, MRR, AUC and prec@100%
/// (precision at rank |positives|).
pub fn rank_metrics(pos: &[f64], neg: &[f64], k_list: &[usize]) -> Result<MetricsReport> {
    rank_metrics_counted(&masses(pos), &masses(neg), k_list)
}

pub fn rank_metrics_counted(pos: &[ScoreMass], neg: &[ScoreMass], k_list: &[usize]) -> Result<MetricsReport> {
    let merged = merge(pos, neg)?;
    if merged.pos_total == 0.0 {
        return Err(GelatoError::param("rank metrics need at least one positive"));
    }
    let mut values = Vec::new();
    for &k in k_list {
        values.push(("hits".to_string(), Some(k), merged.hits(k)?));
    }
    for &k in k_list {
        values.push(("prec".to_string(), Some(k), merged.precision_at(k)?));
    }
    let (ap, mrr, auc) = merged.summary()?;
    values.push(("ap".to_string(), None, ap));
    values.push(("mrr".to_string(), None, mrr));
    if merged.neg_total > 0.0 {
        values.push(("auc".to_string(), None, auc));
    }
    let full = merged.pos_total.round() as usize;
    values.push(("prec@100%".to_string(), None, merged.precision_at(full)?));
    Ok(MetricsReport {
        values,
        positives: merged.pos_total,
        negatives: merged.neg_total,
        regime: String::new(),
    })
}

/// Precision at rank |positives|, the validation criterion for model selection.
pub fn precision_at_full_recall(pos: &[f64], neg: &[f64]) -> Result<f64> {
    let merged = merge(&masses(pos), &masses(neg))?;
    if pos.is_empty() {
        return Err(GelatoError::param("no positives"));
    }
    merged.precision_at(pos.len())
}

/// One ROC point: predicting positive for scores `>= threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curves {
    pub auc: f64,
    pub ap: f64,
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
}

impl Curves {
    pub fn roc_tsv(&self) -> String {
        let mut out = String::from("threshold\tfpr\ttpr\n");
        for p in &self.roc {
            let _ = writeln!(out, "{}\t{}\t{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }

    pub fn pr_tsv(&self) -> String {
        let mut out = String::from("threshold\trecall\tprecision\n");
        for p in &self.pr {
            let _ = writeln!(out, "{}\t{}\t{}", p.threshold, p.recall, p.precision);
        }
        out
    }
}

pub fn auc_and_curves(pos: &[f64], neg: &[f64]) -> Result<Curves> {
    auc_and_curves_counted(&masses(pos), &masses(neg))
}

pub fn auc_and_curves_counted(pos: &[ScoreMass], neg: &[ScoreMass]) -> Result<Curves> {
    let merged = merge(pos, neg)?;
    if merged.pos_total == 0.0 || merged.neg_total == 0.0 {
        return Err(GelatoError::param("curves need positives and negatives"));
    }
    let (ap, _, auc) = merged.summary()?;
    let mut roc = Vec::with_capacity(merged.levels.len());
    let mut pr = Vec::with_capacity(merged.levels.len());
    let (mut tp, mut fp) = (0.0, 0.0);
    for &(s, p, n) in &merged.levels {
        tp += p;
        fp += n;
        roc.push(RocPoint {
            threshold: s,
            fpr: fp / merged.neg_total,
            tpr: tp / merged.pos_total,
        });
        pr.push(PrPoint {
            threshold: s,
            recall: tp / merged.pos_total,
            precision: tp / (tp + fp),
        });
    }
    Ok(Curves { auc, ap, roc, pr })
}

/// The score-mass construction used to show how biased testing inflates
/// rank metrics: every positive scores 0.5, a small slice of the negatives
/// scores 1.0 and the rest 0.0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationSetup {
    pub positives: f64,
    pub high_negatives: f64,
    pub low_negatives: f64,
    /// Negatives kept by the biased evaluation.
    pub biased_sample: f64,
}

impl Default for InflationSetup {
    fn default() -> Self {
        InflationSetup {
            positives: 100_000.0,
            high_negatives: 1_000_000.0,
            low_negatives: 98_900_000.0,
            biased_sample: 100_000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationReport {
    pub biased_auc: f64,
    pub biased_ap: f64,
    pub unbiased_auc: f64,
    pub unbiased_ap: f64,
    /// Precision once every positive has been retrieved, unbiased.
    pub unbiased_precision_full_recall: f64,
}

/// Evaluate the construction with expected counts rather than sampled scores.
pub fn inflation_demo(setup: InflationSetup) -> Result<InflationReport> {
    let total_neg = setup.high_negatives + setup.low_negatives;
    if !(total_neg > 0.0 && setup.biased_sample > 0.0 && setup.biased_sample <= total_neg) {
        return Err(GelatoError::param("biased sample must be within the negative count"));
    }
    let pos = [ScoreMass::new(0.5, setup.positives)];
    let share = setup.biased_sample / total_neg;
    let biased_neg = [
        ScoreMass::new(1.0, setup.high_negatives * share),
        ScoreMass::new(0.0, setup.low_negatives * share),
    ];
    let full_neg = [
        ScoreMass::new(1.0, setup.high_negatives),
        ScoreMass::new(0.0, setup.low_negatives),
    ];
    let biased = auc_and_curves_counted(&pos, &biased_neg)?;
    let unbiased = auc_and_curves_counted(&pos, &full_neg)?;
    let at_full = unbiased
        .pr
        .iter()
        .find(|p| p.recall >= 1.0)
        .map_or(0.0, |p| p.precision);
    Ok(InflationReport {
        biased_auc: biased.auc,
        biased_ap: biased.ap,
        unbiased_auc: unbiased.auc,
        unbiased_ap: unbiased.ap,
        unbiased_precision_full_recall: at_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_ranking(pos: &[f64], neg: &[f64]) -> Vec<bool> {
        // pessimistic merged ranking: score descending, negatives first on ties
        let mut items: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
        items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        items.into_iter().map(|x| x.1).collect()
    }

    fn brute_ap(pos: &[f64], neg: &[f64]) -> f64 {
        let r = brute_ranking(pos, neg);
        let mut hits = 0.0;
        let mut sum = 0.0;
        for (i, &p) in r.iter().enumerate() {
            if p {
                hits += 1.0;
                sum += hits / (i + 1) as f64;
            }
        }
        sum / pos.len() as f64
    }

    fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut s = 0.0;
        for &p in pos {
            for &n in neg {
                s += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        s / (pos.len() * neg.len()) as f64
    }

    fn brute_hits(pos: &[f64], neg: &[f64], k: usize) -> f64 {
        let mut sorted = neg.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let thr = sorted[k - 1];
        pos.iter().filter(|&&p| p > thr).count() as f64 / pos.len() as f64
    }

    #[test]
    fn hits_examples() {
        let pos = [0.9, 0.4];
        let neg = [0.8, 0.5, 0.1];
        assert_eq!(hits_at_k(&pos, &neg, 1).unwrap(), 0.5);
        assert_eq!(hits_at_k(&pos, &neg, 2).unwrap(), 0.5);
        assert_eq!(hits_at_k(&pos, &neg, 3).unwrap(), 1.0);
        assert!(hits_at_k(&pos, &neg, 4).is_err());
        assert_eq!(hits_at_k(&[0.3, 0.3], &[0.3, 0.3, 0.3], 1).unwrap(), 0.0);
        for k in 1..=3 {
            assert_eq!(hits_at_k(&[5.0, 6.0], &[1.0, 2.0, 3.0], k).unwrap(), 1.0);
        }
    }

    #[test]
    fn rank_examples() {
        let r = rank_metrics(&[0.9, 0.4], &[0.8, 0.5, 0.1], &[1, 3]).unwrap();
        assert_abs_diff_eq!(r.get("ap", None).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(r.get("prec", Some(1)).unwrap(), 1.0);
        assert_abs_diff_eq!(r.get("prec", Some(3)).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // 0.9 beats everything, 0.4 has two negatives above it
        assert_abs_diff_eq!(r.get("mrr", None).unwrap(), (1.0 + 1.0 / 3.0) / 2.0, epsilon = 1e-15);

        let perfect = rank_metrics(&[3.0, 2.0], &[1.0, 0.0], &[1]).unwrap();
        assert_eq!(perfect.get("ap", None), Some(1.0));
        assert_eq!(perfect.get("mrr", None), Some(1.0));
        assert_eq!(perfect.get("auc", None), Some(1.0));

        let worst = rank_metrics(&[0.0, 0.0], &[1.0, 2.0, 3.0, 4.0], &[]).unwrap();
        assert_abs_diff_eq!(worst.get("mrr", None).unwrap(), 1.0 / 5.0, epsilon = 1e-15);
        assert!(rank_metrics(&[], &[1.0], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_and_curves(&[2.0, 3.0], &[0.0, 1.0]).unwrap().auc, 1.0);
        let same = [0.1, 0.5, 0.9];
        assert_eq!(auc_and_curves(&same, &same).unwrap().auc, 0.5);
        let c = auc_and_curves(&[0.9, 0.4], &[0.8, 0.5, 0.1]).unwrap();
        assert_eq!(c.roc.len(), 5);
        assert_eq!(c.roc.last().unwrap().tpr, 1.0);
        assert_eq!(c.roc.last().unwrap().fpr, 1.0);
        assert!(c.roc.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
    }

    #[test]
    fn inflation_reproduces_appendix_numbers() {
        let r = inflation_demo(InflationSetup::default()).unwrap();
        // expected high negatives in the sample: 1e5 * 1e6 / 9.99e7
        let high = 1e5 * 1e6 / 9.99e7;
        assert_abs_diff_eq!(r.biased_auc, 1.0 - high / 1e5, epsilon = 1e-12);
        assert!((r.biased_auc - 0.99).abs() <= 0.005);
        assert!((r.biased_ap - 0.95).abs() <= 0.02, "{}", r.biased_ap);
        // integral approximation of mean_j j/(j+c)
        let approx_ap = |c: f64, p: f64| 1.0 - c / p * (1.0 + p / c).ln();
        assert_abs_diff_eq!(r.biased_ap, approx_ap(high, 1e5), epsilon = 1e-4);
        assert_abs_diff_eq!(r.unbiased_ap, approx_ap(1e6, 1e5), epsilon = 1e-4);
        assert!(r.unbiased_ap <= 0.10);
        assert_abs_diff_eq!(r.unbiased_precision_full_recall, 1e5 / 1.1e6, epsilon = 1e-12);
    }

    #[test]
    fn counted_matches_expanded() {
        let pos = [ScoreMass::new(0.5, 3.0), ScoreMass::new(0.2, 2.0)];
        let neg = [ScoreMass::new(0.7, 2.0), ScoreMass::new(0.5, 1.0), ScoreMass::new(0.0, 4.0)];
        let expand = |m: &[ScoreMass]| -> Vec<f64> {
            m.iter().flat_map(|x| std::iter::repeat(x.score).take(x.count as usize)).collect()
        };
        let a = rank_metrics_counted(&pos, &neg, &[1, 2, 5]).unwrap();
        let b = rank_metrics(&expand(&pos), &expand(&neg), &[1, 2, 5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn downsampling_inflates_ap() {
        // Monte Carlo over random uniform downsamples of the negatives
        let mut rng = crate::rng::rng_for(3, "ap");
        let pos: Vec<f64> = (0..40).map(|_| rng.random::<f64>() + 0.3).collect();
        let neg: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let full = rank_metrics(&pos, &neg, &[]).unwrap().get("ap", None).unwrap();
        let mut mean = 0.0;
        let trials = 200;
        for _ in 0..trials {
            let sub: Vec<f64> = neg.iter().copied().filter(|_| rng.random::<f64>() < 0.1).collect();
            mean += rank_metrics(&pos, &sub, &[]).unwrap().get("ap", None).unwrap();
        }
        mean /= trials as f64;
        assert!(mean >= full, "{mean} < {full}");
    }

    #[test]
    fn report_roundtrip() {
        let mut r = rank_metrics(&[0.9, 0.4], &[0.8, 0.5, 0.1], &[1, 2]).unwrap();
        r.regime = "unbiased".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.tsv");
        r.save(&path).unwrap();
        assert_eq!(MetricsReport::load(&path).unwrap(), r);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        // coarse grid so ties actually happen
        prop::collection::vec((0u8..20).prop_map(|x| x as f64 / 4.0), 1..60)
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(pos in scores(), neg in scores()) {
            let f = |x: &f64| (x * 3.0).exp() - 7.0;
            let k: Vec<usize> = (1..=neg.len().min(5)).collect();
            let a = rank_metrics(&pos, &neg, &k).unwrap();
            let tp: Vec<f64> = pos.iter().map(f).collect();
            let tn: Vec<f64> = neg.iter().map(f).collect();
            let b = rank_metrics(&tp, &tn, &k).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn matches_brute_force(pos in scores(), neg in scores()) {
            let c = auc_and_curves(&pos, &neg).unwrap();
            prop_assert!((c.auc - brute_auc(&pos, &neg)).abs() < 1e-12);
            prop_assert!((c.ap - brute_ap(&pos, &neg)).abs() < 1e-12);
            let mut prev = 0.0;
            let mut prev_prec_k = 0.0;
            for k in 1..=neg.len() {
                let h = hits_at_k(&pos, &neg, k).unwrap();
                prop_assert!((h - brute_hits(&pos, &neg, k)).abs() < 1e-15);
                prop_assert!(h >= prev);
                prev = h;
                let r = brute_ranking(&pos, &neg);
                let p = rank_metrics(&pos, &neg, &[k]).unwrap().get("prec", Some(k)).unwrap();
                let brute = r[..k].iter().filter(|x| **x).count() as f64 / k as f64;
                prop_assert!((p - brute).abs() < 1e-12);
                prop_assert!(p * k as f64 >= prev_prec_k - 1e-12);
                prev_prec_k = p * k as f64;
            }
        }
    }

    #[test]
    fn auc_large_brute() {
        let mut rng = crate::rng::rng_for(9, "auc");
        let pos: Vec<f64> = (0..900).map(|_| (rng.random::<f64>() * 50.0).round()).collect();
        let neg: Vec<f64> = (0..1100).map(|_| (rng.random::<f64>() * 40.0).round()).collect();
        let c = auc_and_curves(&pos, &neg).unwrap();
        assert_abs_diff_eq!(c.auc, brute_auc(&pos, &neg), epsilon = 1e-12);
    }
}
