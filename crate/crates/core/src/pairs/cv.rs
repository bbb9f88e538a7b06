//! K-fold cross-validation and held-out evaluation of pair scorers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureConfig;
use super::linear::TrainConfig;
use super::model::{train_pair_classifier, PairScorer};
use crate::agreement::kappa_if_defined;
use crate::corpus::SentencePair;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub accuracy: f64,
    /// Cohen's kappa between gold and predicted labels; `None` when undefined.
    pub kappa: Option<f64>,
    pub n: usize,
}

/// Scores every pair and compares `score >= threshold` with the gold label.
pub fn evaluate_pairs(
    scorer: &dyn PairScorer,
    pairs: &[SentencePair],
    threshold: f64,
) -> Result<PairEvaluation> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to evaluate"));
    }
    let predicted: Vec<bool> = pairs
        .par_iter()
        .map(|p| Ok(scorer.same_probability(&p.text_a, &p.text_b)? >= threshold))
        .collect::<Result<_>>()?;
    let gold: Vec<bool> = pairs.iter().map(|p| p.label.is_same()).collect();
    let correct = gold.iter().zip(&predicted).filter(|(g, p)| g == p).count();
    Ok(PairEvaluation {
        accuracy: correct as f64 / pairs.len() as f64,
        kappa: kappa_if_defined(&gold, &predicted),
        n: pairs.len(),
    })
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds whose sizes differ
/// by at most one.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} items cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<PairEvaluation>,
    pub mean_accuracy: f64,
    /// Largest minus smallest fold accuracy.
    pub spread: f64,
}

fn has_both(pairs: &[SentencePair]) -> bool {
    pairs.iter().any(|p| p.label.is_same()) && pairs.iter().any(|p| !p.label.is_same())
}

pub fn cross_validate(
    pairs: &[SentencePair],
    k: usize,
    features: &FeatureConfig,
    train: &TrainConfig,
    seed: u64,
    threshold: f64,
) -> Result<CvReport> {
    let folds = fold_indices(pairs.len(), k, seed)?;
    let mut splits = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let test: Vec<SentencePair> = test_idx.iter().map(|&i| pairs[i].clone()).collect();
        let train_set: Vec<SentencePair> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().map(|&i| pairs[i].clone()))
            .collect();
        if !has_both(&test) || !has_both(&train_set) {
            return Err(Error::invalid(format!(
                "fold {} contains a single pair label",
                f + 1
            )));
        }
        splits.push((train_set, test));
    }
    let mut results = Vec::with_capacity(k);
    for (train_set, test) in &splits {
        let model = train_pair_classifier(train_set, features, train)?;
        results.push(evaluate_pairs(&model, test, threshold)?);
    }
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CvReport {
        k,
        seed,
        mean_accuracy: accs.iter().sum::<f64>() / k as f64,
        spread: max - min,
        folds: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PairLabel, PairSource};

    #[test]
    fn folds_partition() {
        let folds = fold_indices(23, 5, 9).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        assert_eq!(folds, fold_indices(23, 5, 9).unwrap());
        assert!(fold_indices(3, 5, 0).is_err());
        assert!(fold_indices(10, 1, 0).is_err());
    }

    struct Always(f64);

    impl PairScorer for Always {
        fn same_probability(&self, _: &str, _: &str) -> Result<f64> {
            Ok(self.0)
        }
    }

    fn pair(same: bool) -> SentencePair {
        SentencePair {
            text_a: "a".into(),
            text_b: "b".into(),
            label: PairLabel::from_same(same),
            source: PairSource::Original,
        }
    }

    #[test]
    fn evaluation_counts() {
        let pairs = vec![pair(true), pair(true), pair(false)];
        let e = evaluate_pairs(&Always(0.5), &pairs, 0.5).unwrap();
        assert!((e.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(e.n, 3);
        assert_eq!(e.kappa, Some(0.0));
        let e = evaluate_pairs(&Always(0.49), &pairs, 0.5).unwrap();
        assert!((e.accuracy - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_fold_rejected() {
        let mut pairs = vec![pair(true); 9];
        pairs.push(pair(false));
        let err = cross_validate(&pairs, 5, &FeatureConfig::default(), &TrainConfig::default(), 1, 0.5)
            .unwrap_err();
        assert!(err.to_string().contains("single pair label"), "{err}");
    }
}
