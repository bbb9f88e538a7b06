use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{featurize_text, FeatureConfig, FeatureVector};
use super::linear::{fit_softmax, TrainConfig};
use crate::corpus::BehaviorLabel;
use crate::error::{Error, Result};

const K: usize = BehaviorLabel::COUNT;

/// Softmax regression over the thirteen behaviors.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub features: FeatureConfig,
    pub train: TrainConfig,
    /// Feature-major: weight of feature `j` for class `c` at `j * 13 + c`.
    pub weights: Vec<f64>,
    pub bias: [f64; K],
    pub loss_history: Vec<f64>,
}

impl MulticlassModel {
    pub fn proba_features(&self, x: &FeatureVector) -> [f64; K] {
        let mut z = self.bias;
        for &(j, v) in &x.entries {
            let row = &self.weights[j as usize * K..(j as usize + 1) * K];
            for (zc, wc) in z.iter_mut().zip(row) {
                *zc += wc * v;
            }
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in &mut z {
            *v = (*v - m).exp();
            s += *v;
        }
        z.map(|v| v / s)
    }

    pub fn predict_proba(&self, text: &str) -> Result<[f64; K]> {
        Ok(self.proba_features(&featurize_text(text, &self.features)?))
    }

    /// Most probable behavior; ties go to the earlier label.
    pub fn predict(&self, text: &str) -> Result<BehaviorLabel> {
        let p = self.predict_proba(text)?;
        let best = (0..K).fold(0, |b, c| if p[c] > p[b] { c } else { b });
        Ok(BehaviorLabel::ALL[best])
    }
}

pub fn train_multiclass(
    sentences: &[(String, BehaviorLabel)],
    features: &FeatureConfig,
    train: &TrainConfig,
) -> Result<MulticlassModel> {
    features.validate()?;
    let distinct: BTreeSet<BehaviorLabel> = sentences.iter().map(|s| s.1).collect();
    if distinct.len() < 2 {
        return Err(Error::invalid(format!(
            "multiclass training needs at least 2 distinct labels, got {}",
            distinct.len()
        )));
    }
    let xs: Vec<FeatureVector> = sentences
        .par_iter()
        .map(|(t, _)| featurize_text(t, features))
        .collect::<Result<_>>()?;
    let ys: Vec<usize> = sentences.iter().map(|s| s.1.index()).collect();
    let fit = fit_softmax(xs.as_slice(), &ys, K, features.text_dim(), train)?;
    Ok(MulticlassModel {
        features: features.clone(),
        train: train.clone(),
        weights: fit.weights,
        bias: fit.bias.try_into().expect("13 biases"),
        loss_history: fit.loss_history,
    })
}

/// Rows are true labels, columns predictions, both in [`BehaviorLabel::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: BehaviorLabel, predicted: BehaviorLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn row_total(&self, label: BehaviorLabel) -> u64 {
        self.counts[label.index()].iter().sum()
    }

    pub fn column_total(&self, label: BehaviorLabel) -> u64 {
        self.counts.iter().map(|r| r[label.index()]).sum()
    }

    /// Diagonal over row sum for every class with at least one test item.
    pub fn per_class_accuracy(&self) -> BTreeMap<BehaviorLabel, f64> {
        BehaviorLabel::ALL
            .iter()
            .filter(|&&l| self.row_total(l) > 0)
            .map(|&l| (l, self.counts[l.index()][l.index()] as f64 / self.row_total(l) as f64))
            .collect()
    }
}

pub fn confusion_and_accuracy(
    model: &MulticlassModel,
    test: &[(String, BehaviorLabel)],
) -> Result<(ConfusionMatrix, BTreeMap<BehaviorLabel, f64>)> {
    let predicted: Vec<BehaviorLabel> = test
        .par_iter()
        .map(|(t, _)| model.predict(t))
        .collect::<Result<_>>()?;
    let mut m = ConfusionMatrix::default();
    for ((_, truth), p) in test.iter().zip(predicted) {
        m.add(*truth, p);
    }
    let acc = m.per_class_accuracy();
    Ok((m, acc))
}

type Labeled = Vec<(String, BehaviorLabel)>;

/// Seeded split into (train, test), stratified per label so that every label
/// with at least two sentences appears on both sides.
pub fn split_labeled(
    sentences: &[(String, BehaviorLabel)],
    test_fraction: f64,
    seed: u64,
) -> Result<(Labeled, Labeled)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_label: BTreeMap<BehaviorLabel, Vec<usize>> = BTreeMap::new();
    for (i, s) in sentences.iter().enumerate() {
        by_label.entry(s.1).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_label.values_mut() {
        idx.shuffle(&mut rng);
        let n_test = if idx.len() < 2 {
            0
        } else {
            ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1)
        };
        test.extend(idx[..n_test].iter().map(|&i| sentences[i].clone()));
        train.extend(idx[n_test..].iter().map(|&i| sentences[i].clone()));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use BehaviorLabel::*;

    fn small() -> FeatureConfig {
        FeatureConfig {
            dim_log2: 10,
            ..FeatureConfig::default()
        }
    }

    fn corpus() -> Vec<(String, BehaviorLabel)> {
        let mut out = Vec::new();
        for i in 0..6 {
            out.push((format!("have you seen movie {i} recently"), ExperienceInquiry));
            out.push((format!("I think film {i} is wonderful"), PersonalOpinion));
            out.push((format!("can I help you find {i} more"), OfferHelp));
        }
        out
    }

    #[test]
    fn probabilities_normalize_and_predictions_fit() {
        let m = train_multiclass(&corpus(), &small(), &TrainConfig { batch_size: 4, ..TrainConfig::default() }).unwrap();
        for (t, l) in corpus() {
            let p = m.predict_proba(&t).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(m.predict(&t).unwrap(), l);
        }
        let (cm, acc) = confusion_and_accuracy(&m, &corpus()).unwrap();
        assert_eq!(cm.row_total(OfferHelp), 6);
        assert_eq!(acc.len(), 3);
        assert!(acc.values().all(|&a| a == 1.0));
    }

    #[test]
    fn single_label_rejected() {
        let one: Vec<_> = corpus().into_iter().filter(|s| s.1 == OfferHelp).collect();
        assert!(train_multiclass(&one, &small(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn confusion_accuracy_from_rows() {
        let mut cm = ConfusionMatrix::default();
        for _ in 0..3 {
            cm.add(Similarity, Similarity);
        }
        cm.add(Similarity, Acknowledgment);
        let acc = cm.per_class_accuracy();
        assert_eq!(acc[&Similarity], 0.75);
        assert!(!acc.contains_key(&Acknowledgment));
        assert_eq!(cm.column_total(Acknowledgment), 1);
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let data = corpus();
        let (tr, te) = split_labeled(&data, 0.2, 3).unwrap();
        assert_eq!(tr.len() + te.len(), data.len());
        for l in [ExperienceInquiry, PersonalOpinion, OfferHelp] {
            assert!(te.iter().any(|s| s.1 == l) && tr.iter().any(|s| s.1 == l));
        }
        assert_eq!(split_labeled(&data, 0.2, 3).unwrap(), (tr, te));
        assert!(split_labeled(&data, 1.0, 3).is_err());
    }
}
