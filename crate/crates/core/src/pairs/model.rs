use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{
    assemble_pair, featurize_pair, interaction_block, text_block, Analyzed, FeatureConfig, FeatureVector,
};
use super::linear::{fit_logistic, sigmoid, Rows, TrainConfig};
use crate::corpus::{PairSource, SentencePair};
use crate::error::{Error, Result};

/// Anything that can estimate whether two responses share a behavior.
pub trait PairScorer: Sync {
    /// Probability-like score; at or above the decision threshold means
    /// "same behavior".
    fn same_probability(&self, text_a: &str, text_b: &str) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSetKind {
    Original,
    MixedHard,
}

impl TrainingSetKind {
    /// `MixedHard` when any pair came from hard-negative mining.
    pub fn infer(pairs: &[SentencePair]) -> Self {
        if pairs.iter().any(|p| p.source == PairSource::HardNegative) {
            TrainingSetKind::MixedHard
        } else {
            TrainingSetKind::Original
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairClassifierModel {
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub training_set_kind: TrainingSetKind,
    /// Length `features.pair_dim()`.
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Training objective at initialization and after each epoch.
    pub loss_history: Vec<f64>,
}

const P_FLOOR: f64 = 1e-12;

impl PairClassifierModel {
    pub fn score(&self, x: &FeatureVector) -> f64 {
        sigmoid(x.dot(&self.weights) + self.bias).clamp(P_FLOOR, 1.0 - P_FLOOR)
    }
}

impl PairScorer for PairClassifierModel {
    fn same_probability(&self, text_a: &str, text_b: &str) -> Result<f64> {
        predict_same(self, text_a, text_b)
    }
}

/// Probability that the two texts use the same behavior; strictly inside (0, 1).
pub fn predict_same(model: &PairClassifierModel, text_a: &str, text_b: &str) -> Result<f64> {
    Ok(model.score(&featurize_pair(text_a, text_b, &model.features)?))
}

/// Pair features assembled from per-sentence blocks that are computed once
/// per distinct text.
pub(crate) struct PairRows<'c> {
    cfg: &'c FeatureConfig,
    sides: Vec<FeatureVector>,
    /// (side of a, side of b, interaction block)
    pairs: Vec<(usize, usize, FeatureVector)>,
}

impl<'c> PairRows<'c> {
    pub(crate) fn build(pairs: &[SentencePair], cfg: &'c FeatureConfig) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut texts: Vec<&str> = Vec::new();
        let mut ids = Vec::with_capacity(pairs.len());
        for (n, p) in pairs.iter().enumerate() {
            if p.text_a.trim().is_empty() || p.text_b.trim().is_empty() {
                return Err(Error::invalid(format!("pair {} has an empty text", n + 1)));
            }
            let mut side = [0usize; 2];
            for (slot, t) in side.iter_mut().zip([p.text_a.as_str(), p.text_b.as_str()]) {
                *slot = *index.entry(t).or_insert_with(|| {
                    texts.push(t);
                    texts.len() - 1
                });
            }
            ids.push((side[0], side[1]));
        }
        let analyzed: Vec<Analyzed> = texts.par_iter().map(|t| Analyzed::new(t, cfg)).collect();
        let sides = analyzed.par_iter().map(|a| text_block(a, cfg)).collect();
        let pairs = ids
            .par_iter()
            .map(|&(a, b)| (a, b, interaction_block(&analyzed[a], &analyzed[b], cfg)))
            .collect();
        Ok(PairRows { cfg, sides, pairs })
    }
}

impl Rows for PairRows<'_> {
    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn fill(&self, i: usize, buf: &mut Vec<(u32, f64)>) {
        let (a, b, ref inter) = self.pairs[i];
        assemble_pair(&self.sides[a], &self.sides[b], inter, self.cfg, buf);
    }
}

/// Logistic regression on pair features.
pub fn train_pair_classifier(
    pairs: &[SentencePair],
    features: &FeatureConfig,
    train: &TrainConfig,
) -> Result<PairClassifierModel> {
    features.validate()?;
    let labels: Vec<bool> = pairs.iter().map(|p| p.label.is_same()).collect();
    if !(labels.contains(&true) && labels.contains(&false)) {
        return Err(Error::invalid(
            "pair training data needs both same_behavior and different_behavior pairs",
        ));
    }
    let rows = PairRows::build(pairs, features)?;
    let fit = fit_logistic(&rows, &labels, features.pair_dim(), train)?;
    Ok(PairClassifierModel {
        features: features.clone(),
        train: train.clone(),
        training_set_kind: TrainingSetKind::infer(pairs),
        weights: fit.weights,
        bias: fit.bias,
        loss_history: fit.loss_history,
    })
}

pub const MODEL_FORMAT: &str = "behalign-pair-classifier";
pub const MODEL_VERSION: u32 = 1;

/// On-disk form. Only non-zero weights are stored.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    feature_config: FeatureConfig,
    feature_config_hash: String,
    train_config: TrainConfig,
    training_set_kind: TrainingSetKind,
    dim: usize,
    bias: f64,
    weights: Vec<(u32, f64)>,
    loss_history: Vec<f64>,
}

impl PairClassifierModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_config: self.features.clone(),
            feature_config_hash: self.features.fingerprint(),
            train_config: self.train.clone(),
            training_set_kind: self.training_set_kind,
            dim: self.weights.len(),
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
            loss_history: self.loss_history.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::Model(format!("cannot decode: {e}")))?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported container {} v{}",
                f.format, f.version
            )));
        }
        if f.feature_config.fingerprint() != f.feature_config_hash {
            return Err(Error::Model(format!(
                "feature config hash mismatch: file says {}, config hashes to {}",
                f.feature_config_hash,
                f.feature_config.fingerprint()
            )));
        }
        f.feature_config.validate()?;
        if f.dim != f.feature_config.pair_dim() {
            return Err(Error::Model(format!(
                "dim {} does not match feature config ({})",
                f.dim,
                f.feature_config.pair_dim()
            )));
        }
        let mut weights = vec![0.0; f.dim];
        for (i, w) in f.weights {
            *weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::Model(format!("weight index {i} out of range")))? = w;
        }
        Ok(PairClassifierModel {
            features: f.feature_config,
            train: f.train_config,
            training_set_kind: f.training_set_kind,
            weights,
            bias: f.bias,
            loss_history: f.loss_history,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// Loads a model and checks that it was trained with `expected` features.
    pub fn load_expecting(path: impl AsRef<Path>, expected: &FeatureConfig) -> Result<Self> {
        let m = Self::load(path)?;
        if m.features.fingerprint() != expected.fingerprint() {
            return Err(Error::Model(format!(
                "model was trained with feature config {}, expected {}",
                m.features.fingerprint(),
                expected.fingerprint()
            )));
        }
        Ok(m)
    }
}
