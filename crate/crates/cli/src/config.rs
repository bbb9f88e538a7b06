use std::fs;
use std::path::{Path, PathBuf};

use behalign::behavior::{NormalizationMode, SuccessDefinition};
use behalign::pairs::{FeatureConfig, PairSizes, TrainConfig};
use behalign::text::DistScope;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Markdown,
}

/// Every knob of a run. Flat, so that it maps one-to-one onto a TOML file
/// and onto `--set key=value` overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dialogues: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub preferences: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub eval_pairs: Option<PathBuf>,
    pub hard_pairs: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub system: Option<String>,
    pub system_a: Option<String>,
    pub system_b: Option<String>,

    pub bleu_k: usize,
    pub dist_k: usize,
    pub dist_scope: DistScope,
    pub normalization_mode: NormalizationMode,
    pub markov_t: usize,
    pub alpha: f64,
    pub h_min: f64,
    pub tie_eps: Option<f64>,
    pub success_definition: SuccessDefinition,
    /// Metric names for `agreement` and `synth`: behavior_alignment, bleu@K, dist@K
    /// and, for `agreement` only, implicit.
    pub metrics: Vec<String>,

    pub dim_log2: u32,
    pub word_ngram_max: usize,
    pub char_ngram_min: usize,
    pub char_ngram_max: usize,
    pub side_blocks: bool,
    pub shared_ngram_features: bool,

    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_hard: usize,
    pub accuracy_threshold: f64,
    pub test_fraction: f64,
    pub folds: usize,

    pub pool_size: usize,
    pub ratios: Vec<f64>,

    pub b: usize,
    pub seed: u64,
    pub quantiles: [f64; 2],

    pub format: Format,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let features = FeatureConfig::default();
        let train = TrainConfig::default();
        let sizes = PairSizes::default();
        RunConfig {
            dialogues: None,
            responses: None,
            preferences: None,
            pairs: None,
            eval_pairs: None,
            hard_pairs: None,
            model: None,
            system: None,
            system_a: None,
            system_b: None,
            bleu_k: 2,
            dist_k: 2,
            dist_scope: DistScope::default(),
            normalization_mode: NormalizationMode::default(),
            markov_t: 2,
            alpha: 1.0,
            h_min: 0.1,
            tie_eps: None,
            success_definition: SuccessDefinition::default(),
            metrics: vec!["behavior_alignment".into(), "bleu@2".into(), "dist@2".into()],
            dim_log2: features.dim_log2,
            word_ngram_max: features.word_ngram_max,
            char_ngram_min: features.char_ngram_min,
            char_ngram_max: features.char_ngram_max,
            side_blocks: features.side_blocks,
            shared_ngram_features: features.shared_ngram_features,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            l2: train.l2,
            threshold: behalign::pairs::DEFAULT_THRESHOLD,
            n_pos: sizes.n_pos,
            n_neg: sizes.n_neg,
            n_hard: sizes.n_hard,
            accuracy_threshold: behalign::pairs::DEFAULT_ACCURACY_THRESHOLD,
            test_fraction: 0.2,
            folds: 5,
            pool_size: behalign::synth::DEFAULT_POOL_SIZE,
            ratios: behalign::synth::default_ratios(),
            b: 1000,
            seed: 42,
            quantiles: [
                behalign::agreement::DEFAULT_QUANTILES.0,
                behalign::agreement::DEFAULT_QUANTILES.1,
            ],
            format: Format::Json,
            out: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            dim_log2: self.dim_log2,
            word_ngram_max: self.word_ngram_max,
            char_ngram_min: self.char_ngram_min,
            char_ngram_max: self.char_ngram_max,
            side_blocks: self.side_blocks,
            shared_ngram_features: self.shared_ngram_features,
        }
    }

    /// Training uses the run seed.
    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: self.l2,
            seed: self.seed,
        }
    }

    pub fn sizes(&self) -> PairSizes {
        PairSizes {
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            n_hard: self.n_hard,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses the right-hand side of `key=value`. Anything that is not a TOML
/// literal is taken as a bare string, so paths need no quoting.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn parse_override(s: &str) -> Result<(String, toml::Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{s}' is not of the form key=value")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(CliError::Usage(format!("override '{s}' has an empty key")));
    }
    Ok((key.to_string(), override_value(v.trim())))
}

/// Defaults, then the file, then `overrides` in order.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, toml::Value)],
) -> Result<RunConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
        return Err(CliError::Data(format!(
            "config must be flat key = value pairs; '{k}' is a table"
        )));
    }
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    // Going through text keeps the offending key in the error snippet.
    let text = toml::to_string(&table).expect("table serializes");
    toml::from_str::<RunConfig>(&text).map_err(|e| CliError::Data(format!("config: {e}")))
}
