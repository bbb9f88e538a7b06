//! Implicit Behavior Alignment: a hashed n-gram pair classifier deciding
//! whether two responses share a behavior, plus the tooling to train it.

pub mod cv;
pub mod features;
pub mod implicit;
pub mod linear;
pub mod mining;
pub mod model;
pub mod multiclass;
pub mod sampling;

pub use cv::{cross_validate, evaluate_pairs, fold_indices, CvReport, PairEvaluation, DEFAULT_THRESHOLD};
pub use features::{featurize_pair, featurize_text, FeatureConfig, FeatureVector};
pub use implicit::{implicit_behavior_alignment, ImplicitBaMetric, OracleScorer};
pub use linear::TrainConfig;
pub use mining::{mine_hard_negative_classes, HardPair, DEFAULT_ACCURACY_THRESHOLD};
pub use model::{predict_same, train_pair_classifier, PairClassifierModel, PairScorer, TrainingSetKind};
pub use multiclass::{confusion_and_accuracy, split_labeled, train_multiclass, ConfusionMatrix, MulticlassModel};
pub use sampling::{build_training_sets, PairSizes, TrainingSets};
