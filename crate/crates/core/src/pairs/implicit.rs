//! Behavior Alignment estimated from texts alone.

use std::collections::HashMap;

use rayon::prelude::*;

use super::cv::DEFAULT_THRESHOLD;
use super::model::PairScorer;
use crate::agreement::InstanceMetric;
use crate::behavior::{AlignmentReport, InstanceScore, NormalizationMode};
use crate::corpus::{BehaviorLabel, EvalInstance};
use crate::error::{Error, Result};

/// Scorer that looks up the true label of each text. Returns exactly 1 or 0.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    labels: HashMap<String, BehaviorLabel>,
}

impl OracleScorer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails if the text is already known under a different label.
    pub fn insert(&mut self, text: &str, label: BehaviorLabel) -> Result<()> {
        match self.labels.insert(text.to_string(), label) {
            Some(old) if old != label => Err(Error::invalid(format!(
                "text {text:?} labeled both {old} and {label}"
            ))),
            _ => Ok(()),
        }
    }

    /// Collects every labeled human and system text in `instances`.
    pub fn from_instances(instances: &[EvalInstance]) -> Result<Self> {
        let mut o = Self::new();
        for inst in instances {
            if let Some(h) = inst.human_behavior {
                o.insert(&inst.human_text, h)?;
            }
            for r in inst.system_responses.values() {
                if let Some(b) = r.behavior {
                    o.insert(&r.text, b)?;
                }
            }
        }
        Ok(o)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl PairScorer for OracleScorer {
    fn same_probability(&self, text_a: &str, text_b: &str) -> Result<f64> {
        let get = |t: &str| {
            self.labels
                .get(t)
                .copied()
                .ok_or_else(|| Error::invalid(format!("oracle has no label for {t:?}")))
        };
        Ok(if get(text_a)? == get(text_b)? { 1.0 } else { 0.0 })
    }
}

fn implicit_score(
    scorer: &dyn PairScorer,
    inst: &EvalInstance,
    system: &str,
    threshold: f64,
) -> Result<u8> {
    let resp = inst.response(system).ok_or_else(|| {
        Error::invalid(format!(
            "instance {} has no response from system '{system}'",
            inst.instance_id
        ))
    })?;
    let p = scorer.same_probability(&resp.text, &inst.human_text)?;
    Ok(u8::from(p >= threshold))
}

/// Same aggregation as explicit Behavior Alignment, with the per-turn match
/// decided by `scorer(system text, human text) >= threshold`.
pub fn implicit_behavior_alignment(
    scorer: &dyn PairScorer,
    instances: &[EvalInstance],
    system: &str,
    mode: NormalizationMode,
    threshold: f64,
) -> Result<AlignmentReport> {
    let scored: Vec<&EvalInstance> = instances.iter().filter(|i| i.is_scored()).collect();
    let n_first = instances.len() - scored.len();
    let per_instance = scored
        .par_iter()
        .map(|inst| {
            Ok(InstanceScore {
                instance_id: inst.instance_id.clone(),
                ba: implicit_score(scorer, inst, system, threshold)?,
                weight: 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AlignmentReport::from_scores(system, per_instance, mode, n_first)
}

/// Per-turn implicit Behavior Alignment as an agreement metric.
pub struct ImplicitBaMetric<'s> {
    pub scorer: &'s dyn PairScorer,
    pub threshold: f64,
}

impl<'s> ImplicitBaMetric<'s> {
    pub fn new(scorer: &'s dyn PairScorer) -> Self {
        ImplicitBaMetric {
            scorer,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl InstanceMetric for ImplicitBaMetric<'_> {
    fn name(&self) -> String {
        "implicit_behavior_alignment".into()
    }

    fn default_tie_eps(&self) -> f64 {
        0.0
    }

    fn score(&self, instance: &EvalInstance, system: &str) -> Result<f64> {
        Ok(f64::from(implicit_score(self.scorer, instance, system, self.threshold)?))
    }
}
