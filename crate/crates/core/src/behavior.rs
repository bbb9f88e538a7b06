//! Explicit Behavior Alignment and related behavior statistics.
//!
//! A system's response at a turn aligns with the human reference when both
//! carry the same strategy label. The score of a test collection is the
//! fraction of aligned turns, leaving out each conversation's first turn.
//!
//! [`weighted_behavior_alignment`] scales each turn by the inverse entropy of
//! the next-behavior distribution at that stage, estimated by a
//! [`BehaviorMarkovModel`] over human recommender behavior sequences.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{BehaviorLabel, Dialogue, EvalInstance, Speaker, Turn};
use crate::error::{Error, Result};

/// 1 if the two strategies are identical, 0 otherwise.
pub fn ba_pair(system: BehaviorLabel, human: BehaviorLabel) -> u8 {
    u8::from(system == human)
}

/// What the sum of per-turn scores is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Number of scored turns, so perfect alignment is 1.0.
    #[default]
    ScoredTurns,
    /// Number of scored turns plus the excluded first turns.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub ba: u8,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub system: String,
    pub per_instance: Vec<InstanceScore>,
    pub aggregate: f64,
    pub normalization_mode: NormalizationMode,
    pub n_scored: usize,
    /// First-turn instances seen but not scored.
    pub n_first_turn: usize,
}

impl AlignmentReport {
    pub(crate) fn from_scores(
        system: &str,
        per_instance: Vec<InstanceScore>,
        mode: NormalizationMode,
        n_first_turn: usize,
    ) -> Result<Self> {
        if per_instance.is_empty() {
            return Err(Error::NoScoredInstances);
        }
        let mut report = AlignmentReport {
            system: system.to_string(),
            n_scored: per_instance.len(),
            per_instance,
            aggregate: 0.0,
            normalization_mode: mode,
            n_first_turn,
        };
        report.aggregate = report.recompute();
        Ok(report)
    }

    /// The aggregate as implied by `per_instance` alone.
    pub fn recompute(&self) -> f64 {
        let (num, den) = self
            .per_instance
            .iter()
            .fold((0.0, 0.0), |(n, d), s| (n + s.weight * f64::from(s.ba), d + s.weight));
        let den = match self.normalization_mode {
            NormalizationMode::ScoredTurns => den,
            NormalizationMode::PaperLiteral => den + self.n_first_turn as f64,
        };
        num / den
    }

    /// Writes `instance_id,ba,weight` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::invalid(format!("csv output: {e}"));
        out.write_record(["instance_id", "ba", "weight"]).map_err(io)?;
        for s in &self.per_instance {
            out.write_record([s.instance_id.clone(), s.ba.to_string(), s.weight.to_string()])
                .map_err(io)?;
        }
        out.flush().map_err(|e| Error::io("<output>", e))
    }
}

type Scored<'a> = Vec<(&'a EvalInstance, BehaviorLabel, BehaviorLabel)>;

/// Returns (scored instances, number of first-turn instances). Scored
/// instances lacking either label are collected into one error.
fn labeled_scored<'a>(
    instances: &'a [EvalInstance],
    system: &str,
) -> Result<(Scored<'a>, usize)> {
    let mut scored = Vec::new();
    let mut missing = Vec::new();
    let mut first = 0;
    for inst in instances {
        if !inst.is_scored() {
            first += 1;
            continue;
        }
        let sys = inst.response(system).and_then(|r| r.behavior);
        match (sys, inst.human_behavior) {
            (Some(s), Some(h)) => scored.push((inst, s, h)),
            _ => missing.push(inst.instance_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    if scored.is_empty() {
        return Err(Error::NoScoredInstances);
    }
    Ok((scored, first))
}

/// Behavior Alignment of `system` over `instances`.
pub fn behavior_alignment(
    instances: &[EvalInstance],
    system: &str,
    mode: NormalizationMode,
) -> Result<AlignmentReport> {
    let (scored, first) = labeled_scored(instances, system)?;
    let per_instance = scored
        .into_iter()
        .map(|(inst, s, h)| InstanceScore {
            instance_id: inst.instance_id.clone(),
            ba: ba_pair(s, h),
            weight: 1.0,
        })
        .collect();
    AlignmentReport::from_scores(system, per_instance, mode, first)
}

/// Next-behavior counts conditioned on up to `order` preceding behaviors.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorMarkovModel {
    order: usize,
    alpha: f64,
    /// History (oldest first) → counts indexed by [`BehaviorLabel::index`].
    counts: BTreeMap<Vec<BehaviorLabel>, [u64; BehaviorLabel::COUNT]>,
}

impl BehaviorMarkovModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self, history: &[BehaviorLabel]) -> Option<&[u64; BehaviorLabel::COUNT]> {
        self.counts.get(history)
    }

    pub fn histories(&self) -> impl Iterator<Item = &[BehaviorLabel]> {
        self.counts.keys().map(Vec::as_slice)
    }

    /// Add-alpha smoothed next-behavior distribution. `None` when the history
    /// was never observed and there is no smoothing mass.
    pub fn distribution(&self, history: &[BehaviorLabel]) -> Option<[f64; BehaviorLabel::COUNT]> {
        let zero = [0u64; BehaviorLabel::COUNT];
        let counts = self.counts.get(history).unwrap_or(&zero);
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + self.alpha * BehaviorLabel::COUNT as f64;
        if denom <= 0.0 {
            return None;
        }
        Some(counts.map(|c| (c as f64 + self.alpha) / denom))
    }

    /// Pooled distribution over every counted outcome, used as the last
    /// back-off level.
    fn marginal(&self) -> [f64; BehaviorLabel::COUNT] {
        let mut pooled = [0u64; BehaviorLabel::COUNT];
        for c in self.counts.values() {
            for (p, v) in pooled.iter_mut().zip(c) {
                *p += v;
            }
        }
        let denom = pooled.iter().sum::<u64>() as f64 + self.alpha * BehaviorLabel::COUNT as f64;
        if denom <= 0.0 {
            return [1.0 / BehaviorLabel::COUNT as f64; BehaviorLabel::COUNT];
        }
        pooled.map(|c| (c as f64 + self.alpha) / denom)
    }
}

/// Recommender behavior runs of a dialogue. An unlabeled recommender turn
/// ends a run; seeker turns are skipped.
fn behavior_runs(turns: &[Turn]) -> Vec<Vec<BehaviorLabel>> {
    let mut runs = vec![Vec::new()];
    for t in turns.iter().filter(|t| t.speaker == Speaker::Recommender) {
        match t.behavior {
            Some(b) => runs.last_mut().unwrap().push(b),
            None => runs.push(Vec::new()),
        }
    }
    runs.retain(|r| !r.is_empty());
    runs
}

pub fn fit_markov(dialogues: &[Dialogue], order: usize, alpha: f64) -> Result<BehaviorMarkovModel> {
    if order == 0 {
        return Err(Error::invalid("markov order must be >= 1"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("smoothing alpha must be >= 0, got {alpha}")));
    }
    let mut counts: BTreeMap<Vec<BehaviorLabel>, [u64; BehaviorLabel::COUNT]> = BTreeMap::new();
    let mut any_label = false;
    for d in dialogues {
        for run in behavior_runs(&d.turns) {
            any_label = true;
            for i in 1..run.len() {
                let history = run[i.saturating_sub(order)..i].to_vec();
                counts.entry(history).or_insert([0; BehaviorLabel::COUNT])[run[i].index()] += 1;
            }
        }
    }
    if !any_label {
        return Err(Error::invalid("no labeled recommender turns to fit a behavior model"));
    }
    Ok(BehaviorMarkovModel {
        order,
        alpha,
        counts,
    })
}

fn entropy_bits(p: &[f64]) -> f64 {
    // -0.0 from an all-zero sum would print oddly; max clamps it.
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Entropy, in bits, of the smoothed next-behavior distribution after
/// `history` (oldest first).
pub fn conditional_entropy(model: &BehaviorMarkovModel, history: &[BehaviorLabel]) -> Result<f64> {
    if history.len() > model.order {
        return Err(Error::invalid(format!(
            "history of length {} exceeds model order {}",
            history.len(),
            model.order
        )));
    }
    model
        .distribution(history)
        .map(|p| entropy_bits(&p))
        .ok_or_else(|| {
            Error::numeric(format!(
                "history [{}] never observed and alpha = 0",
                history.iter().map(|b| b.as_str()).collect::<Vec<_>>().join(", ")
            ))
        })
}

/// Entropy for weighting: the full history when it is defined, otherwise the
/// longest observed suffix, finally the pooled outcome distribution.
fn stage_entropy(model: &BehaviorMarkovModel, history: &[BehaviorLabel]) -> f64 {
    for start in 0..=history.len() {
        if let Some(p) = model.distribution(&history[start..]) {
            return entropy_bits(&p);
        }
    }
    entropy_bits(&model.marginal())
}

/// The most recent labeled human recommender behaviors before the scored
/// turn, oldest first, at most `order` of them.
pub fn human_history(context: &[Turn], order: usize) -> Vec<BehaviorLabel> {
    let mut h: Vec<BehaviorLabel> = context
        .iter()
        .rev()
        .filter(|t| t.speaker == Speaker::Recommender)
        .map_while(|t| t.behavior)
        .take(order)
        .collect();
    h.reverse();
    h
}

/// Behavior Alignment with each turn weighted by `1 / max(H, h_min)`, where H
/// is the entropy of the next behavior given the human reference history.
pub fn weighted_behavior_alignment(
    instances: &[EvalInstance],
    system: &str,
    model: &BehaviorMarkovModel,
    h_min: f64,
) -> Result<AlignmentReport> {
    if !(h_min > 0.0) {
        return Err(Error::invalid(format!("h_min must be > 0, got {h_min}")));
    }
    let (scored, first) = labeled_scored(instances, system)?;
    let per_instance = scored
        .into_iter()
        .map(|(inst, s, h)| {
            let history = human_history(&inst.context, model.order);
            let entropy = stage_entropy(model, &history);
            InstanceScore {
                instance_id: inst.instance_id.clone(),
                ba: ba_pair(s, h),
                weight: 1.0 / entropy.max(h_min),
            }
        })
        .collect();
    AlignmentReport::from_scores(system, per_instance, NormalizationMode::ScoredTurns, first)
}

/// 1-based position, among recommender turns only, of the first turn that
/// makes a recommendation.
pub fn turns_before_first_rec(dialogue: &Dialogue) -> Option<usize> {
    dialogue
        .turns
        .iter()
        .filter(|t| t.speaker == Speaker::Recommender)
        .position(|t| t.is_recommendation)
        .map(|i| i + 1)
}

/// Which recommendations count toward the success rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessDefinition {
    First,
    #[default]
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationStats {
    pub n_dialogues: usize,
    pub n_recommending: usize,
    /// Mean of [`turns_before_first_rec`] over recommending dialogues.
    pub mean_turns_before_rec: Option<f64>,
    /// Fraction of recommending dialogues with an accepted recommendation.
    pub success_rate: Option<f64>,
    pub success_definition: SuccessDefinition,
    /// Labeled recommender turns per behavior.
    pub behavior_counts: BTreeMap<String, usize>,
}

pub fn recommendation_stats(dialogues: &[Dialogue], success: SuccessDefinition) -> RecommendationStats {
    let mut firsts = Vec::new();
    let mut successes = 0usize;
    let mut behavior_counts = BTreeMap::new();
    for d in dialogues {
        for t in d.turns.iter().filter(|t| t.speaker == Speaker::Recommender) {
            if let Some(b) = t.behavior {
                *behavior_counts.entry(b.as_str().to_string()).or_insert(0) += 1;
            }
        }
        let Some(first) = turns_before_first_rec(d) else {
            continue;
        };
        firsts.push(first);
        let mut recs = d
            .turns
            .iter()
            .filter(|t| t.speaker == Speaker::Recommender && t.is_recommendation);
        let ok = match success {
            SuccessDefinition::First => recs.next().and_then(|t| t.accepted) == Some(true),
            SuccessDefinition::Any => recs.any(|t| t.accepted == Some(true)),
        };
        if ok {
            successes += 1;
        }
    }
    let n = firsts.len();
    RecommendationStats {
        n_dialogues: dialogues.len(),
        n_recommending: n,
        mean_turns_before_rec: (n > 0).then(|| firsts.iter().sum::<usize>() as f64 / n as f64),
        success_rate: (n > 0).then(|| successes as f64 / n as f64),
        success_definition: success,
        behavior_counts,
    }
}
