//! Agreement between metric-derived preferences and human preferences.
//!
//! For each judged instance the metric scores both systems' responses, the
//! score difference becomes a verdict, and Cohen's kappa compares those
//! verdicts against the human ones. Confidence intervals come from a
//! percentile bootstrap over judged instances.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::ba_pair;
use crate::corpus::{EvalInstance, PreferenceJudgment, Verdict};
use crate::error::{Error, Result};
use crate::text::{bleu_k, dist_k, tokenize, DistScope};

pub const DEFAULT_QUANTILES: (f64, f64) = (0.025, 0.975);

/// Redraws allowed per resample when the statistic is undefined on it.
pub const MAX_REDRAWS: usize = 1000;

pub fn derive_preference(score_a: f64, score_b: f64, tie_eps: f64) -> Verdict {
    if score_a > score_b + tie_eps {
        Verdict::ABetter
    } else if score_b > score_a + tie_eps {
        Verdict::BBetter
    } else {
        Verdict::Same
    }
}

/// Observed and chance agreement (p_o, p_e) of two raters.
pub fn kappa_components<T: Eq + Hash>(x: &[T], y: &[T]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "kappa needs equal-length label sequences, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("kappa of empty label sequences"));
    }
    let n = x.len() as f64;
    let mut agree = 0usize;
    let mut mx: HashMap<&T, usize> = HashMap::new();
    let mut my: HashMap<&T, usize> = HashMap::new();
    for (a, b) in x.iter().zip(y) {
        if a == b {
            agree += 1;
        }
        *mx.entry(a).or_default() += 1;
        *my.entry(b).or_default() += 1;
    }
    let p_e = mx
        .iter()
        .map(|(k, &cx)| (cx as f64 / n) * (my.get(k).copied().unwrap_or(0) as f64 / n))
        .sum();
    Ok((agree as f64 / n, p_e))
}

/// Cohen's kappa over the union of both label sets.
///
/// When both raters use one and the same label throughout, chance agreement
/// is 1 and the ratio is 0/0; that case is defined as 1.0.
pub fn cohens_kappa<T: Eq + Hash>(x: &[T], y: &[T]) -> Result<f64> {
    let (p_o, p_e) = kappa_components(x, y)?;
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Kappa that is undefined (`None`) in the constant-marginals case. Used as a
/// bootstrap statistic so such resamples are redrawn.
pub fn kappa_if_defined<T: Eq + Hash>(x: &[T], y: &[T]) -> Option<f64> {
    let (p_o, p_e) = kappa_components(x, y).ok()?;
    (p_e < 1.0).then(|| (p_o - p_e) / (1.0 - p_e))
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval of `statistic`.
///
/// Resample `i` draws from its own ChaCha stream `(seed, i)`, so the result
/// does not depend on how resamples are scheduled. A resample on which the
/// statistic returns `None` is redrawn from the same stream.
pub fn bootstrap_ci<T, F>(
    items: &[T],
    statistic: F,
    b: usize,
    seed: u64,
    quantiles: (f64, f64),
) -> Result<(f64, f64)>
where
    T: Sync,
    F: Fn(&[&T]) -> Option<f64> + Sync,
{
    if b == 0 {
        return Err(Error::invalid("bootstrap needs b >= 1"));
    }
    if items.is_empty() {
        return Err(Error::invalid("bootstrap over zero items"));
    }
    let (q_lo, q_hi) = quantiles;
    if !(0.0..=1.0).contains(&q_lo) || !(0.0..=1.0).contains(&q_hi) || q_lo > q_hi {
        return Err(Error::invalid(format!("bad quantiles ({q_lo}, {q_hi})")));
    }
    let n = items.len();
    let stats: Result<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut sample: Vec<&T> = Vec::with_capacity(n);
            for _ in 0..MAX_REDRAWS {
                sample.clear();
                sample.extend((0..n).map(|_| &items[rng.gen_range(0..n)]));
                if let Some(v) = statistic(&sample) {
                    return Ok(v);
                }
            }
            Err(Error::numeric(format!(
                "statistic undefined on {MAX_REDRAWS} consecutive draws of resample {i}"
            )))
        })
        .collect();
    let mut stats = stats?;
    stats.sort_by(f64::total_cmp);
    Ok((quantile(&stats, q_lo), quantile(&stats, q_hi)))
}

/// A per-response score computed against the human reference of an instance.
pub trait InstanceMetric: Sync {
    fn name(&self) -> String;

    /// Verdict tie tolerance used when none is configured.
    fn default_tie_eps(&self) -> f64 {
        1e-9
    }

    fn score(&self, instance: &EvalInstance, system: &str) -> Result<f64>;
}

fn response_text<'a>(instance: &'a EvalInstance, system: &str) -> Result<&'a str> {
    instance
        .response(system)
        .map(|r| r.text.as_str())
        .ok_or_else(|| {
            Error::invalid(format!(
                "instance {} has no response from system '{system}'",
                instance.instance_id
            ))
        })
}

/// Explicit per-turn Behavior Alignment (0 or 1).
pub struct BehaviorAlignmentMetric;

impl InstanceMetric for BehaviorAlignmentMetric {
    fn name(&self) -> String {
        "behavior_alignment".into()
    }

    fn default_tie_eps(&self) -> f64 {
        0.0
    }

    fn score(&self, instance: &EvalInstance, system: &str) -> Result<f64> {
        response_text(instance, system)?;
        let sys = instance.response(system).and_then(|r| r.behavior);
        match (sys, instance.human_behavior) {
            (Some(s), Some(h)) => Ok(f64::from(ba_pair(s, h))),
            _ => Err(Error::MissingLabels(vec![instance.instance_id.clone()])),
        }
    }
}

/// Sentence BLEU@k of the response against the human reference.
pub struct BleuMetric {
    pub k: usize,
}

impl InstanceMetric for BleuMetric {
    fn name(&self) -> String {
        format!("bleu@{}", self.k)
    }

    fn score(&self, instance: &EvalInstance, system: &str) -> Result<f64> {
        let cand = tokenize(response_text(instance, system)?);
        let reference = tokenize(&instance.human_text);
        if reference.is_empty() {
            return Err(Error::invalid(format!(
                "instance {}: human reference has no tokens",
                instance.instance_id
            )));
        }
        bleu_k(&cand, &reference, self.k)
    }
}

/// DIST@k of the single response.
pub struct DistMetric {
    pub k: usize,
}

impl InstanceMetric for DistMetric {
    fn name(&self) -> String {
        format!("dist@{}", self.k)
    }

    fn score(&self, instance: &EvalInstance, system: &str) -> Result<f64> {
        let toks = tokenize(response_text(instance, system)?);
        dist_k(&[toks], self.k, DistScope::PerResponse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub metric: String,
    pub kappa: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub b: usize,
    pub seed: u64,
    pub n_items: usize,
}

/// One judged instance: the human verdict and the metric's verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerdictPair {
    pub human: Verdict,
    pub metric: Verdict,
}

/// Metric verdicts for every judgment comparing `system_a` with `system_b`
/// (in either order). Judgments of other system pairs are ignored.
pub fn metric_verdicts(
    instances: &[EvalInstance],
    judgments: &[PreferenceJudgment],
    system_a: &str,
    system_b: &str,
    metric: &dyn InstanceMetric,
    tie_eps: f64,
) -> Result<Vec<(String, VerdictPair)>> {
    if !(tie_eps >= 0.0) {
        return Err(Error::invalid(format!("tie_eps must be >= 0, got {tie_eps}")));
    }
    let by_id: HashMap<&str, &EvalInstance> =
        instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
    let mut out = Vec::new();
    for j in judgments {
        let Some(human) = j.verdict_for(system_a, system_b) else {
            continue;
        };
        let inst = by_id.get(j.instance_id.as_str()).ok_or_else(|| {
            Error::invalid(format!("judgment references unknown instance {}", j.instance_id))
        })?;
        let sa = metric.score(inst, system_a)?;
        let sb = metric.score(inst, system_b)?;
        out.push((
            j.instance_id.clone(),
            VerdictPair {
                human,
                metric: derive_preference(sa, sb, tie_eps),
            },
        ));
    }
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "no preference judgments compare '{system_a}' and '{system_b}'"
        )));
    }
    Ok(out)
}

/// Kappa between metric and human verdicts with a bootstrap interval.
pub fn agreement_from_verdicts(
    metric_name: &str,
    pairs: &[VerdictPair],
    b: usize,
    seed: u64,
    quantiles: (f64, f64),
) -> Result<AgreementResult> {
    let human: Vec<Verdict> = pairs.iter().map(|p| p.human).collect();
    let metric: Vec<Verdict> = pairs.iter().map(|p| p.metric).collect();
    let kappa = cohens_kappa(&human, &metric)?;
    let (ci_low, ci_high) = bootstrap_ci(
        pairs,
        |sample: &[&VerdictPair]| {
            let h: Vec<Verdict> = sample.iter().map(|p| p.human).collect();
            let m: Vec<Verdict> = sample.iter().map(|p| p.metric).collect();
            kappa_if_defined(&h, &m)
        },
        b,
        seed,
        quantiles,
    )?;
    Ok(AgreementResult {
        metric: metric_name.to_string(),
        kappa,
        ci_low,
        ci_high,
        b,
        seed,
        n_items: pairs.len(),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn agreement(
    instances: &[EvalInstance],
    judgments: &[PreferenceJudgment],
    system_a: &str,
    system_b: &str,
    metric: &dyn InstanceMetric,
    tie_eps: Option<f64>,
    b: usize,
    seed: u64,
    quantiles: (f64, f64),
) -> Result<AgreementResult> {
    let eps = tie_eps.unwrap_or_else(|| metric.default_tie_eps());
    let verdicts = metric_verdicts(instances, judgments, system_a, system_b, metric, eps)?;
    let pairs: Vec<VerdictPair> = verdicts.into_iter().map(|(_, p)| p).collect();
    agreement_from_verdicts(&metric.name(), &pairs, b, seed, quantiles)
}
