//! Synthetic systems blended from human-preferred and dispreferred responses,
//! and the curve of each metric across blend ratios.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{behavior_alignment, NormalizationMode};
use crate::corpus::{BehaviorLabel, EvalInstance, PreferenceJudgment, SystemResponse, Verdict};
use crate::error::{Error, Result};
use crate::text::{bleu_k, dist_k, tokenize, DistScope};

pub const DEFAULT_POOL_SIZE: usize = 100;
const SYNTHETIC: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolItem {
    pub instance_id: String,
    pub dialogue_id: String,
    pub turn_index: usize,
    pub human_text: String,
    pub human_behavior: Option<BehaviorLabel>,
    pub chosen: SystemResponse,
    pub rejected: SystemResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePairPool {
    items: Vec<PoolItem>,
}

impl PreferencePairPool {
    pub fn new(items: Vec<PoolItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("preference pool is empty"));
        }
        let mut seen = HashSet::new();
        for it in &items {
            if !seen.insert(it.instance_id.as_str()) {
                return Err(Error::invalid(format!("duplicate pool instance {}", it.instance_id)));
            }
            if it.chosen == it.rejected {
                return Err(Error::invalid(format!(
                    "pool instance {}: chosen and rejected responses are identical",
                    it.instance_id
                )));
            }
        }
        Ok(PreferencePairPool { items })
    }

    /// Pairs every decisive judgment on a scored instance into (chosen,
    /// rejected), then keeps a seeded sample of at most `pool_size`.
    ///
    /// "Same" verdicts and first-turn instances are dropped. When one
    /// instance carries several decisive judgments, the first is used.
    pub fn from_judgments(
        instances: &[EvalInstance],
        judgments: &[PreferenceJudgment],
        pool_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let by_id: HashMap<&str, &EvalInstance> =
            instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
        let mut seen = HashSet::new();
        let mut items = Vec::new();
        for j in judgments {
            let (win, lose) = match j.verdict {
                Verdict::ABetter => (&j.system_a, &j.system_b),
                Verdict::BBetter => (&j.system_b, &j.system_a),
                Verdict::Same => continue,
            };
            let inst = by_id.get(j.instance_id.as_str()).ok_or_else(|| {
                Error::invalid(format!("judgment references unknown instance {}", j.instance_id))
            })?;
            if !inst.is_scored() || !seen.insert(j.instance_id.as_str()) {
                continue;
            }
            let get = |s: &str| {
                inst.response(s).cloned().ok_or_else(|| {
                    Error::invalid(format!("instance {} has no response from system '{s}'", inst.instance_id))
                })
            };
            let (chosen, rejected) = (get(win)?, get(lose)?);
            if chosen == rejected {
                log::warn!("instance {}: identical responses, skipped", inst.instance_id);
                continue;
            }
            items.push(PoolItem {
                instance_id: inst.instance_id.clone(),
                dialogue_id: inst.dialogue_id.clone(),
                turn_index: inst.turn_index,
                human_text: inst.human_text.clone(),
                human_behavior: inst.human_behavior,
                chosen,
                rejected,
            });
        }
        if pool_size == 0 {
            return Err(Error::invalid("pool size must be positive"));
        }
        if items.len() > pool_size {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut keep = index::sample(&mut rng, items.len(), pool_size).into_vec();
            keep.sort_unstable();
            items = keep.into_iter().map(|i| items[i].clone()).collect();
        } else if items.len() < pool_size {
            log::warn!("only {} decisive judgments available for a pool of {pool_size}", items.len());
        }
        Self::new(items)
    }

    pub fn items(&self) -> &[PoolItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("blend ratio must be in [0, 1], got {p}")))
    }
}

/// Which pool items take the chosen response at ratio `p`.
fn chosen_mask(n: usize, p: f64, seed: u64) -> Vec<bool> {
    let k = ((p * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p.to_bits());
    let mut mask = vec![false; n];
    for i in index::sample(&mut rng, n, k) {
        mask[i] = true;
    }
    mask
}

/// `round(p * n)` items, sampled without replacement, take the chosen
/// response; the others take the rejected one.
pub fn build_synthetic_system(
    pool: &PreferencePairPool,
    p: f64,
    seed: u64,
) -> Result<BTreeMap<String, SystemResponse>> {
    check_p(p)?;
    let mask = chosen_mask(pool.len(), p, seed);
    Ok(pool
        .items
        .iter()
        .zip(mask)
        .map(|(it, c)| {
            let r = if c { &it.chosen } else { &it.rejected };
            (it.instance_id.clone(), r.clone())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynthMetric {
    BehaviorAlignment,
    /// Mean sentence BLEU@k against the human references.
    Bleu(usize),
    /// Corpus-level DIST@k over the synthetic responses.
    Dist(usize),
}

impl fmt::Display for SynthMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthMetric::BehaviorAlignment => f.write_str("behavior_alignment"),
            SynthMetric::Bleu(k) => write!(f, "bleu@{k}"),
            SynthMetric::Dist(k) => write!(f, "dist@{k}"),
        }
    }
}

impl FromStr for SynthMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "behavior_alignment" || s == "ba" {
            return Ok(SynthMetric::BehaviorAlignment);
        }
        let parse_k = |rest: &str| {
            rest.parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::invalid(format!("bad metric order in '{s}'")))
        };
        if let Some(rest) = s.strip_prefix("bleu@") {
            Ok(SynthMetric::Bleu(parse_k(rest)?))
        } else if let Some(rest) = s.strip_prefix("dist@") {
            Ok(SynthMetric::Dist(parse_k(rest)?))
        } else {
            Err(Error::invalid(format!(
                "unknown metric '{s}' (expected behavior_alignment, bleu@K or dist@K)"
            )))
        }
    }
}

impl SynthMetric {
    /// Fails naming the metric and the first missing field.
    fn check(&self, pool: &PreferencePairPool) -> Result<()> {
        for it in &pool.items {
            let missing = match self {
                SynthMetric::BehaviorAlignment => {
                    if it.human_behavior.is_none() {
                        Some("human_behavior")
                    } else if it.chosen.behavior.is_none() {
                        Some("chosen.behavior")
                    } else if it.rejected.behavior.is_none() {
                        Some("rejected.behavior")
                    } else {
                        None
                    }
                }
                SynthMetric::Bleu(_) => tokenize(&it.human_text).is_empty().then_some("human_text"),
                SynthMetric::Dist(_) => None,
            };
            if let Some(field) = missing {
                return Err(Error::invalid(format!(
                    "metric {self} needs {field}, missing on pool instance {}",
                    it.instance_id
                )));
            }
        }
        Ok(())
    }

    fn evaluate(&self, pool: &PreferencePairPool, system: &BTreeMap<String, SystemResponse>) -> Result<f64> {
        match self {
            SynthMetric::BehaviorAlignment => {
                let instances: Vec<EvalInstance> = pool
                    .items
                    .iter()
                    .map(|it| EvalInstance {
                        instance_id: it.instance_id.clone(),
                        dialogue_id: it.dialogue_id.clone(),
                        context: Vec::new(),
                        human_text: it.human_text.clone(),
                        human_behavior: it.human_behavior,
                        system_responses: BTreeMap::from([(
                            SYNTHETIC.to_string(),
                            system[&it.instance_id].clone(),
                        )]),
                        turn_index: it.turn_index,
                    })
                    .collect();
                Ok(behavior_alignment(&instances, SYNTHETIC, NormalizationMode::ScoredTurns)?.aggregate)
            }
            SynthMetric::Bleu(k) => {
                let mut sum = 0.0;
                for it in &pool.items {
                    let cand = tokenize(&system[&it.instance_id].text);
                    sum += bleu_k(&cand, &tokenize(&it.human_text), *k)?;
                }
                Ok(sum / pool.len() as f64)
            }
            SynthMetric::Dist(k) => {
                let toks: Vec<_> = pool
                    .items
                    .iter()
                    .map(|it| tokenize(&system[&it.instance_id].text))
                    .collect();
                dist_k(&toks, *k, DistScope::Corpus)
            }
        }
    }
}

pub fn default_ratios() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub p: f64,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentiationCurve {
    pub rows: Vec<CurveRow>,
}

impl DifferentiationCurve {
    pub fn values(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.p, r.value))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(format!("csv output: {e}"));
        out.write_record(["p", "metric", "value", "seed"]).map_err(err)?;
        for r in &self.rows {
            out.write_record([r.p.to_string(), r.metric.clone(), r.value.to_string(), r.seed.to_string()])
                .map_err(err)?;
        }
        out.flush().map_err(|e| Error::invalid(format!("csv output: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }
}

/// Evaluates every metric on the synthetic system built at each ratio.
/// Rows are ordered by `p`, then by the order of `metrics`.
pub fn differentiation_experiment(
    pool: &PreferencePairPool,
    metrics: &[SynthMetric],
    ps: &[f64],
    seed: u64,
) -> Result<DifferentiationCurve> {
    if metrics.is_empty() || ps.is_empty() {
        return Err(Error::invalid("need at least one metric and one blend ratio"));
    }
    for &p in ps {
        check_p(p)?;
    }
    for m in metrics {
        m.check(pool)?;
    }
    let mut ps: Vec<f64> = ps.to_vec();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let systems: Vec<BTreeMap<String, SystemResponse>> = ps
        .iter()
        .map(|&p| build_synthetic_system(pool, p, seed))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, &SynthMetric)> = (0..ps.len())
        .flat_map(|i| metrics.iter().map(move |m| (i, m)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, m)| {
            Ok(CurveRow {
                p: ps[i],
                metric: m.to_string(),
                value: m.evaluate(pool, &systems[i])?,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DifferentiationCurve { rows })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
/// Constant input on either side gives 0.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman rho between blend ratio and the metric's value.
pub fn monotonicity(curve: &DifferentiationCurve, metric: &str) -> Result<f64> {
    let pts = curve.values(metric);
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid(format!(
            "metric {metric} has {} distinct blend ratios, need at least 3",
            distinct.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    if y.iter().all(|&v| v == y[0]) {
        log::warn!("metric {metric} is constant across blend ratios; rho set to 0");
        return Ok(0.0);
    }
    Ok(spearman(&x, &y))
}
