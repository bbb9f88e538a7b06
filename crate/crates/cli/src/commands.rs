use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use behalign::agreement::{
    agreement, AgreementResult, BehaviorAlignmentMetric, BleuMetric, DistMetric, InstanceMetric,
};
use behalign::behavior::{
    behavior_alignment, fit_markov, recommendation_stats, weighted_behavior_alignment, AlignmentReport,
    NormalizationMode,
};
use behalign::corpus::{
    build_eval_instances, check_preferences, labeled_sentences, parse_dialogues, parse_pairs,
    parse_preferences, parse_responses, save_pairs, BehaviorLabel, Dialogue, EvalInstance, PairSource,
    PreferenceJudgment, SentencePair, Speaker,
};
use behalign::pairs::{
    build_training_sets, confusion_and_accuracy, cross_validate, evaluate_pairs, implicit_behavior_alignment,
    mine_hard_negative_classes, split_labeled, train_multiclass, train_pair_classifier, ConfusionMatrix,
    HardPair, ImplicitBaMetric, PairClassifierModel,
};
use behalign::synth::{differentiation_experiment, monotonicity, PreferencePairPool, SynthMetric};
use behalign::text::{dist_k, tokenize};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{digest, Cell, FileDigest, Outcome, Table};

type Res<T> = Result<T, CliError>;

/// Loads inputs and records the digest of every file read.
struct Ctx<'a> {
    cfg: &'a RunConfig,
    inputs: Vec<FileDigest>,
}

fn need<'a, T>(v: &'a Option<T>, key: &str) -> Res<&'a T> {
    v.as_ref().ok_or_else(|| CliError::missing(key))
}

fn in_file(path: &Path, e: behalign::Error) -> CliError {
    let io = matches!(e, behalign::Error::Io { .. });
    match CliError::from(e) {
        CliError::Data(m) if !io => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

/// The serde name of a unit enum value.
fn tag<T: Serialize>(v: &T) -> String {
    to_value(v).as_str().unwrap_or_default().to_string()
}

impl<'a> Ctx<'a> {
    fn load<T>(&mut self, role: &str, f: impl FnOnce(&Path) -> behalign::Result<T>) -> Res<T> {
        let path = need(self.input_path(role), role)?;
        let d = digest(role, path)?;
        let v = f(path).map_err(|e| in_file(path, e))?;
        self.inputs.push(d);
        Ok(v)
    }

    fn input_path(&self, role: &str) -> &'a Option<std::path::PathBuf> {
        match role {
            "dialogues" => &self.cfg.dialogues,
            "responses" => &self.cfg.responses,
            "preferences" => &self.cfg.preferences,
            "pairs" => &self.cfg.pairs,
            "eval_pairs" => &self.cfg.eval_pairs,
            "hard_pairs" => &self.cfg.hard_pairs,
            "model" => &self.cfg.model,
            _ => unreachable!("unknown input role {role}"),
        }
    }

    fn dialogues(&mut self) -> Res<Vec<Dialogue>> {
        self.load("dialogues", |p| parse_dialogues(p))
    }

    fn instances(&mut self) -> Res<(Vec<Dialogue>, Vec<EvalInstance>)> {
        let dialogues = self.dialogues()?;
        let responses = self.load("responses", |p| parse_responses(p))?;
        let instances = build_eval_instances(&dialogues, &responses)?;
        Ok((dialogues, instances))
    }

    fn preferences(&mut self, instances: &[EvalInstance]) -> Res<Vec<PreferenceJudgment>> {
        let judgments = self.load("preferences", |p| parse_preferences(p))?;
        check_preferences(&judgments, instances)?;
        Ok(judgments)
    }

    fn pairs(&mut self, role: &str) -> Res<Vec<SentencePair>> {
        self.load(role, |p| parse_pairs(p))
    }
}

pub fn dispatch(command: &str, cfg: &RunConfig) -> Res<(Vec<FileDigest>, Outcome)> {
    let mut ctx = Ctx { cfg, inputs: Vec::new() };
    let outcome = match command {
        "validate" => validate(&mut ctx)?,
        "ba" => ba(&mut ctx)?,
        "weighted-ba" => weighted_ba(&mut ctx)?,
        "textmetrics" => textmetrics(&mut ctx)?,
        "agreement" => agreement_cmd(&mut ctx)?,
        "build-pairs" => build_pairs(&mut ctx)?,
        "mine-hard" => mine_hard(&mut ctx)?,
        "train-pairs" => train_pairs(&mut ctx)?,
        "cross-validate" => cross_validate_cmd(&mut ctx)?,
        "implicit-ba" => implicit_ba(&mut ctx)?,
        "synth" => synth(&mut ctx)?,
        "stats" => stats(&mut ctx)?,
        _ => return Err(CliError::Usage(format!("unknown command {command}"))),
    };
    Ok((ctx.inputs, outcome))
}

fn outcome(result: Value, tables: Vec<Table>) -> Outcome {
    Outcome {
        result,
        tables,
        outputs: Vec::new(),
    }
}

fn validate(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let dialogues = ctx.dialogues()?;
    let turns: usize = dialogues.iter().map(|d| d.turns.len()).sum();
    let labeled = dialogues
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.speaker == Speaker::Recommender && t.behavior.is_some())
        .count();
    let mut result = serde_json::Map::new();
    result.insert("dialogues".into(), json!(dialogues.len()));
    result.insert("turns".into(), json!(turns));
    result.insert("labeled_recommender_turns".into(), json!(labeled));

    let mut instances = Vec::new();
    if cfg.responses.is_some() {
        let responses = ctx.load("responses", |p| parse_responses(p))?;
        instances = build_eval_instances(&dialogues, &responses)?;
        let systems: BTreeSet<&str> = instances
            .iter()
            .flat_map(|i| i.system_responses.keys().map(String::as_str))
            .collect();
        result.insert("instances".into(), json!(instances.len()));
        result.insert("scored_instances".into(), json!(instances.iter().filter(|i| i.is_scored()).count()));
        result.insert("systems".into(), json!(systems));
    }
    if cfg.preferences.is_some() {
        if cfg.responses.is_none() {
            return Err(CliError::Usage("checking preferences needs --responses".into()));
        }
        let judgments = ctx.preferences(&instances)?;
        result.insert("preferences".into(), json!(judgments.len()));
    }
    if cfg.pairs.is_some() {
        let pairs = ctx.pairs("pairs")?;
        let same = pairs.iter().filter(|p| p.label.is_same()).count();
        result.insert("pairs".into(), json!(pairs.len()));
        result.insert("same_behavior_pairs".into(), json!(same));
    }

    let mut t = Table::new("Input summary", &["item", "count"]);
    for (k, v) in &result {
        let cell = match v {
            Value::Array(a) => Cell::Text(a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(" ")),
            other => other.as_u64().into(),
        };
        t.row(vec![k.as_str().into(), cell]);
    }
    Ok(outcome(Value::Object(result), vec![t]))
}

fn per_instance_table(report: &AlignmentReport) -> Table {
    let mut t = Table::new("Per instance", &["instance_id", "ba", "weight"]).detail();
    for s in &report.per_instance {
        t.row(vec![s.instance_id.as_str().into(), u64::from(s.ba).into(), s.weight.into()]);
    }
    t
}

fn ba(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (_, instances) = ctx.instances()?;
    let system = need(&cfg.system, "system")?;
    let report = behavior_alignment(&instances, system, cfg.normalization_mode)?;
    let mut t = Table::new("Behavior Alignment", &["system", "mode", "ba", "n_scored", "n_first_turn"]);
    t.row(vec![
        system.as_str().into(),
        tag(&report.normalization_mode).into(),
        report.aggregate.into(),
        report.n_scored.into(),
        report.n_first_turn.into(),
    ]);
    let detail = per_instance_table(&report);
    Ok(outcome(to_value(&report), vec![t, detail]))
}

fn weighted_ba(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (dialogues, instances) = ctx.instances()?;
    let system = need(&cfg.system, "system")?;
    let model = fit_markov(&dialogues, cfg.markov_t, cfg.alpha)?;
    let weighted = weighted_behavior_alignment(&instances, system, &model, cfg.h_min)?;
    let plain = behavior_alignment(&instances, system, NormalizationMode::ScoredTurns)?;
    let mut t = Table::new("Behavior Alignment", &["system", "ba", "weighted_ba", "n_scored"]);
    t.row(vec![
        system.as_str().into(),
        plain.aggregate.into(),
        weighted.aggregate.into(),
        weighted.n_scored.into(),
    ]);
    let detail = per_instance_table(&weighted);
    let result = json!({ "behavior_alignment": plain.aggregate, "weighted": weighted });
    Ok(outcome(result, vec![t, detail]))
}

fn textmetrics(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (_, instances) = ctx.instances()?;
    let system = need(&cfg.system, "system")?;
    let with: Vec<&EvalInstance> = instances.iter().filter(|i| i.response(system).is_some()).collect();
    if with.is_empty() {
        return Err(CliError::Data(format!("no responses from system '{system}'")));
    }
    let bleu_metric = BleuMetric { k: cfg.bleu_k };
    let mut bleu_sum = 0.0;
    for inst in &with {
        bleu_sum += bleu_metric.score(inst, system)?;
    }
    let bleu = bleu_sum / with.len() as f64;
    let toks: Vec<_> = with
        .iter()
        .map(|i| tokenize(&i.response(system).expect("filtered").text))
        .collect();
    let dist = dist_k(&toks, cfg.dist_k, cfg.dist_scope)?;

    let mut t = Table::new(
        "Text metrics",
        &["system", &format!("bleu@{}", cfg.bleu_k), &format!("dist@{}", cfg.dist_k), "n_responses"],
    );
    t.row(vec![system.as_str().into(), bleu.into(), dist.into(), with.len().into()]);
    let result = json!({
        "system": system,
        "n_responses": with.len(),
        "bleu_k": cfg.bleu_k,
        "bleu": bleu,
        "dist_k": cfg.dist_k,
        "dist_scope": cfg.dist_scope,
        "dist": dist,
    });
    Ok(outcome(result, vec![t]))
}

/// The compared systems: configured, or the single pair the judgments cover.
fn systems_compared(cfg: &RunConfig, judgments: &[PreferenceJudgment]) -> Res<(String, String)> {
    if let (Some(a), Some(b)) = (&cfg.system_a, &cfg.system_b) {
        return Ok((a.clone(), b.clone()));
    }
    let pairs: BTreeSet<(&str, &str)> = judgments
        .iter()
        .map(|j| {
            let (a, b) = (j.system_a.as_str(), j.system_b.as_str());
            (a.min(b), a.max(b))
        })
        .collect();
    match (pairs.len(), judgments.first()) {
        (1, Some(j)) => Ok((j.system_a.clone(), j.system_b.clone())),
        _ => Err(CliError::Usage(format!(
            "judgments compare {} system pairs; set --system-a and --system-b",
            pairs.len()
        ))),
    }
}

fn agreement_cmd(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (_, instances) = ctx.instances()?;
    let judgments = ctx.preferences(&instances)?;
    let (a, b) = systems_compared(cfg, &judgments)?;
    if cfg.metrics.is_empty() {
        return Err(CliError::missing("metrics"));
    }
    let model = if cfg.metrics.iter().any(|m| m == "implicit") {
        Some(ctx.load("model", |p| PairClassifierModel::load(p))?)
    } else {
        None
    };

    let mut results: Vec<AgreementResult> = Vec::new();
    for name in &cfg.metrics {
        let metric: Box<dyn InstanceMetric + '_> = match (name.as_str(), &model) {
            ("implicit", Some(m)) => Box::new(ImplicitBaMetric {
                scorer: m,
                threshold: cfg.threshold,
            }),
            _ => match name.parse::<SynthMetric>()? {
                SynthMetric::BehaviorAlignment => Box::new(BehaviorAlignmentMetric),
                SynthMetric::Bleu(k) => Box::new(BleuMetric { k }),
                SynthMetric::Dist(k) => Box::new(DistMetric { k }),
            },
        };
        let q = (cfg.quantiles[0], cfg.quantiles[1]);
        results.push(agreement(
            &instances,
            &judgments,
            &a,
            &b,
            metric.as_ref(),
            cfg.tie_eps,
            cfg.b,
            cfg.seed,
            q,
        )?);
    }

    let mut t = Table::new(
        &format!("Agreement with human preferences ({a} vs {b})"),
        &["metric", "kappa", "ci_low", "ci_high", "n_items"],
    );
    for r in &results {
        t.row(vec![
            r.metric.as_str().into(),
            r.kappa.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            r.n_items.into(),
        ]);
    }
    let result = json!({ "system_a": a, "system_b": b, "agreement": results });
    Ok(outcome(result, vec![t]))
}

struct Mined {
    n_train: usize,
    n_test: usize,
    confusion: ConfusionMatrix,
    accuracy: BTreeMap<BehaviorLabel, f64>,
    hard: Vec<HardPair>,
}

fn mine(cfg: &RunConfig, sentences: &[(String, BehaviorLabel)]) -> Res<Mined> {
    let (train, test) = split_labeled(sentences, cfg.test_fraction, cfg.seed)?;
    let model = train_multiclass(&train, &cfg.features(), &cfg.train())?;
    let (confusion, accuracy) = confusion_and_accuracy(&model, &test)?;
    let hard = mine_hard_negative_classes(&accuracy, &confusion, cfg.accuracy_threshold);
    Ok(Mined {
        n_train: train.len(),
        n_test: test.len(),
        confusion,
        accuracy,
        hard,
    })
}

fn mined_json(m: &Mined) -> Value {
    let acc: BTreeMap<&str, f64> = m.accuracy.iter().map(|(l, a)| (l.as_str(), *a)).collect();
    json!({
        "n_train": m.n_train,
        "n_test": m.n_test,
        "per_class_accuracy": acc,
        "confusion": {
            "labels": BehaviorLabel::ALL,
            "counts": m.confusion.counts,
        },
        "hard_pairs": m.hard,
    })
}

fn mine_hard(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let dialogues = ctx.dialogues()?;
    let sentences = labeled_sentences(&dialogues);
    let m = mine(cfg, &sentences)?;

    let mut t = Table::new("Per-class accuracy", &["behavior", "accuracy", "n_test", "hard_partner"]);
    for (l, a) in &m.accuracy {
        let partner = m.hard.iter().find(|h| h.class == *l).map(|h| h.partner.as_str());
        t.row(vec![
            l.as_str().into(),
            (*a).into(),
            m.confusion.row_total(*l).into(),
            partner.into(),
        ]);
    }
    let mut headers = vec!["true \\ predicted"];
    headers.extend(BehaviorLabel::ALL.iter().map(|l| l.as_str()));
    let mut cm = Table::new("Confusion matrix", &headers);
    for l in BehaviorLabel::ALL {
        let mut row: Vec<Cell> = vec![l.as_str().into()];
        row.extend(m.confusion.counts[l.index()].iter().map(|&c| Cell::from(c)));
        cm.row(row);
    }
    Ok(outcome(mined_json(&m), vec![t, cm]))
}

/// Hard pairs from a mine-hard report (or a bare list of them).
fn read_hard_pairs(path: &Path) -> behalign::Result<Vec<HardPair>> {
    let text = fs::read_to_string(path).map_err(|e| behalign::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| behalign::Error::Invalid(format!("not JSON: {e}")))?;
    let list = v.pointer("/result/hard_pairs").cloned().unwrap_or(v);
    serde_json::from_value(list).map_err(|e| behalign::Error::Invalid(format!("no hard pair list: {e}")))
}

fn pair_counts(pairs: &[SentencePair]) -> (usize, usize, usize) {
    let same = pairs.iter().filter(|p| p.label.is_same()).count();
    let hard = pairs.iter().filter(|p| p.source == PairSource::HardNegative).count();
    (same, pairs.len() - same, hard)
}

fn build_pairs(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let out_dir = need(&cfg.out_dir, "out_dir")?;
    let dialogues = ctx.dialogues()?;
    let sentences = labeled_sentences(&dialogues);
    let (hard, mined) = if cfg.hard_pairs.is_some() {
        (ctx.load("hard_pairs", read_hard_pairs)?, None)
    } else {
        let m = mine(cfg, &sentences)?;
        (m.hard.clone(), Some(mined_json(&m)))
    };
    let sets = build_training_sets(&sentences, cfg.sizes(), &hard, cfg.seed)?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
    let mut outputs = Vec::new();
    let mut t = Table::new("Training sets", &["set", "pairs", "same", "different", "hard_negative"]);
    for (name, pairs) in [("original", &sets.original), ("mixed_hard", &sets.mixed_hard)] {
        let path = out_dir.join(format!("{name}.jsonl"));
        save_pairs(&path, pairs)?;
        outputs.push(digest(name, &path)?);
        let (s, d, h) = pair_counts(pairs);
        t.row(vec![name.into(), pairs.len().into(), s.into(), d.into(), h.into()]);
    }
    let result = json!({
        "n_sentences": sentences.len(),
        "requested": cfg.sizes(),
        "produced": sets.sizes,
        "scale": sets.scale,
        "hard_pairs": hard,
        "mining": mined,
    });
    Ok(Outcome {
        result,
        tables: vec![t],
        outputs,
    })
}

fn train_pairs(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let model_path = need(&cfg.model, "model")?;
    let pairs = ctx.pairs("pairs")?;
    let model = train_pair_classifier(&pairs, &cfg.features(), &cfg.train())?;
    model.save(model_path)?;
    let outputs = vec![digest("model", model_path)?];
    let evaluation = if cfg.eval_pairs.is_some() {
        let eval = ctx.pairs("eval_pairs")?;
        Some(evaluate_pairs(&model, &eval, cfg.threshold)?)
    } else {
        None
    };

    let mut t = Table::new(
        "Pair classifier",
        &["training_set", "pairs", "final_loss", "eval_accuracy", "eval_kappa"],
    );
    t.row(vec![
        tag(&model.training_set_kind).into(),
        pairs.len().into(),
        model.loss_history.last().copied().into(),
        evaluation.as_ref().map(|e| e.accuracy).into(),
        evaluation.as_ref().and_then(|e| e.kappa).into(),
    ]);
    let mut loss = Table::new("Loss history", &["epoch", "loss"]).detail();
    for (i, l) in model.loss_history.iter().enumerate() {
        loss.row(vec![i.into(), (*l).into()]);
    }
    let result = json!({
        "training_set_kind": model.training_set_kind,
        "n_pairs": pairs.len(),
        "feature_fingerprint": model.features.fingerprint(),
        "loss_history": model.loss_history,
        "evaluation": evaluation,
    });
    Ok(Outcome {
        result,
        tables: vec![t, loss],
        outputs,
    })
}

fn cross_validate_cmd(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let pairs = ctx.pairs("pairs")?;
    let report = cross_validate(&pairs, cfg.folds, &cfg.features(), &cfg.train(), cfg.seed, cfg.threshold)?;
    let mut t = Table::new("Cross-validation", &["fold", "accuracy", "kappa", "n"]);
    for (i, f) in report.folds.iter().enumerate() {
        t.row(vec![(i + 1).to_string().into(), f.accuracy.into(), f.kappa.into(), f.n.into()]);
    }
    t.row(vec!["mean".into(), report.mean_accuracy.into(), Cell::Missing, pairs.len().into()]);
    Ok(outcome(to_value(&report), vec![t]))
}

fn implicit_ba(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (_, instances) = ctx.instances()?;
    let system = need(&cfg.system, "system")?;
    let model = ctx.load("model", |p| PairClassifierModel::load(p))?;
    let report = implicit_behavior_alignment(&model, &instances, system, cfg.normalization_mode, cfg.threshold)?;
    // Labels are optional here; report the explicit score when they exist.
    let explicit = behavior_alignment(&instances, system, cfg.normalization_mode)
        .ok()
        .map(|r| r.aggregate);
    let mut t = Table::new(
        "Implicit Behavior Alignment",
        &["system", "training_set", "implicit_ba", "explicit_ba", "n_scored"],
    );
    t.row(vec![
        system.as_str().into(),
        tag(&model.training_set_kind).into(),
        report.aggregate.into(),
        explicit.into(),
        report.n_scored.into(),
    ]);
    let detail = per_instance_table(&report);
    let result = json!({
        "implicit": report,
        "explicit_aggregate": explicit,
        "training_set_kind": model.training_set_kind,
        "feature_fingerprint": model.features.fingerprint(),
    });
    Ok(outcome(result, vec![t, detail]))
}

fn synth(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (_, instances) = ctx.instances()?;
    let judgments = ctx.preferences(&instances)?;
    let metrics = cfg
        .metrics
        .iter()
        .map(|m| m.parse::<SynthMetric>())
        .collect::<behalign::Result<Vec<_>>>()?;
    let pool = PreferencePairPool::from_judgments(&instances, &judgments, cfg.pool_size, cfg.seed)?;
    let curve = differentiation_experiment(&pool, &metrics, &cfg.ratios, cfg.seed)?;

    let distinct: BTreeSet<u64> = cfg.ratios.iter().map(|p| p.to_bits()).collect();
    let names: Vec<String> = metrics.iter().map(ToString::to_string).collect();
    let mut rho = BTreeMap::new();
    for name in &names {
        let r = if distinct.len() >= 3 {
            Some(monotonicity(&curve, name)?)
        } else {
            None
        };
        rho.insert(name.clone(), r);
    }

    let mut headers = vec!["p"];
    headers.extend(names.iter().map(String::as_str));
    let mut t = Table::new("Metric by blend ratio", &headers);
    let mut by_p: BTreeMap<u64, (f64, BTreeMap<&str, f64>)> = BTreeMap::new();
    for r in &curve.rows {
        // Nonnegative floats order like their bit patterns.
        by_p.entry(r.p.to_bits()).or_insert((r.p, BTreeMap::new())).1.insert(&r.metric, r.value);
    }
    for (p, vals) in by_p.values() {
        let mut row: Vec<Cell> = vec![(*p).into()];
        row.extend(names.iter().map(|n| Cell::from(vals.get(n.as_str()).copied())));
        t.row(row);
    }
    let mut m = Table::new("Monotonicity", &["metric", "spearman_rho"]);
    for (name, r) in &rho {
        m.row(vec![name.as_str().into(), (*r).into()]);
    }
    let result = json!({ "pool_size": pool.len(), "curve": curve.rows, "monotonicity": rho });
    Ok(outcome(result, vec![t, m]))
}

fn stats(ctx: &mut Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let dialogues = ctx.dialogues()?;
    let s = recommendation_stats(&dialogues, cfg.success_definition);
    let mut t = Table::new(
        "Recommendation statistics",
        &["dialogues", "recommending", "turns_before_first_rec", "success_rate", "success_definition"],
    );
    t.row(vec![
        s.n_dialogues.into(),
        s.n_recommending.into(),
        s.mean_turns_before_rec.into(),
        s.success_rate.into(),
        tag(&s.success_definition).into(),
    ]);
    let total: usize = s.behavior_counts.values().sum();
    let mut b = Table::new("Behavior frequency", &["behavior", "count", "share"]);
    for (l, c) in &s.behavior_counts {
        b.row(vec![l.as_str().into(), (*c).into(), (*c as f64 / total as f64).into()]);
    }
    Ok(outcome(to_value(&s), vec![t, b]))
}
