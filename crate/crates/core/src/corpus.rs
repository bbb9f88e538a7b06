//! Dialogue corpora, evaluation instances and the line-delimited JSON files
//! they are stored in.
//!
//! Every file format is one JSON object per line. Blank lines are skipped but
//! still counted, so error line numbers match what an editor shows.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The closed set of thirteen recommendation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BehaviorLabel {
    Acknowledgment,
    Credibility,
    Encouragement,
    ExperienceInquiry,
    OfferHelp,
    OpinionInquiry,
    PersonalExperience,
    PersonalOpinion,
    PreferenceConfirmation,
    RephrasePreference,
    SelfModeling,
    Similarity,
    Transparency,
}

impl BehaviorLabel {
    pub const COUNT: usize = 13;

    /// All labels, in lexicographic order of their symbols.
    pub const ALL: [BehaviorLabel; 13] = [
        BehaviorLabel::Acknowledgment,
        BehaviorLabel::Credibility,
        BehaviorLabel::Encouragement,
        BehaviorLabel::ExperienceInquiry,
        BehaviorLabel::OfferHelp,
        BehaviorLabel::OpinionInquiry,
        BehaviorLabel::PersonalExperience,
        BehaviorLabel::PersonalOpinion,
        BehaviorLabel::PreferenceConfirmation,
        BehaviorLabel::RephrasePreference,
        BehaviorLabel::SelfModeling,
        BehaviorLabel::Similarity,
        BehaviorLabel::Transparency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorLabel::Acknowledgment => "acknowledgment",
            BehaviorLabel::Credibility => "credibility",
            BehaviorLabel::Encouragement => "encouragement",
            BehaviorLabel::ExperienceInquiry => "experience_inquiry",
            BehaviorLabel::OfferHelp => "offer_help",
            BehaviorLabel::OpinionInquiry => "opinion_inquiry",
            BehaviorLabel::PersonalExperience => "personal_experience",
            BehaviorLabel::PersonalOpinion => "personal_opinion",
            BehaviorLabel::PreferenceConfirmation => "preference_confirmation",
            BehaviorLabel::RephrasePreference => "rephrase_preference",
            BehaviorLabel::SelfModeling => "self_modeling",
            BehaviorLabel::Similarity => "similarity",
            BehaviorLabel::Transparency => "transparency",
        }
    }

    /// Position in [`BehaviorLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for BehaviorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BehaviorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownBehavior(s.to_string()))
    }
}

impl Serialize for BehaviorLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for BehaviorLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Seeker,
    Recommender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub behavior: Option<BehaviorLabel>,
    pub is_recommendation: bool,
    pub accepted: Option<bool>,
}

impl Turn {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("turn text is empty".into());
        }
        if self.accepted.is_some() && !self.is_recommendation {
            return Err("'accepted' set on a turn that is not a recommendation".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    /// Recommender turns with their 1-based index among all turns.
    pub fn recommender_turns(&self) -> impl Iterator<Item = (usize, &Turn)> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.speaker == Speaker::Recommender)
            .map(|(i, t)| (i + 1, t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemResponse {
    pub text: String,
    pub behavior: Option<BehaviorLabel>,
}

/// One scored position: a context, the human recommender's response and the
/// responses of one or more systems for the same context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalInstance {
    pub instance_id: String,
    pub dialogue_id: String,
    pub context: Vec<Turn>,
    pub human_text: String,
    pub human_behavior: Option<BehaviorLabel>,
    pub system_responses: BTreeMap<String, SystemResponse>,
    /// 1-based position of the scored turn in its dialogue, counting all turns.
    pub turn_index: usize,
}

impl EvalInstance {
    pub fn is_scored(&self) -> bool {
        self.turn_index >= 2
    }

    pub fn response(&self, system: &str) -> Option<&SystemResponse> {
        self.system_responses.get(system)
    }
}

pub fn instance_id(dialogue_id: &str, turn_index: usize) -> String {
    format!("{dialogue_id}#{turn_index}")
}

/// One line of a responses file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResponseRecord {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub system: String,
    pub text: String,
    pub behavior: Option<BehaviorLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ABetter,
    BBetter,
    Same,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ABetter => "a_better",
            Verdict::BBetter => "b_better",
            Verdict::Same => "same",
        }
    }

    /// The same judgment with the two systems swapped.
    pub fn flipped(self) -> Self {
        match self {
            Verdict::ABetter => Verdict::BBetter,
            Verdict::BBetter => Verdict::ABetter,
            Verdict::Same => Verdict::Same,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceJudgment {
    pub instance_id: String,
    pub system_a: String,
    pub system_b: String,
    pub verdict: Verdict,
}

impl PreferenceJudgment {
    /// The verdict phrased as "is `a` better than `b`", swapping if the
    /// judgment was recorded the other way round.
    pub fn verdict_for(&self, a: &str, b: &str) -> Option<Verdict> {
        if self.system_a == a && self.system_b == b {
            Some(self.verdict)
        } else if self.system_a == b && self.system_b == a {
            Some(self.verdict.flipped())
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    SameBehavior,
    DifferentBehavior,
}

impl PairLabel {
    pub fn is_same(self) -> bool {
        self == PairLabel::SameBehavior
    }

    pub fn from_same(same: bool) -> Self {
        if same {
            PairLabel::SameBehavior
        } else {
            PairLabel::DifferentBehavior
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Original,
    HardNegative,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    pub text_a: String,
    pub text_b: String,
    pub label: PairLabel,
    pub source: PairSource,
}

// ---------------------------------------------------------------------------
// Raw line records. Behavior strings are kept as strings here so that an
// unknown value is reported with its line number rather than a serde column.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTurn {
    speaker: Speaker,
    text: String,
    #[serde(default)]
    behavior: Option<String>,
    #[serde(default)]
    is_recommendation: bool,
    #[serde(default)]
    accepted: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDialogue {
    dialogue_id: String,
    turns: Vec<RawTurn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResponse {
    dialogue_id: String,
    turn_index: i64,
    system: String,
    text: String,
    #[serde(default)]
    behavior: Option<String>,
}

fn parse_behavior(raw: Option<String>, line: usize) -> Result<Option<BehaviorLabel>> {
    match raw {
        None => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|_| Error::Parse {
            line,
            message: format!("unknown behavior label '{s}'"),
        }),
    }
}

/// Decodes every non-blank line of `reader` as a `T`, passing the 1-based
/// line number along.
fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("malformed record: {e}"),
        })?;
        out.push((line_no, value));
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: impl IntoIterator<Item = T>) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(&r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Dialogues

pub fn read_dialogues<R: BufRead>(reader: R) -> Result<Vec<Dialogue>> {
    let mut seen = HashMap::new();
    let mut dialogues = Vec::new();
    for (line, raw) in read_jsonl::<RawDialogue, _>(reader)? {
        if raw.turns.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("dialogue '{}' has no turns", raw.dialogue_id),
            });
        }
        let mut turns = Vec::with_capacity(raw.turns.len());
        for (ti, rt) in raw.turns.into_iter().enumerate() {
            let turn = Turn {
                speaker: rt.speaker,
                text: rt.text,
                behavior: parse_behavior(rt.behavior, line)?,
                is_recommendation: rt.is_recommendation,
                accepted: rt.accepted,
            };
            turn.validate().map_err(|m| Error::Parse {
                line,
                message: format!("turn {}: {m}", ti + 1),
            })?;
            turns.push(turn);
        }
        if let Some(first) = seen.insert(raw.dialogue_id.clone(), line) {
            return Err(Error::Parse {
                line,
                message: format!(
                    "duplicate dialogue_id '{}' (first seen on line {first})",
                    raw.dialogue_id
                ),
            });
        }
        dialogues.push(Dialogue {
            dialogue_id: raw.dialogue_id,
            turns,
        });
    }
    Ok(dialogues)
}

pub fn parse_dialogues(path: impl AsRef<Path>) -> Result<Vec<Dialogue>> {
    read_dialogues(open(path.as_ref())?)
}

pub fn write_dialogues<W: Write>(w: W, dialogues: &[Dialogue]) -> Result<()> {
    write_jsonl(w, dialogues)
}

pub fn save_dialogues(path: impl AsRef<Path>, dialogues: &[Dialogue]) -> Result<()> {
    write_dialogues(create(path.as_ref())?, dialogues)
}

// ---------------------------------------------------------------------------
// System responses

pub fn read_responses<R: BufRead>(reader: R) -> Result<Vec<ResponseRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, raw) in read_jsonl::<RawResponse, _>(reader)? {
        if raw.turn_index < 1 {
            return Err(Error::Parse {
                line,
                message: format!("turn_index must be >= 1, got {}", raw.turn_index),
            });
        }
        if raw.text.trim().is_empty() {
            return Err(Error::Parse {
                line,
                message: "response text is empty".into(),
            });
        }
        let turn_index = raw.turn_index as usize;
        if !seen.insert((raw.dialogue_id.clone(), turn_index, raw.system.clone())) {
            return Err(Error::Parse {
                line,
                message: format!(
                    "duplicate response for system '{}' at {}",
                    raw.system,
                    instance_id(&raw.dialogue_id, turn_index)
                ),
            });
        }
        out.push(ResponseRecord {
            dialogue_id: raw.dialogue_id,
            turn_index,
            system: raw.system,
            text: raw.text,
            behavior: parse_behavior(raw.behavior, line)?,
        });
    }
    Ok(out)
}

pub fn parse_responses(path: impl AsRef<Path>) -> Result<Vec<ResponseRecord>> {
    read_responses(open(path.as_ref())?)
}

pub fn write_responses<W: Write>(w: W, records: &[ResponseRecord]) -> Result<()> {
    write_jsonl(w, records)
}

pub fn save_responses(path: impl AsRef<Path>, records: &[ResponseRecord]) -> Result<()> {
    write_responses(create(path.as_ref())?, records)
}

/// Joins system responses onto the recommender turns they answer.
///
/// Instances come out in corpus order, then by turn index. The context of each
/// instance holds only the turns strictly before the scored one.
pub fn build_eval_instances(
    dialogues: &[Dialogue],
    responses: &[ResponseRecord],
) -> Result<Vec<EvalInstance>> {
    let by_id: HashMap<&str, (usize, &Dialogue)> = dialogues
        .iter()
        .enumerate()
        .map(|(i, d)| (d.dialogue_id.as_str(), (i, d)))
        .collect();

    let mut dangling = BTreeSet::new();
    let mut grouped: BTreeMap<(usize, usize), BTreeMap<String, SystemResponse>> = BTreeMap::new();
    for r in responses {
        let Some(&(pos, dialogue)) = by_id.get(r.dialogue_id.as_str()) else {
            dangling.insert(instance_id(&r.dialogue_id, r.turn_index));
            continue;
        };
        let Some(turn) = dialogue.turns.get(r.turn_index - 1) else {
            dangling.insert(instance_id(&r.dialogue_id, r.turn_index));
            continue;
        };
        if turn.speaker != Speaker::Recommender {
            return Err(Error::invalid(format!(
                "response at {} points at a seeker turn",
                instance_id(&r.dialogue_id, r.turn_index)
            )));
        }
        grouped.entry((pos, r.turn_index)).or_default().insert(
            r.system.clone(),
            SystemResponse {
                text: r.text.clone(),
                behavior: r.behavior,
            },
        );
    }
    if !dangling.is_empty() {
        return Err(Error::invalid(format!(
            "responses reference missing dialogue turns: {}",
            dangling.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    Ok(grouped
        .into_iter()
        .map(|((pos, turn_index), system_responses)| {
            let d = &dialogues[pos];
            let turn = &d.turns[turn_index - 1];
            EvalInstance {
                instance_id: instance_id(&d.dialogue_id, turn_index),
                dialogue_id: d.dialogue_id.clone(),
                context: d.turns[..turn_index - 1].to_vec(),
                human_text: turn.text.clone(),
                human_behavior: turn.behavior,
                system_responses,
                turn_index,
            }
        })
        .collect())
}

pub fn extract_eval_instances(
    dialogues: &[Dialogue],
    responses_path: impl AsRef<Path>,
) -> Result<Vec<EvalInstance>> {
    let responses = parse_responses(responses_path)?;
    build_eval_instances(dialogues, &responses)
}

// ---------------------------------------------------------------------------
// Preferences

pub fn read_preferences<R: BufRead>(reader: R) -> Result<Vec<PreferenceJudgment>> {
    let mut out = Vec::new();
    for (line, j) in read_jsonl::<PreferenceJudgment, _>(reader)? {
        if j.system_a == j.system_b {
            return Err(Error::Parse {
                line,
                message: format!("system_a and system_b are both '{}'", j.system_a),
            });
        }
        out.push(j);
    }
    Ok(out)
}

pub fn parse_preferences(path: impl AsRef<Path>) -> Result<Vec<PreferenceJudgment>> {
    read_preferences(open(path.as_ref())?)
}

pub fn write_preferences<W: Write>(w: W, judgments: &[PreferenceJudgment]) -> Result<()> {
    write_jsonl(w, judgments)
}

/// Checks that every judgment names a known instance.
pub fn check_preferences(judgments: &[PreferenceJudgment], instances: &[EvalInstance]) -> Result<()> {
    let ids: HashSet<&str> = instances.iter().map(|i| i.instance_id.as_str()).collect();
    let missing: BTreeSet<&str> = judgments
        .iter()
        .map(|j| j.instance_id.as_str())
        .filter(|id| !ids.contains(id))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "preferences reference unknown instances: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )))
    }
}

// ---------------------------------------------------------------------------
// Sentence pairs

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<SentencePair>> {
    let mut out = Vec::new();
    for (line, p) in read_jsonl::<SentencePair, _>(reader)? {
        if p.text_a.trim().is_empty() || p.text_b.trim().is_empty() {
            return Err(Error::Parse {
                line,
                message: "pair has an empty text".into(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

pub fn parse_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    read_pairs(open(path.as_ref())?)
}

pub fn write_pairs<W: Write>(w: W, pairs: &[SentencePair]) -> Result<()> {
    write_jsonl(w, pairs)
}

pub fn save_pairs(path: impl AsRef<Path>, pairs: &[SentencePair]) -> Result<()> {
    write_pairs(create(path.as_ref())?, pairs)
}

/// Labeled recommender sentences of a corpus, in corpus order.
pub fn labeled_sentences(dialogues: &[Dialogue]) -> Vec<(String, BehaviorLabel)> {
    dialogues
        .iter()
        .flat_map(|d| d.turns.iter())
        .filter(|t| t.speaker == Speaker::Recommender)
        .filter_map(|t| t.behavior.map(|b| (t.text.clone(), b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(speaker: Speaker, text: &str, behavior: Option<BehaviorLabel>) -> Turn {
        Turn {
            speaker,
            text: text.into(),
            behavior,
            is_recommendation: false,
            accepted: None,
        }
    }

    fn sample_dialogue(id: &str) -> Dialogue {
        Dialogue {
            dialogue_id: id.into(),
            turns: vec![
                turn(Speaker::Seeker, "hi, any movie ideas?", None),
                turn(
                    Speaker::Recommender,
                    "sure, what do you like?",
                    Some(BehaviorLabel::OpinionInquiry),
                ),
                turn(Speaker::Seeker, "comedies mostly", None),
                Turn {
                    speaker: Speaker::Recommender,
                    text: "try Airplane!".into(),
                    behavior: Some(BehaviorLabel::PersonalOpinion),
                    is_recommendation: true,
                    accepted: Some(true),
                },
            ],
        }
    }

    #[test]
    fn label_symbols_round_trip() {
        for l in BehaviorLabel::ALL {
            assert_eq!(l.as_str().parse::<BehaviorLabel>().unwrap(), l);
            assert_eq!(BehaviorLabel::from_index(l.index()), Some(l));
        }
        let mut sorted = BehaviorLabel::ALL.map(|l| l.as_str());
        sorted.sort();
        assert_eq!(sorted, BehaviorLabel::ALL.map(|l| l.as_str()));
    }

    #[test]
    fn unknown_label_names_value() {
        let err = "selfmodeling".parse::<BehaviorLabel>().unwrap_err();
        assert!(err.to_string().contains("selfmodeling"));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(read_dialogues("".as_bytes()).unwrap().is_empty());
        assert!(read_dialogues("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn bad_behavior_reports_line_and_value() {
        let src = r#"{"dialogue_id":"d1","turns":[{"speaker":"recommender","text":"hello","behavior":"selfmodeling","is_recommendation":false,"accepted":null}]}"#;
        let err = read_dialogues(src.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{msg}");
        assert!(msg.contains("selfmodeling"), "{msg}");
    }

    #[test]
    fn malformed_json_reports_line() {
        let mut buf = Vec::new();
        write_dialogues(&mut buf, &[sample_dialogue("d1")]).unwrap();
        buf.extend_from_slice(b"{not json\n");
        let err = read_dialogues(buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_dialogue_id_rejected() {
        let mut buf = Vec::new();
        write_dialogues(&mut buf, &[sample_dialogue("d1"), sample_dialogue("d1")]).unwrap();
        let err = read_dialogues(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn turn_invariants_enforced() {
        let blank = r#"{"dialogue_id":"d1","turns":[{"speaker":"seeker","text":"   "}]}"#;
        assert!(read_dialogues(blank.as_bytes()).is_err());
        let accepted = r#"{"dialogue_id":"d1","turns":[{"speaker":"recommender","text":"x","is_recommendation":false,"accepted":true}]}"#;
        assert!(read_dialogues(accepted.as_bytes()).is_err());
        let empty = r#"{"dialogue_id":"d1","turns":[]}"#;
        assert!(read_dialogues(empty.as_bytes()).is_err());
    }

    #[test]
    fn three_dialogue_round_trip() {
        let corpus: Vec<_> = ["a", "b", "c"].iter().map(|id| sample_dialogue(id)).collect();
        let mut buf = Vec::new();
        write_dialogues(&mut buf, &corpus).unwrap();
        let parsed = read_dialogues(buf.as_slice()).unwrap();
        assert_eq!(parsed.len(), corpus.len());
        for (p, c) in parsed.iter().zip(&corpus) {
            assert_eq!(p.dialogue_id, c.dialogue_id);
            assert_eq!(p.turns.len(), c.turns.len());
            for (pt, ct) in p.turns.iter().zip(&c.turns) {
                assert_eq!(pt.speaker, ct.speaker);
                assert_eq!(pt.text, ct.text);
                assert_eq!(pt.behavior, ct.behavior);
                assert_eq!(pt.is_recommendation, ct.is_recommendation);
                assert_eq!(pt.accepted, ct.accepted);
            }
        }
    }

    fn response(d: &str, k: usize, system: &str) -> ResponseRecord {
        ResponseRecord {
            dialogue_id: d.into(),
            turn_index: k,
            system: system.into(),
            text: format!("{system} reply"),
            behavior: Some(BehaviorLabel::OfferHelp),
        }
    }

    #[test]
    fn instances_at_recommender_turns() {
        let corpus = vec![sample_dialogue("d1")];
        let rs = vec![response("d1", 4, "x"), response("d1", 2, "x"), response("d1", 2, "y")];
        let inst = build_eval_instances(&corpus, &rs).unwrap();
        assert_eq!(inst.iter().map(|i| i.turn_index).collect::<Vec<_>>(), [2, 4]);
        assert_eq!(inst[0].instance_id, "d1#2");
        assert_eq!(inst[0].context.len(), 1);
        assert_eq!(inst[0].system_responses.len(), 2);
        assert_eq!(inst[1].human_text, "try Airplane!");
        assert_eq!(inst[1].human_behavior, Some(BehaviorLabel::PersonalOpinion));
        assert_eq!(inst[1].context, corpus[0].turns[..3]);
    }

    #[test]
    fn dangling_references_all_listed() {
        let corpus = vec![sample_dialogue("d1")];
        let rs = vec![response("d99", 2, "x"), response("d1", 9, "x")];
        let msg = build_eval_instances(&corpus, &rs).unwrap_err().to_string();
        assert!(msg.contains("d99#2") && msg.contains("d1#9"), "{msg}");
    }

    #[test]
    fn seeker_turn_reference_rejected() {
        let corpus = vec![sample_dialogue("d1")];
        let err = build_eval_instances(&corpus, &[response("d1", 3, "x")]).unwrap_err();
        assert!(err.to_string().contains("seeker"));
    }

    #[test]
    fn responses_validate_index_and_duplicates() {
        let zero = r#"{"dialogue_id":"d","turn_index":0,"system":"s","text":"t","behavior":null}"#;
        assert!(read_responses(zero.as_bytes()).is_err());
        let dup = format!("{zero}\n{zero}").replace("\"turn_index\":0", "\"turn_index\":2");
        assert!(matches!(read_responses(dup.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn preferences_self_comparison_rejected() {
        let src = r#"{"instance_id":"d#2","system_a":"s","system_b":"s","verdict":"same"}"#;
        assert!(read_preferences(src.as_bytes()).is_err());
        let ok = r#"{"instance_id":"d#2","system_a":"s","system_b":"t","verdict":"b_better"}"#;
        let j = read_preferences(ok.as_bytes()).unwrap();
        assert_eq!(j[0].verdict_for("t", "s"), Some(Verdict::ABetter));
        assert_eq!(j[0].verdict_for("s", "u"), None);
    }

    #[test]
    fn preferences_must_reference_instances() {
        let corpus = vec![sample_dialogue("d1")];
        let inst = build_eval_instances(&corpus, &[response("d1", 2, "x")]).unwrap();
        let j = PreferenceJudgment {
            instance_id: "d1#4".into(),
            system_a: "x".into(),
            system_b: "y".into(),
            verdict: Verdict::Same,
        };
        assert!(check_preferences(&[j], &inst).is_err());
    }

    #[test]
    fn pairs_round_trip_and_reject_empty() {
        let pairs = vec![SentencePair {
            text_a: "a".into(),
            text_b: "b".into(),
            label: PairLabel::SameBehavior,
            source: PairSource::HardNegative,
        }];
        let mut buf = Vec::new();
        write_pairs(&mut buf, &pairs).unwrap();
        assert_eq!(read_pairs(buf.as_slice()).unwrap(), pairs);
        let bad = r#"{"text_a":"","text_b":"b","label":"same_behavior","source":"original"}"#;
        assert!(read_pairs(bad.as_bytes()).is_err());
    }
}
