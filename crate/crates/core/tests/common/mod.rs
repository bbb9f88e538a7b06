//! Synthetic fixtures shared by the integration tests.

#![allow(dead_code)]

use behalign::corpus::{BehaviorLabel, Dialogue, ResponseRecord, Speaker, Turn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const SYSTEM: &str = "sys";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_label(rng: &mut impl Rng) -> BehaviorLabel {
    BehaviorLabel::ALL[rng.gen_range(0..BehaviorLabel::COUNT)]
}

/// Random dialogues of 1..=12 turns with fully labeled recommender turns, and
/// one system response per recommender turn whose label matches the human
/// one about 40% of the time.
pub fn random_corpus(n_dialogues: usize, seed: u64) -> (Vec<Dialogue>, Vec<ResponseRecord>) {
    let mut rng = rng(seed);
    let mut dialogues = Vec::with_capacity(n_dialogues);
    let mut responses = Vec::new();
    for d in 0..n_dialogues {
        let id = format!("dlg{d:04}");
        let len = rng.gen_range(1..=12);
        let mut speaker = if rng.gen_bool(0.5) { Speaker::Seeker } else { Speaker::Recommender };
        let mut turns = Vec::with_capacity(len);
        for t in 0..len {
            let behavior = (speaker == Speaker::Recommender).then(|| random_label(&mut rng));
            turns.push(Turn {
                speaker,
                text: format!("turn {t} of {id}"),
                behavior,
                is_recommendation: false,
                accepted: None,
            });
            if let Some(h) = behavior {
                let sys = if rng.gen_bool(0.4) { h } else { random_label(&mut rng) };
                responses.push(ResponseRecord {
                    dialogue_id: id.clone(),
                    turn_index: t + 1,
                    system: SYSTEM.into(),
                    text: format!("reply {t} for {id}"),
                    behavior: Some(sys),
                });
            }
            if rng.gen_bool(0.8) {
                speaker = match speaker {
                    Speaker::Seeker => Speaker::Recommender,
                    Speaker::Recommender => Speaker::Seeker,
                };
            }
        }
        dialogues.push(Dialogue { dialogue_id: id, turns });
    }
    (dialogues, responses)
}

fn words(rng: &mut impl Rng, pool: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
}

/// Every class draws its words from its own 12-word vocabulary.
pub fn disjoint_sentences(per_class: usize, seed: u64) -> Vec<(String, BehaviorLabel)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for (c, &label) in BehaviorLabel::ALL.iter().enumerate() {
        let vocab: Vec<String> = (0..12).map(|i| format!("w{c}x{i}")).collect();
        for _ in 0..per_class {
            out.push((words(&mut rng, &vocab, 6).join(" "), label));
        }
    }
    out
}

/// Pairs of classes whose sentences share a common sub-vocabulary.
pub const CONFUSABLE: [(BehaviorLabel, BehaviorLabel); 4] = [
    (BehaviorLabel::SelfModeling, BehaviorLabel::PersonalExperience),
    (BehaviorLabel::Transparency, BehaviorLabel::OpinionInquiry),
    (BehaviorLabel::RephrasePreference, BehaviorLabel::PreferenceConfirmation),
    (BehaviorLabel::Similarity, BehaviorLabel::Acknowledgment),
];

/// Sentences made of class words, words shared with a confusable partner
/// class (if any), and filler words from a `style`-specific vocabulary.
///
/// Two styles share class and partner vocabularies but no filler words.
pub fn confusable_sentences(per_class: usize, style: u32, seed: u64) -> Vec<(String, BehaviorLabel)> {
    let mut rng = rng(seed);
    let filler: Vec<String> = (0..300).map(|i| format!("f{style}x{i}")).collect();
    let mut out = Vec::new();
    for (c, &label) in BehaviorLabel::ALL.iter().enumerate() {
        let core: Vec<String> = (0..5).map(|i| format!("k{c}x{i}")).collect();
        let shared: Option<Vec<String>> = CONFUSABLE
            .iter()
            .position(|&(a, b)| a == label || b == label)
            .map(|p| (0..4).map(|i| format!("s{p}x{i}")).collect());
        for _ in 0..per_class {
            let mut ws = words(&mut rng, &core, 4);
            if let Some(s) = &shared {
                ws.extend(words(&mut rng, s, 3));
            }
            ws.extend(words(&mut rng, &filler, 4));
            ws.shuffle(&mut rng);
            out.push((ws.join(" "), label));
        }
    }
    out
}
