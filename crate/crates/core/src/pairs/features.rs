//! Hashed n-gram features for single sentences and sentence pairs.
//!
//! A pair vector has four blocks of `2^dim_log2` slots each:
//!
//! | block | contents                                            |
//! |-------|-----------------------------------------------------|
//! | 0     | word 1..=W-grams and char n-grams of text A, L2-normalized |
//! | 1     | the same for text B                                 |
//! | 2     | interaction features (below)                        |
//! | 3     | unused, keeps the total a power of two              |
//!
//! The interaction block holds `ln(1 + shared)` for each word n-gram order,
//! a one-hot token-Jaccard bin (ten equal-width bins, the last closed at 1),
//! and hashed indicators of the shared word n-grams themselves, L2-normalized
//! as a sub-block. Everything in it is symmetric in A and B.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Offset of the Jaccard one-hot inside the interaction block.
pub const JACCARD_OFFSET: u32 = 8;
pub const JACCARD_BINS: u32 = 10;
/// Start of the hashed shared-n-gram slots inside the interaction block.
const SHARED_HASH_OFFSET: u32 = 32;
const MAX_WORD_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Each block has `2^dim_log2` slots.
    pub dim_log2: u32,
    pub word_ngram_max: usize,
    pub char_ngram_min: usize,
    pub char_ngram_max: usize,
    /// Include the per-text blocks in pair vectors. Without them pair
    /// features, and therefore pair scores, are symmetric.
    pub side_blocks: bool,
    /// Include hashed identities of shared word n-grams in the interaction block.
    pub shared_ngram_features: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dim_log2: 18,
            word_ngram_max: 2,
            char_ngram_min: 3,
            char_ngram_max: 5,
            side_blocks: true,
            shared_ngram_features: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(8..=24).contains(&self.dim_log2) {
            return Err(Error::invalid(format!(
                "dim_log2 must be in 8..=24, got {}",
                self.dim_log2
            )));
        }
        if !(1..=MAX_WORD_ORDER).contains(&self.word_ngram_max) {
            return Err(Error::invalid(format!(
                "word_ngram_max must be in 1..={MAX_WORD_ORDER}, got {}",
                self.word_ngram_max
            )));
        }
        if self.char_ngram_min > self.char_ngram_max {
            return Err(Error::invalid("char_ngram_min exceeds char_ngram_max"));
        }
        Ok(())
    }

    pub fn block_dim(&self) -> u32 {
        1 << self.dim_log2
    }

    pub fn text_dim(&self) -> usize {
        self.block_dim() as usize
    }

    pub fn pair_dim(&self) -> usize {
        4 * self.block_dim() as usize
    }

    /// Short digest identifying the feature layout; stored in model files.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))[..16].to_string()
    }
}

/// Sparse vector with sorted, unique indices below `dim`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    fn from_map(dim: usize, map: HashMap<u32, f64>) -> Self {
        let mut entries: Vec<(u32, f64)> = map.into_iter().filter(|&(_, v)| v != 0.0).collect();
        entries.sort_unstable_by_key(|e| e.0);
        FeatureVector { dim, entries }
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Entries whose index lies in `[lo, hi)`.
    pub fn range(&self, lo: u32, hi: u32) -> &[(u32, f64)] {
        let a = self.entries.partition_point(|e| e.0 < lo);
        let b = self.entries.partition_point(|e| e.0 < hi);
        &self.entries[a..b]
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i as usize] * v).sum()
    }

    fn l2_normalize(&mut self) {
        let norm = self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut self.entries {
                e.1 /= norm;
            }
        }
    }

    fn shifted(&self, offset: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(move |&(i, v)| (i + offset, v))
    }
}

/// 64-bit FNV-1a with a one-byte namespace prefix.
fn fnv1a(namespace: u8, parts: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    };
    eat(namespace);
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            eat(0x1f);
        }
        p.bytes().for_each(&mut eat);
    }
    h
}

/// Tokenized text plus its word n-gram sets, shared by both feature kinds.
#[derive(Debug, Clone)]
pub(crate) struct Analyzed {
    tokens: Vec<String>,
    /// Word n-grams per order (index 0 = unigrams), joined by U+001F.
    word_grams: Vec<BTreeSet<String>>,
}

impl Analyzed {
    pub(crate) fn new(text: &str, cfg: &FeatureConfig) -> Self {
        let tokens: Vec<String> = tokenize(text).tokens().to_vec();
        let word_grams = (1..=cfg.word_ngram_max)
            .map(|n| tokens.windows(n).map(|w| w.join("\u{1f}")).collect())
            .collect();
        Analyzed { tokens, word_grams }
    }
}

/// Hashed, L2-normalized n-gram block of one text, indices in `[0, block_dim)`.
pub(crate) fn text_block(a: &Analyzed, cfg: &FeatureConfig) -> FeatureVector {
    let mask = u64::from(cfg.block_dim() - 1);
    let mut map: HashMap<u32, f64> = HashMap::new();
    let mut add = |h: u64| *map.entry((h & mask) as u32).or_insert(0.0) += 1.0;
    for n in 1..=cfg.word_ngram_max {
        for w in a.tokens.windows(n) {
            let parts: Vec<&str> = w.iter().map(String::as_str).collect();
            add(fnv1a(n as u8, &parts));
        }
    }
    if cfg.char_ngram_max > 0 {
        let padded: Vec<char> = format!(" {} ", a.tokens.join(" ")).chars().collect();
        let mut buf = String::new();
        for n in cfg.char_ngram_min.max(1)..=cfg.char_ngram_max {
            for w in padded.windows(n) {
                buf.clear();
                buf.extend(w);
                add(fnv1a(0x40 + n as u8, &[&buf]));
            }
        }
    }
    let mut v = FeatureVector::from_map(cfg.text_dim(), map);
    v.l2_normalize();
    v
}

fn jaccard(a: &Analyzed, b: &Analyzed) -> f64 {
    let (sa, sb) = (&a.word_grams[0], &b.word_grams[0]);
    let union = sa.union(sb).count();
    if union == 0 {
        0.0
    } else {
        sa.intersection(sb).count() as f64 / union as f64
    }
}

/// Zero-based Jaccard bin; 1.0 falls in the last bin.
pub fn jaccard_bin(j: f64) -> u32 {
    ((j * JACCARD_BINS as f64).floor() as u32).min(JACCARD_BINS - 1)
}

/// Interaction block of a pair, indices in `[0, block_dim)`.
pub(crate) fn interaction_block(a: &Analyzed, b: &Analyzed, cfg: &FeatureConfig) -> FeatureVector {
    let mut entries = Vec::new();
    for (n, (ga, gb)) in a.word_grams.iter().zip(&b.word_grams).enumerate() {
        let shared = ga.intersection(gb).count();
        if shared > 0 {
            entries.push((n as u32, (1.0 + shared as f64).ln()));
        }
    }
    entries.push((JACCARD_OFFSET + jaccard_bin(jaccard(a, b)), 1.0));

    if cfg.shared_ngram_features {
        let span = u64::from(cfg.block_dim() - SHARED_HASH_OFFSET);
        let mut map: HashMap<u32, f64> = HashMap::new();
        for (n, (ga, gb)) in a.word_grams.iter().zip(&b.word_grams).enumerate() {
            for g in ga.intersection(gb) {
                let slot = SHARED_HASH_OFFSET + (fnv1a(0x80 + n as u8, &[g]) % span) as u32;
                *map.entry(slot).or_insert(0.0) += 1.0;
            }
        }
        let mut shared = FeatureVector::from_map(cfg.text_dim(), map);
        shared.l2_normalize();
        entries.extend(shared.entries);
    }
    entries.sort_unstable_by_key(|e| e.0);
    FeatureVector {
        dim: cfg.text_dim(),
        entries,
    }
}

/// Assembles a pair vector from precomputed blocks.
pub(crate) fn assemble_pair(
    side_a: &FeatureVector,
    side_b: &FeatureVector,
    interaction: &FeatureVector,
    cfg: &FeatureConfig,
    out: &mut Vec<(u32, f64)>,
) {
    out.clear();
    let block = cfg.block_dim();
    if cfg.side_blocks {
        out.extend(side_a.shifted(0));
        out.extend(side_b.shifted(block));
    }
    out.extend(interaction.shifted(2 * block));
}

fn non_empty(text: &str, which: &str) -> Result<()> {
    if text.trim().is_empty() {
        Err(Error::invalid(format!("{which} is empty")))
    } else {
        Ok(())
    }
}

/// Single-sentence features for the behavior classifier.
pub fn featurize_text(text: &str, cfg: &FeatureConfig) -> Result<FeatureVector> {
    non_empty(text, "text")?;
    Ok(text_block(&Analyzed::new(text, cfg), cfg))
}

pub fn featurize_pair(text_a: &str, text_b: &str, cfg: &FeatureConfig) -> Result<FeatureVector> {
    non_empty(text_a, "text_a")?;
    non_empty(text_b, "text_b")?;
    let (a, b) = (Analyzed::new(text_a, cfg), Analyzed::new(text_b, cfg));
    let mut entries = Vec::new();
    assemble_pair(
        &text_block(&a, cfg),
        &text_block(&b, cfg),
        &interaction_block(&a, &b, cfg),
        cfg,
        &mut entries,
    );
    Ok(FeatureVector {
        dim: cfg.pair_dim(),
        entries,
    })
}
