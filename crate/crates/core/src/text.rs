//! Tokenization and the n-gram baselines BLEU@K and DIST@K.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercased word tokens of a text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Contiguous `n`-grams; empty when the sequence is shorter than `n`.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = &[String]> {
        // windows(0) panics
        self.0.windows(n.max(1)).filter(move |_| n > 0)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

/// Splits on anything that is not a letter or digit and lowercases the rest.
pub fn tokenize(text: &str) -> TokenSequence {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(seq: &TokenSequence, n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in seq.ngrams(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with add-one smoothing on every order and the usual
/// brevity penalty.
///
/// An order with no candidate n-grams has precision (0+1)/(0+1) = 1, so
/// `k` larger than the candidate does not zero the score. An empty candidate
/// scores 0.
pub fn bleu_k(candidate: &TokenSequence, reference: &TokenSequence, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("BLEU order k must be >= 1"));
    }
    if reference.is_empty() {
        return Err(Error::invalid("BLEU reference is empty"));
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=k {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        log_sum += ((clipped as f64 + 1.0) / (total as f64 + 1.0)).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    Ok(bp * (log_sum / k as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistScope {
    /// Distinct k-grams over all k-grams of all responses pooled.
    #[default]
    Corpus,
    /// Mean of each response's own ratio. Responses without a k-gram are left
    /// out of the mean.
    PerResponse,
}

fn distinct_ratio<'a>(grams: impl Iterator<Item = &'a [String]>) -> Option<f64> {
    let mut total = 0usize;
    let mut seen = HashSet::new();
    for g in grams {
        total += 1;
        seen.insert(g);
    }
    (total > 0).then(|| seen.len() as f64 / total as f64)
}

/// Distinct k-grams over total k-grams; 0 when there are no k-grams at all.
pub fn dist_k(responses: &[TokenSequence], k: usize, scope: DistScope) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("DIST order k must be >= 1"));
    }
    Ok(match scope {
        DistScope::Corpus => distinct_ratio(responses.iter().flat_map(|r| r.ngrams(k))).unwrap_or(0.0),
        DistScope::PerResponse => {
            let ratios: Vec<f64> = responses
                .iter()
                .filter_map(|r| distinct_ratio(r.ngrams(k)))
                .collect();
            if ratios.is_empty() {
                0.0
            } else {
                ratios.iter().sum::<f64>() / ratios.len() as f64
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> TokenSequence {
        s.split_whitespace().collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, World!"), seq("hello world"));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("I've 2 movies"), seq("i ve 2 movies"));
        assert_eq!(tokenize("  ...!?  "), TokenSequence::default());
        assert_eq!(tokenize("ÉCOLE naïve"), seq("école naïve"));
    }

    #[test]
    fn bleu_examples() {
        let s = seq("the movie was great");
        assert_eq!(bleu_k(&s, &s, 2).unwrap(), 1.0);
        let v = bleu_k(&seq("a b"), &seq("c d"), 1).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let v = bleu_k(&seq("a"), &seq("a b"), 1).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-12);
        assert!((v - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn bleu_edge_cases() {
        assert_eq!(bleu_k(&seq(""), &seq("a"), 2).unwrap(), 0.0);
        assert!(bleu_k(&seq("a"), &seq(""), 2).is_err());
        assert!(bleu_k(&seq("a"), &seq("a"), 0).is_err());
        // Orders beyond the candidate length contribute (0+1)/(0+1).
        assert_eq!(bleu_k(&seq("a b"), &seq("a b"), 4).unwrap(), 1.0);
    }

    #[test]
    fn bleu_clips_repeats() {
        // candidate "a a a" vs reference "a b c": clipped unigram matches 1 of 3
        let v = bleu_k(&seq("a a a"), &seq("a b c"), 1).unwrap();
        assert!((v - 2.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn dist_examples() {
        let c = DistScope::Corpus;
        assert_eq!(dist_k(&[seq("a b c")], 1, c).unwrap(), 1.0);
        assert!((dist_k(&[seq("a a a")], 1, c).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((dist_k(&[seq("a b a b")], 2, c).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(dist_k(&[seq("a")], 2, c).unwrap(), 0.0);
        assert_eq!(dist_k(&[], 1, c).unwrap(), 0.0);
        assert!(dist_k(&[seq("a")], 0, c).is_err());
    }

    #[test]
    fn dist_scopes_differ_on_shared_grams() {
        let rs = [seq("a b"), seq("a b")];
        assert_eq!(dist_k(&rs, 1, DistScope::PerResponse).unwrap(), 1.0);
        assert_eq!(dist_k(&rs, 1, DistScope::Corpus).unwrap(), 0.5);
        // A response too short for k is skipped in the per-response mean.
        let rs = [seq("a a"), seq("b")];
        assert_eq!(dist_k(&rs, 2, DistScope::PerResponse).unwrap(), 1.0);
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[a-e]{1,2}", 1..12)
    }

    proptest! {
        #[test]
        fn bleu_self_is_one(ws in words(), k in 1usize..5) {
            let s: TokenSequence = ws.iter().cloned().collect();
            prop_assume!(k <= s.len());
            prop_assert!((bleu_k(&s, &s, k).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn bleu_invariant_under_renaming(a in words(), b in words(), k in 1usize..4) {
            let rename = |ws: &[String]| -> TokenSequence { ws.iter().map(|w| format!("x{w}y")).collect() };
            let (ca, cb): (TokenSequence, TokenSequence) = (a.iter().cloned().collect(), b.iter().cloned().collect());
            let plain = bleu_k(&ca, &cb, k).unwrap();
            let renamed = bleu_k(&rename(&a), &rename(&b), k).unwrap();
            prop_assert_eq!(plain, renamed);
            prop_assert!((0.0..=1.0).contains(&plain));
        }

        #[test]
        fn dist_range_and_uniqueness(rs in prop::collection::vec(words(), 1..5), k in 1usize..3) {
            let seqs: Vec<TokenSequence> = rs.iter().map(|w| w.iter().cloned().collect()).collect();
            let d = dist_k(&seqs, k, DistScope::Corpus).unwrap();
            let grams: Vec<&[String]> = seqs.iter().flat_map(|s| s.ngrams(k)).collect();
            if grams.is_empty() {
                prop_assert_eq!(d, 0.0);
            } else {
                prop_assert!(d > 0.0 && d <= 1.0);
                let unique = grams.iter().collect::<HashSet<_>>().len() == grams.len();
                prop_assert_eq!(d == 1.0, unique);
            }
            let single = &seqs[..1];
            prop_assert_eq!(
                dist_k(single, k, DistScope::PerResponse).unwrap(),
                dist_k(single, k, DistScope::Corpus).unwrap()
            );
        }
    }
}
