//! Construction of the Original and Mixed-hard pair training sets.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mining::HardPair;
use crate::corpus::{BehaviorLabel, PairLabel, PairSource, SentencePair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSizes {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_hard: usize,
}

impl Default for PairSizes {
    fn default() -> Self {
        PairSizes {
            n_pos: 50_000,
            n_neg: 50_000,
            n_hard: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSets {
    pub original: Vec<SentencePair>,
    pub mixed_hard: Vec<SentencePair>,
    /// Sizes actually produced after scaling to the available data.
    pub sizes: PairSizes,
    /// Factor applied to the requested sizes (1.0 when none was needed).
    pub scale: f64,
}

type Key = (usize, usize);

fn key(i: usize, j: usize) -> Key {
    (i.min(j), i.max(j))
}

/// Draws `want` distinct unordered index pairs, none of them in `exclude`,
/// or `None` if the pool minus `exclude` is too small.
///
/// Uses rejection sampling while the request is small relative to the pool,
/// and a shuffled enumeration otherwise so that near-exhaustive requests
/// terminate.
fn sample_distinct(
    rng: &mut ChaCha8Rng,
    want: usize,
    capacity: usize,
    exclude: &HashSet<Key>,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> (usize, usize),
    enumerate: impl Fn() -> Vec<(usize, usize)>,
) -> Option<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(want);
    if want == 0 {
        return Some(out);
    }
    let mut seen: HashSet<Key> = HashSet::with_capacity(want);
    if want * 2 <= capacity.saturating_sub(exclude.len()) {
        while out.len() < want {
            let (i, j) = draw(rng);
            let k = key(i, j);
            if !exclude.contains(&k) && seen.insert(k) {
                out.push((i, j));
            }
        }
        return Some(out);
    }
    let mut all = enumerate();
    all.shuffle(rng);
    for (i, j) in all {
        if out.len() == want {
            break;
        }
        if !exclude.contains(&key(i, j)) {
            out.push(if rng.gen_bool(0.5) { (i, j) } else { (j, i) });
        }
    }
    (out.len() == want).then_some(out)
}

/// Samples same-behavior and different-behavior sentence pairs, then swaps
/// `n_hard` randomly chosen negatives for pairs drawn from the hard class
/// pairs.
///
/// When the data cannot supply the requested counts, all three are scaled
/// by the same factor so their ratio is kept.
pub fn build_training_sets(
    sentences: &[(String, BehaviorLabel)],
    requested: PairSizes,
    hard_pairs: &[HardPair],
    seed: u64,
) -> Result<TrainingSets> {
    if requested.n_hard > requested.n_neg {
        return Err(Error::invalid(format!(
            "n_hard ({}) exceeds n_neg ({})",
            requested.n_hard, requested.n_neg
        )));
    }
    let mut by_label: BTreeMap<BehaviorLabel, Vec<usize>> = BTreeMap::new();
    for (i, (text, label)) in sentences.iter().enumerate() {
        if text.trim().is_empty() {
            return Err(Error::invalid(format!("sentence {} is empty", i + 1)));
        }
        by_label.entry(*label).or_default().push(i);
    }
    let count = |l: BehaviorLabel| by_label.get(&l).map_or(0, Vec::len);

    let hard_classes: BTreeSet<(BehaviorLabel, BehaviorLabel)> = hard_pairs
        .iter()
        .map(|h| (h.class.min(h.partner), h.class.max(h.partner)))
        .collect();
    if requested.n_hard > 0 {
        if hard_classes.is_empty() {
            return Err(Error::invalid("n_hard > 0 but no hard class pairs were given"));
        }
        for &(a, b) in &hard_classes {
            if a == b {
                return Err(Error::invalid(format!("hard pair {a} -> {b} names one class twice")));
            }
            for l in [a, b] {
                if count(l) < 2 {
                    return Err(Error::invalid(format!(
                        "hard class {l} has {} sentences, need at least 2",
                        count(l)
                    )));
                }
            }
        }
    }

    let n = sentences.len();
    let cap_pos: usize = by_label.values().map(|v| v.len() * v.len().saturating_sub(1) / 2).sum();
    let cap_neg = (n * n - by_label.values().map(|v| v.len() * v.len()).sum::<usize>()) / 2;
    let cap_hard: usize = hard_classes.iter().map(|&(a, b)| count(a) * count(b)).sum();

    let caps = Caps {
        pos: cap_pos,
        neg: cap_neg,
        hard: cap_hard,
    };
    let mut scale = 1.0f64;
    for (req, cap) in [
        (requested.n_pos, cap_pos),
        (requested.n_neg, cap_neg),
        (requested.n_hard, cap_hard),
    ] {
        if req > 0 {
            scale = scale.min(cap as f64 / req as f64);
        }
    }
    let ctx = Context {
        sentences,
        labels: sentences.iter().map(|s| s.1).collect(),
        by_label: &by_label,
        hard_classes: hard_classes.into_iter().collect(),
    };
    // Hard pairs must also avoid the negatives that stay in the mixed set,
    // which the capacities above do not see. When that leaves too few, shrink
    // all three counts together and retry.
    loop {
        let sizes = if scale < 1.0 {
            let s = |x: usize| (x as f64 * scale).floor() as usize;
            PairSizes {
                n_pos: s(requested.n_pos),
                n_neg: s(requested.n_neg),
                n_hard: s(requested.n_hard),
            }
        } else {
            requested
        };
        if (requested.n_pos > 0 && sizes.n_pos == 0) || (requested.n_neg > 0 && sizes.n_neg == 0) {
            return Err(Error::invalid(
                "not enough labeled sentences to form both same- and different-behavior pairs",
            ));
        }
        if let Some((original, mixed_hard)) = sample_sets(&ctx, &caps, sizes, seed)? {
            if scale < 1.0 {
                log::warn!(
                    "scaled pair counts by {scale:.4} to {}/{}/{} (pos/neg/hard)",
                    sizes.n_pos,
                    sizes.n_neg,
                    sizes.n_hard
                );
            }
            return Ok(TrainingSets {
                original,
                mixed_hard,
                sizes,
                scale: scale.min(1.0),
            });
        }
        scale *= 0.9;
    }
}

struct Caps {
    pos: usize,
    neg: usize,
    hard: usize,
}

struct Context<'a> {
    sentences: &'a [(String, BehaviorLabel)],
    labels: Vec<BehaviorLabel>,
    by_label: &'a BTreeMap<BehaviorLabel, Vec<usize>>,
    hard_classes: Vec<(BehaviorLabel, BehaviorLabel)>,
}

type Sets = (Vec<SentencePair>, Vec<SentencePair>);

/// One sampling attempt at fixed sizes; `None` if the hard pool ran dry.
fn sample_sets(ctx: &Context<'_>, caps: &Caps, sizes: PairSizes, seed: u64) -> Result<Option<Sets>> {
    let (labels, by_label) = (&ctx.labels, ctx.by_label);
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let none = HashSet::new();
    let short = || Error::invalid("pair pool smaller than its capacity");

    let groups: Vec<&Vec<usize>> = by_label.values().filter(|v| v.len() >= 2).collect();
    let positives = if sizes.n_pos == 0 {
        Vec::new()
    } else {
        let weights = WeightedIndex::new(groups.iter().map(|g| g.len() * (g.len() - 1)))
            .map_err(|e| Error::invalid(format!("positive sampling: {e}")))?;
        sample_distinct(
            &mut rng,
            sizes.n_pos,
            caps.pos,
            &none,
            |r| {
                let g = groups[weights.sample(r)];
                let picks: Vec<usize> = g.choose_multiple(r, 2).copied().collect();
                (picks[0], picks[1])
            },
            || {
                let mut all = Vec::new();
                for g in &groups {
                    for (x, &i) in g.iter().enumerate() {
                        all.extend(g[x + 1..].iter().map(|&j| (i, j)));
                    }
                }
                all
            },
        )
        .ok_or_else(short)?
    };

    let negatives = sample_distinct(
        &mut rng,
        sizes.n_neg,
        caps.neg,
        &none,
        |r| loop {
            let (i, j) = (r.gen_range(0..n), r.gen_range(0..n));
            if labels[i] != labels[j] {
                return (i, j);
            }
        },
        || {
            let mut all = Vec::new();
            for i in 0..n {
                all.extend((i + 1..n).filter(|&j| labels[i] != labels[j]).map(|j| (i, j)));
            }
            all
        },
    )
    .ok_or_else(short)?;

    let make = |(i, j): (usize, usize), source: PairSource| SentencePair {
        text_a: ctx.sentences[i].0.clone(),
        text_b: ctx.sentences[j].0.clone(),
        label: PairLabel::from_same(labels[i] == labels[j]),
        source,
    };

    let mut original: Vec<((usize, usize), SentencePair)> = positives
        .iter()
        .chain(&negatives)
        .map(|&ij| (ij, make(ij, PairSource::Original)))
        .collect();
    original.shuffle(&mut rng);

    // Negatives to swap out, chosen uniformly.
    let mut neg_positions: Vec<usize> = (0..original.len())
        .filter(|&p| original[p].1.label == PairLabel::DifferentBehavior)
        .collect();
    neg_positions.shuffle(&mut rng);
    let replaced = &neg_positions[..sizes.n_hard];
    let kept: HashSet<Key> = neg_positions[sizes.n_hard..]
        .iter()
        .map(|&p| key(original[p].0 .0, original[p].0 .1))
        .collect();

    let hard_list = &ctx.hard_classes;
    let count = |l: BehaviorLabel| by_label.get(&l).map_or(0, Vec::len);
    let hard = if sizes.n_hard == 0 {
        Vec::new()
    } else {
        let weights = WeightedIndex::new(hard_list.iter().map(|&(a, b)| count(a) * count(b)))
            .map_err(|e| Error::invalid(format!("hard sampling: {e}")))?;
        let drawn = sample_distinct(
            &mut rng,
            sizes.n_hard,
            caps.hard,
            &kept,
            |r| {
                let (a, b) = hard_list[weights.sample(r)];
                let i = *by_label[&a].choose(r).unwrap();
                let j = *by_label[&b].choose(r).unwrap();
                if r.gen_bool(0.5) {
                    (i, j)
                } else {
                    (j, i)
                }
            },
            || {
                let mut all = Vec::new();
                for &(a, b) in hard_list {
                    for &i in &by_label[&a] {
                        all.extend(by_label[&b].iter().map(|&j| (i, j)));
                    }
                }
                all
            },
        );
        match drawn {
            Some(h) => h,
            None => return Ok(None),
        }
    };

    let mut mixed_hard: Vec<SentencePair> = original.iter().map(|(_, p)| p.clone()).collect();
    for (&pos, &ij) in replaced.iter().zip(&hard) {
        mixed_hard[pos] = make(ij, PairSource::HardNegative);
    }
    Ok(Some((original.into_iter().map(|(_, p)| p).collect(), mixed_hard)))
}
