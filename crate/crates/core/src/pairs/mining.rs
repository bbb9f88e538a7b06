use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::multiclass::ConfusionMatrix;
use crate::corpus::BehaviorLabel;

pub const DEFAULT_ACCURACY_THRESHOLD: f64 = 0.7;

/// A weak class and the class it is most often mistaken for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HardPair {
    pub class: BehaviorLabel,
    pub partner: BehaviorLabel,
}

/// For every class whose accuracy is below `threshold`, the off-diagonal
/// column with the largest count in its row.
///
/// Ties prefer the partner with the larger column total, then the
/// lexicographically smaller label. A weak class whose row has no
/// off-diagonal mass is skipped with a warning. Output is in label order.
pub fn mine_hard_negative_classes(
    accuracy: &BTreeMap<BehaviorLabel, f64>,
    confusion: &ConfusionMatrix,
    threshold: f64,
) -> Vec<HardPair> {
    let mut out = Vec::new();
    for (&class, &acc) in accuracy {
        if acc >= threshold {
            continue;
        }
        let row = &confusion.counts[class.index()];
        let best = BehaviorLabel::ALL
            .iter()
            .copied()
            .filter(|&p| p != class && row[p.index()] > 0)
            // max_by_key keeps the last maximum, so order the key so that the
            // preferred candidate compares greatest.
            .max_by_key(|&p| (row[p.index()], confusion.column_total(p), std::cmp::Reverse(p)));
        match best {
            Some(partner) => out.push(HardPair { class, partner }),
            None => log::warn!(
                "class {class} has accuracy {acc:.3} but no misclassifications; skipped"
            ),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use BehaviorLabel::*;

    #[test]
    fn nothing_below_threshold() {
        let mut cm = ConfusionMatrix::default();
        for l in BehaviorLabel::ALL {
            cm.counts[l.index()][l.index()] = 10;
        }
        assert!(mine_hard_negative_classes(&cm.per_class_accuracy(), &cm, 0.7).is_empty());
    }

    #[test]
    fn single_off_diagonal_cell() {
        let mut cm = ConfusionMatrix::default();
        for l in BehaviorLabel::ALL {
            cm.counts[l.index()][l.index()] = 100;
        }
        cm.counts[Encouragement.index()][Encouragement.index()] = 69;
        cm.counts[Encouragement.index()][Transparency.index()] = 31;
        let acc = cm.per_class_accuracy();
        assert!((acc[&Encouragement] - 0.69).abs() < 1e-12);
        assert_eq!(
            mine_hard_negative_classes(&acc, &cm, 0.7),
            vec![HardPair { class: Encouragement, partner: Transparency }]
        );
    }

    #[test]
    fn ties_by_column_mass_then_name() {
        let mut cm = ConfusionMatrix::default();
        cm.counts[Similarity.index()][Similarity.index()] = 1;
        cm.counts[Similarity.index()][Credibility.index()] = 4;
        cm.counts[Similarity.index()][Acknowledgment.index()] = 4;
        // Credibility has more column mass.
        cm.counts[Credibility.index()][Credibility.index()] = 5;
        let acc = cm.per_class_accuracy();
        assert_eq!(mine_hard_negative_classes(&acc, &cm, 0.7)[0].partner, Credibility);

        cm.counts[Credibility.index()][Credibility.index()] = 0;
        cm.counts[Acknowledgment.index()][Acknowledgment.index()] = 0;
        let acc = BTreeMap::from([(Similarity, 1.0 / 9.0)]);
        assert_eq!(mine_hard_negative_classes(&acc, &cm, 0.7)[0].partner, Acknowledgment);
    }

    #[test]
    fn weak_class_without_confusions_skipped() {
        let mut cm = ConfusionMatrix::default();
        cm.counts[Similarity.index()][Similarity.index()] = 1;
        let acc = BTreeMap::from([(Similarity, 0.2)]);
        assert!(mine_hard_negative_classes(&acc, &cm, 0.7).is_empty());
    }

    #[test]
    fn rerun_is_identical() {
        let mut cm = ConfusionMatrix::default();
        cm.counts[Transparency.index()][OpinionInquiry.index()] = 3;
        cm.counts[Transparency.index()][Transparency.index()] = 2;
        let acc = cm.per_class_accuracy();
        assert_eq!(
            mine_hard_negative_classes(&acc, &cm, 0.7),
            mine_hard_negative_classes(&acc, &cm, 0.7)
        );
    }
}
