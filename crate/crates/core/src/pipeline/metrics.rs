use serde::{Deserialize, Serialize};

use crate::scenario::Label;

/// Binary confusion counts; collision is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut cm = Self::default();
        for (truth, predicted) in pairs {
            cm.record(truth, predicted);
        }
        cm
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Collision, Label::Collision) => self.tp += 1,
            (Label::Safe, Label::Collision) => self.fp += 1,
            (Label::Safe, Label::Safe) => self.tn += 1,
            (Label::Collision, Label::Safe) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy, precision, recall and F1 of `cm`.
///
/// With no predicted positives, precision is 1 if no positive was missed and
/// 0 otherwise; recall with no actual positives is 1 if nothing was falsely
/// flagged and 0 otherwise. An empty matrix has accuracy 0.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let ratio = |num: u64, den: u64, empty: f64| {
        if den == 0 {
            empty
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp, if cm.fn_ == 0 { 1.0 } else { 0.0 });
    let recall = ratio(cm.tp, cm.tp + cm.fn_, if cm.fp == 0 { 1.0 } else { 0.0 });
    Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total(), 0.0),
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_f1_values() {
        assert!((f1_score(0.913, 0.778) - 0.840).abs() < 1e-3);
        assert!((f1_score(0.609, 0.933) - 0.737).abs() < 2e-3);
        assert!((f1_score(0.826, 0.760) - 0.792).abs() < 2e-3);
    }

    #[test]
    fn degenerate_conventions() {
        let m = compute_metrics(&ConfusionMatrix {
            tn: 10,
            ..Default::default()
        });
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let all_missed = compute_metrics(&ConfusionMatrix {
            fn_: 3,
            tn: 2,
            ..Default::default()
        });
        assert_eq!(
            (all_missed.precision, all_missed.recall, all_missed.f1),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn counts_from_pairs() {
        use Label::*;
        let cm = ConfusionMatrix::from_pairs([
            (Collision, Collision),
            (Collision, Safe),
            (Safe, Safe),
            (Safe, Collision),
            (Safe, Safe),
        ]);
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                tn: 2,
                fn_: 1
            }
        );
        let m = compute_metrics(&cm);
        assert_eq!(m.accuracy, 0.6);
        assert_eq!(m.f1, 0.5);
    }
}
