use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{align, multilabel_from_sets, predicted_set, EvalError, MultiLabelOptions, MultiLabelReport, Truth};
use crate::model::PredictionRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTailConfig {
    pub coverage_fraction: f64,
    pub forced_head_labels: BTreeSet<String>,
}

impl Default for HeadTailConfig {
    fn default() -> Self {
        HeadTailConfig {
            coverage_fraction: 0.5,
            forced_head_labels: BTreeSet::from(["S8".to_string()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HeadTailPartition {
    pub head: BTreeSet<String>,
    pub tail: BTreeSet<String>,
}

/// Most frequent labels until their cumulative share reaches the coverage
/// fraction, plus the forced labels. Equal frequencies are taken in id order.
pub fn head_tail_partition(freqs: &BTreeMap<String, usize>, cfg: &HeadTailConfig) -> HeadTailPartition {
    let total: usize = freqs.values().sum();
    let mut ranked: Vec<(&String, usize)> = freqs.iter().map(|(k, &v)| (k, v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut head = BTreeSet::new();
    let mut cum = 0usize;
    for (label, count) in ranked {
        if total > 0 && cum as f64 / total as f64 >= cfg.coverage_fraction {
            break;
        }
        cum += count;
        head.insert(label.clone());
    }
    for forced in &cfg.forced_head_labels {
        if freqs.contains_key(forced) {
            head.insert(forced.clone());
        } else {
            warn!("forced head label {forced} does not occur in the frequency table");
        }
    }
    let tail = freqs.keys().filter(|k| !head.contains(*k)).cloned().collect();
    HeadTailPartition { head, tail }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTailReport {
    pub partition: HeadTailPartition,
    pub head: MultiLabelReport,
    pub tail: MultiLabelReport,
    /// Exact match of the tail-restricted sets over samples with at least one
    /// expected tail label. Absent when there are none.
    pub tail_only_accuracy: Option<f64>,
    pub tail_only_samples: usize,
}

fn restrict(set: &BTreeSet<String>, to: &BTreeSet<String>) -> BTreeSet<String> {
    set.intersection(to).cloned().collect()
}

pub fn head_tail_metrics(
    preds: &[PredictionRecord],
    truth: &[Truth],
    partition: &HeadTailPartition,
    opts: MultiLabelOptions,
) -> Result<HeadTailReport, EvalError> {
    let sets: Vec<_> = align(preds, truth)?
        .into_iter()
        .map(|(p, t)| (predicted_set(p), t.label_set()))
        .collect();
    let side = |labels: &BTreeSet<String>| -> Vec<_> {
        sets.iter().map(|(p, t)| (restrict(p, labels), restrict(t, labels))).collect()
    };
    let head_pairs = side(&partition.head);
    let tail_pairs = side(&partition.tail);
    let tail_only: Vec<_> = tail_pairs.iter().filter(|(_, t)| !t.is_empty()).collect();
    let tail_only_accuracy = (!tail_only.is_empty())
        .then(|| tail_only.iter().filter(|(p, t)| p == t).count() as f64 / tail_only.len() as f64);
    Ok(HeadTailReport {
        head: multilabel_from_sets(&head_pairs, &partition.head, opts),
        tail: multilabel_from_sets(&tail_pairs, &partition.tail, opts),
        tail_only_samples: tail_only.len(),
        tail_only_accuracy,
        partition: partition.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NO_ISSUE;
    use proptest::prelude::*;

    fn freqs(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn worked_partitions() {
        let p = head_tail_partition(&freqs(&[(NO_ISSUE, 50), ("S8", 25), ("A", 15), ("B", 10)]), &HeadTailConfig::default());
        assert_eq!(p.head, set(&[NO_ISSUE, "S8"]));
        assert_eq!(p.tail, set(&["A", "B"]));

        let none = HeadTailConfig {
            coverage_fraction: 0.5,
            forced_head_labels: BTreeSet::new(),
        };
        assert_eq!(head_tail_partition(&freqs(&[("X", 60), ("Y", 40)]), &none).head, set(&["X"]));

        let all = HeadTailConfig {
            coverage_fraction: 1.0,
            ..none
        };
        let f = freqs(&[("X", 6), ("Y", 4), ("Z", 1)]);
        assert_eq!(head_tail_partition(&f, &all).head, set(&["X", "Y", "Z"]));
    }

    #[test]
    fn absent_forced_label_is_ignored() {
        let p = head_tail_partition(&freqs(&[("X", 60), ("Y", 40)]), &HeadTailConfig::default());
        assert_eq!(p.head, set(&["X"]));
        assert_eq!(p.tail, set(&["Y"]));
    }

    fn pred(id: &str, labels: &[&str]) -> PredictionRecord {
        PredictionRecord {
            sample_id: id.into(),
            scores: labels.iter().map(|l| (l.to_string(), 1.0)).collect(),
            decided_labels: set(labels),
        }
    }

    fn truth(id: &str, labels: &[&str]) -> Truth {
        Truth {
            sample_id: id.into(),
            labels: set(labels),
        }
    }

    #[test]
    fn perfect_and_no_tail_samples() {
        let partition = HeadTailPartition {
            head: set(&[NO_ISSUE, "S8"]),
            tail: set(&["A"]),
        };
        let preds = [pred("1", &["S8"]), pred("2", &[NO_ISSUE]), pred("3", &["A", "S8"])];
        let t = [truth("1", &["S8"]), truth("2", &[]), truth("3", &["A", "S8"])];
        let r = head_tail_metrics(&preds, &t, &partition, Default::default()).unwrap();
        assert_eq!(r.head.weighted.f1, 1.0);
        assert_eq!(r.tail.weighted.f1, 1.0);
        assert_eq!(r.tail_only_accuracy, Some(1.0));

        let r = head_tail_metrics(&preds[..2], &t[..2], &partition, Default::default()).unwrap();
        assert_eq!(r.tail_only_accuracy, None);
        assert_eq!(r.tail_only_samples, 0);
    }

    #[test]
    fn tail_only_counts_restricted_sets() {
        let partition = HeadTailPartition {
            head: set(&[NO_ISSUE, "S8"]),
            tail: set(&["A", "B"]),
        };
        // sample 1 misses S8 but matches on the tail; sample 2 adds a wrong tail label
        let preds = [pred("1", &["A"]), pred("2", &["A", "B"]), pred("3", &["S8"])];
        let t = [truth("1", &["A", "S8"]), truth("2", &["A"]), truth("3", &["S8"])];
        let r = head_tail_metrics(&preds, &t, &partition, Default::default()).unwrap();
        assert_eq!(r.tail_only_samples, 2);
        assert_eq!(r.tail_only_accuracy, Some(0.5));
        let b = r.tail.per_type.iter().find(|m| m.type_id == "B").unwrap();
        assert_eq!((b.n, b.counts.fp), (0, 1));
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_cover(
            counts in proptest::collection::btree_map("[A-F]", 0usize..50, 1..6),
            fraction in 0.05f64..=1.0,
        ) {
            let cfg = HeadTailConfig { coverage_fraction: fraction, forced_head_labels: set(&["A"]) };
            let p = head_tail_partition(&counts, &cfg);
            prop_assert!(p.head.is_disjoint(&p.tail));
            let union: BTreeSet<_> = p.head.union(&p.tail).cloned().collect();
            prop_assert_eq!(union, counts.keys().cloned().collect::<BTreeSet<_>>());
        }
    }
}
