//! Matching predicted events against reference events, and the scores and
//! time-shift histogram derived from the matching.
//!
//! Two events are candidates for a match when their mid-times are within
//! `tolerance` seconds. Candidates are accepted greedily in order of
//! increasing `|delta_t|` (then predicted start, then true start), each event
//! taking part in at most one pair.

use serde::{Deserialize, Serialize};

use crate::types::{EventSet, Interval};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub predicted: Interval,
    pub truth: Interval,
    /// Predicted mid-time minus true mid-time, seconds.
    pub delta_t: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_predicted: usize,
    pub unmatched_truth: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub tolerance: f64,
    pub delta_t_mean: f64,
    pub delta_t_std: f64,
}

pub fn match_events(predicted: &EventSet, truth: &EventSet, tolerance: f64) -> MatchResult {
    let pred = predicted.events();
    let tru = truth.events();
    let mut candidates = Vec::new();
    // both sets are start-sorted; mids are not, so a plain scan is used
    for (i, p) in pred.iter().enumerate() {
        for (j, t) in tru.iter().enumerate() {
            let d = p.mid() - t.mid();
            if d.abs() <= tolerance {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.abs()
            .total_cmp(&b.0.abs())
            .then(pred[a.1].start.total_cmp(&pred[b.1].start))
            .then(tru[a.2].start.total_cmp(&tru[b.2].start))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut used_p = vec![false; pred.len()];
    let mut used_t = vec![false; tru.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in candidates {
        if used_p[i] || used_t[j] {
            continue;
        }
        used_p[i] = true;
        used_t[j] = true;
        pairs.push(MatchedPair {
            predicted: pred[i],
            truth: tru[j],
            delta_t: d,
        });
    }
    pairs.sort_by(|a, b| a.truth.start.total_cmp(&b.truth.start));
    MatchResult {
        unmatched_predicted: pred.len() - pairs.len(),
        unmatched_truth: tru.len() - pairs.len(),
        pairs,
        tolerance,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 from precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn score(m: &MatchResult) -> ScoreReport {
    let tp = m.pairs.len();
    let (fp, fn_) = (m.unmatched_predicted, m.unmatched_truth);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let (mean, std) = if tp == 0 {
        (0.0, 0.0)
    } else {
        let mean = m.pairs.iter().map(|p| p.delta_t).sum::<f64>() / tp as f64;
        let var = m.pairs.iter().map(|p| (p.delta_t - mean).powi(2)).sum::<f64>() / tp as f64;
        (mean, var.sqrt())
    };
    ScoreReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        tolerance: m.tolerance,
        delta_t_mean: mean,
        delta_t_std: std,
    }
}

/// Non-empty histogram bins, ascending. Bin `k` covers
/// `[(k - 1/2) w, (k + 1/2) w)`, so zero is a bin centre.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub bin_width: f64,
    pub lower_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn delta_t_histogram(m: &MatchResult, bin_width: f64) -> Histogram {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut bins = std::collections::BTreeMap::<i64, usize>::new();
    for p in &m.pairs {
        let k = (p.delta_t / bin_width + 0.5).floor() as i64;
        *bins.entry(k).or_default() += 1;
    }
    Histogram {
        bin_width,
        lower_edges: bins.keys().map(|&k| (k as f64 - 0.5) * bin_width).collect(),
        counts: bins.values().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(mids: &[f64]) -> EventSet {
        EventSet::new(mids.iter().map(|&m| Interval::centered(m, 2.0)).collect())
    }

    #[test]
    fn identical_sets_match_fully() {
        let e = at(&[1.0, 10.0, 30.0]);
        let m = match_events(&e, &e, 1.0);
        assert_eq!(m.pairs.len(), 3);
        assert!(m.pairs.iter().all(|p| p.delta_t == 0.0));
        assert_eq!(score(&m).f1, 1.0);
    }

    #[test]
    fn empty_prediction() {
        let m = match_events(&EventSet::empty(), &at(&[1.0, 2.0]), 1.0);
        let s = score(&m);
        assert_eq!((s.true_positive, s.false_negative, s.false_positive), (0, 2, 0));
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn start_time_breaks_distance_ties() {
        let m = match_events(&at(&[10.0, 12.0]), &at(&[11.0]), 2.0);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].predicted.mid(), 10.0);
        assert_eq!(m.pairs[0].delta_t, -1.0);
        assert_eq!(m.unmatched_predicted, 1);
    }

    #[test]
    fn greedy_can_be_suboptimal_when_truths_are_close() {
        // p1 is within tolerance of both truths; greedy takes its nearest
        // truth and strands p2, a maximum matching pairs both.
        let m = match_events(&at(&[0.0, 2.5]), &at(&[1.0, -2.0]), 2.5);
        assert_eq!(m.pairs.len(), 1);
    }

    #[test]
    fn score_arithmetic() {
        let m = MatchResult {
            pairs: vec![
                MatchedPair {
                    predicted: Interval::centered(0.0, 1.0),
                    truth: Interval::centered(0.0, 1.0),
                    delta_t: 0.0
                };
                3
            ],
            unmatched_predicted: 1,
            unmatched_truth: 1,
            tolerance: 1.0,
        };
        let s = score(&m);
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        let empty = score(&MatchResult::default());
        assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn f1_of_full_precision_and_73_percent_recall() {
        let f1 = f1_score(1.0, 0.73);
        assert_eq!(format!("{f1:.4}"), "0.8439");
        assert_eq!(format!("{f1:.2}"), "0.84");
    }

    fn pairs_with(deltas: &[f64]) -> MatchResult {
        MatchResult {
            pairs: deltas
                .iter()
                .map(|&d| MatchedPair {
                    predicted: Interval::centered(d, 1.0),
                    truth: Interval::centered(0.0, 1.0),
                    delta_t: d,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn histogram_examples() {
        let h = delta_t_histogram(&pairs_with(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!((h.lower_edges, h.counts), (vec![-0.5], vec![3]));
        let h = delta_t_histogram(&pairs_with(&[-1.0, 1.0]), 1.0);
        assert_eq!((h.lower_edges, h.counts), (vec![-1.5, 0.5], vec![1, 1]));
        assert!(delta_t_histogram(&MatchResult::default(), 1.0).counts.is_empty());
    }

    proptest! {
        #[test]
        fn histogram_conserves_counts(deltas in prop::collection::vec(-50.0f64..50.0, 0..1000), w in 0.1f64..5.0) {
            let h = delta_t_histogram(&pairs_with(&deltas), w);
            prop_assert_eq!(h.counts.iter().sum::<usize>(), deltas.len());
        }

        #[test]
        fn counts_conserved_and_shift_invariant(
            p in prop::collection::vec((0u32..1600).prop_map(|v| v as f64 / 8.0), 0..12),
            t in prop::collection::vec((0u32..1600).prop_map(|v| v as f64 / 8.0), 0..12),
            tol in 0.5f64..10.0,
            shift in -1000i32..1000,
        ) {
            let (pe, te) = (at(&p), at(&t));
            let m = match_events(&pe, &te, tol);
            let s = score(&m);
            prop_assert_eq!(s.true_positive + s.false_positive, p.len());
            prop_assert_eq!(s.true_positive + s.false_negative, t.len());
            prop_assert!(m.pairs.iter().all(|x| x.delta_t.abs() <= tol));
            prop_assert!(s.f1 <= 2.0 * s.precision.min(s.recall) + 1e-15);
            prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-15);
            // eighths shifted by integers stay exact, so every delta_t is unchanged
            let sh = shift as f64;
            let ps: Vec<f64> = p.iter().map(|x| x + sh).collect();
            let ts: Vec<f64> = t.iter().map(|x| x + sh).collect();
            let m2 = match_events(&at(&ps), &at(&ts), tol);
            prop_assert_eq!(m2.pairs.len(), m.pairs.len());
        }
    }
}
