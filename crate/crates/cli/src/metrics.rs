//! Scoring verdicts against ground-truth anomaly intervals.

use std::collections::BTreeMap;

use diol_core::datagen::TruthInterval;
use diol_core::AnomalyVerdict;
use serde::Serialize;

/// True when some flagged verdict falls inside `[start_ms, end_ms]`.
pub fn interval_detected(verdicts: &[AnomalyVerdict], interval: &TruthInterval) -> bool {
    verdicts
        .iter()
        .any(|v| v.is_anomaly && interval.contains(v.timestamp_ms))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionMetrics {
    pub intervals: usize,
    pub detected: usize,
    /// `detected / intervals`; 1.0 when there are no intervals.
    pub recall: f64,
    /// Kind name to `[detected, total]`.
    pub per_kind: BTreeMap<String, [usize; 2]>,
    pub records_outside_truth: usize,
    pub false_positives: usize,
    pub false_positive_rate: f64,
}

pub fn evaluate(verdicts: &[AnomalyVerdict], truth: &[TruthInterval]) -> DetectionMetrics {
    let mut per_kind: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    let mut detected = 0;
    for t in truth {
        let hit = interval_detected(verdicts, t);
        let entry = per_kind.entry(t.kind.name().to_string()).or_default();
        entry[1] += 1;
        if hit {
            entry[0] += 1;
            detected += 1;
        }
    }
    let outside: Vec<&AnomalyVerdict> = verdicts
        .iter()
        .filter(|v| !truth.iter().any(|t| t.contains(v.timestamp_ms)))
        .collect();
    let false_positives = outside.iter().filter(|v| v.is_anomaly).count();
    DetectionMetrics {
        intervals: truth.len(),
        detected,
        recall: ratio(detected, truth.len(), 1.0),
        per_kind,
        records_outside_truth: outside.len(),
        false_positives,
        false_positive_rate: ratio(false_positives, outside.len(), 0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalAgreement {
    pub intervals: usize,
    pub kmeans_detected: usize,
    pub zscore_detected: usize,
    /// Fraction of intervals on which both detectors reach the same decision.
    pub agreement: f64,
}

pub fn interval_agreement(
    kmeans: &[AnomalyVerdict],
    zscore: &[AnomalyVerdict],
    truth: &[TruthInterval],
) -> IntervalAgreement {
    let mut kmeans_detected = 0;
    let mut zscore_detected = 0;
    let mut same = 0;
    for t in truth {
        let a = interval_detected(kmeans, t);
        let b = interval_detected(zscore, t);
        kmeans_detected += usize::from(a);
        zscore_detected += usize::from(b);
        same += usize::from(a == b);
    }
    IntervalAgreement {
        intervals: truth.len(),
        kmeans_detected,
        zscore_detected,
        agreement: ratio(same, truth.len(), 1.0),
    }
}

/// Fraction of records on which two verdict streams raise the same flag.
pub fn record_agreement(a: &[AnomalyVerdict], b: &[AnomalyVerdict]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x.is_anomaly == y.is_anomaly).count();
    ratio(same, a.len().min(b.len()), 1.0)
}

fn ratio(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use diol_core::datagen::AnomalyKind;

    fn v(t: i64, flag: bool) -> AnomalyVerdict {
        AnomalyVerdict {
            timestamp_ms: t,
            cluster: 0,
            distance: 0.0,
            is_anomaly: flag,
        }
    }

    fn iv(kind: AnomalyKind, start_ms: i64, end_ms: i64) -> TruthInterval {
        TruthInterval { kind, start_ms, end_ms }
    }

    #[test]
    fn recall_and_false_positives() {
        let verdicts = [
            v(0, true),
            v(1000, false),
            v(2000, true),
            v(3000, false),
            v(4000, false),
        ];
        let truth = [
            iv(AnomalyKind::ShortCycle, 2000, 3000),
            iv(AnomalyKind::ProlongedOff, 3500, 4500),
        ];
        let m = evaluate(&verdicts, &truth);
        assert_eq!((m.intervals, m.detected, m.recall), (2, 1, 0.5));
        assert_eq!(m.per_kind["ShortCycle"], [1, 1]);
        assert_eq!(m.per_kind["ProlongedOff"], [0, 1]);
        assert_eq!((m.records_outside_truth, m.false_positives), (2, 1));
        assert_eq!(m.false_positive_rate, 0.5);
    }

    #[test]
    fn interval_bounds_are_inclusive() {
        let t = iv(AnomalyKind::ExtendedRuntime, 1000, 2000);
        assert!(interval_detected(&[v(2000, true)], &t));
        assert!(interval_detected(&[v(1000, true)], &t));
        assert!(!interval_detected(&[v(2001, true), v(1500, false)], &t));
    }

    #[test]
    fn agreement_counts_matching_decisions() {
        let truth = [iv(AnomalyKind::ShortCycle, 0, 10), iv(AnomalyKind::ShortCycle, 20, 30)];
        let a = [v(5, true), v(25, true)];
        let b = [v(5, true), v(25, false)];
        let g = interval_agreement(&a, &b, &truth);
        assert_eq!((g.kmeans_detected, g.zscore_detected, g.agreement), (2, 1, 0.5));
        assert_eq!(record_agreement(&a, &b), 0.5);
        assert_eq!(evaluate(&[], &[]).recall, 1.0);
    }
}
