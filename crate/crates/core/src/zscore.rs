//! Z-Score baseline: flag a record when any feature sits more than
//! `z_threshold` training standard deviations from its training mean.

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::kmeans::{compute_norm_stats, normalize, select_training_subset, AnomalyVerdict, NormStats};

pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreModel {
    pub norm: NormStats,
    pub z_threshold: f64,
}

/// Fits on the same chronological prefix the K-Means trainer uses.
pub fn train_zscore(features: &[FeatureVector], train_fraction: f64, z_threshold: f64) -> Result<ZScoreModel> {
    if !(z_threshold.is_finite() && z_threshold > 0.0) {
        return Err(Error::Config(format!(
            "z_threshold must be a positive real, got {z_threshold}"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0, 1], got {train_fraction}"
        )));
    }
    let subset = select_training_subset(features, train_fraction);
    if subset.is_empty() {
        return Err(Error::EmptyInput("z-score training subset is empty"));
    }
    if let Some(index) = subset.iter().position(|f| !f.is_finite()) {
        return Err(Error::NonFiniteFeature {
            index,
            timestamp_ms: subset[index].timestamp_ms,
        });
    }
    Ok(ZScoreModel {
        norm: compute_norm_stats(subset)?,
        z_threshold,
    })
}

/// Score is the largest absolute z across features; `cluster` is always 0.
pub fn infer_zscore(features: &[FeatureVector], model: &ZScoreModel) -> Result<Vec<AnomalyVerdict>> {
    features
        .iter()
        .enumerate()
        .map(|(index, f)| {
            if !f.is_finite() {
                return Err(Error::NonFiniteFeature {
                    index,
                    timestamp_ms: f.timestamp_ms,
                });
            }
            let score = normalize(f, &model.norm).iter().fold(0.0f64, |m, z| m.max(z.abs()));
            Ok(AnomalyVerdict {
                timestamp_ms: f.timestamp_ms,
                cluster: 0,
                distance: score,
                is_anomaly: score > model.z_threshold,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::TrainConfig;
    use proptest::prelude::*;

    fn fv(t: i64, v: [f64; 5]) -> FeatureVector {
        FeatureVector::from_values(t, v)
    }

    fn unit_model() -> ZScoreModel {
        ZScoreModel {
            norm: NormStats {
                mean: vec![1.0, 2.0, 3.0, 4.0, 5.0],
                std: vec![0.5; 5],
            },
            z_threshold: 3.0,
        }
    }

    #[test]
    fn constant_training_gets_unit_std() {
        let f: Vec<_> = (0..10).map(|i| fv(i, [2.0; 5])).collect();
        let m = train_zscore(&f, 0.2, 3.0).unwrap();
        assert_eq!(m.norm.std, vec![1.0; 5]);
        assert_eq!(m.z_threshold, 3.0);
    }

    #[test]
    fn shares_kmeans_norm_stats() {
        let f: Vec<_> = (0..50)
            .map(|i| fv(i, [i as f64, (i * i) as f64, 1.0, -(i as f64), 0.5 * i as f64]))
            .collect();
        let z = train_zscore(&f, 0.2, 3.0).unwrap();
        let k = crate::kmeans::train(&f, &TrainConfig::default()).unwrap();
        assert_eq!(z.norm, k.norm);
    }

    #[test]
    fn scoring_cases() {
        let m = unit_model();
        let at_mean = fv(0, [1.0, 2.0, 3.0, 4.0, 5.0]);
        let four_up = fv(1, [1.0, 2.0, 5.0, 4.0, 5.0]);
        let three_down = fv(2, [1.0, 0.5, 3.0, 4.0, 5.0]);
        let v = infer_zscore(&[at_mean, four_up, three_down], &m).unwrap();
        assert_eq!((v[0].distance, v[0].is_anomaly), (0.0, false));
        assert_eq!((v[1].distance, v[1].is_anomaly), (4.0, true));
        assert_eq!((v[2].distance, v[2].is_anomaly), (3.0, false));
        assert!(v.iter().all(|x| x.cluster == 0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(train_zscore(&[], 0.2, 3.0).is_err());
        assert!(train_zscore(&[fv(0, [0.0; 5])], 0.2, 0.0).is_err());
        let mut f = fv(0, [0.0; 5]);
        f.rolling_std = f64::NAN;
        assert!(infer_zscore(&[f], &unit_model()).is_err());
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_flags(
            rows in prop::collection::vec(prop::array::uniform5(-20.0f64..20.0), 1..40),
            t1 in 0.1f64..6.0,
            bump in 0.0f64..6.0,
        ) {
            let f: Vec<_> = rows.iter().enumerate().map(|(i, r)| fv(i as i64, *r)).collect();
            let mut m = unit_model();
            m.z_threshold = t1;
            let low = infer_zscore(&f, &m).unwrap();
            m.z_threshold = t1 + bump;
            let high = infer_zscore(&f, &m).unwrap();
            for (a, b) in low.iter().zip(&high) {
                prop_assert!(!b.is_anomaly || a.is_anomaly);
            }
            // flagged iff some feature deviates more than t1 training stds
            for (v, row) in low.iter().zip(&rows) {
                let dev = row.iter().zip(&unit_model().norm.mean).any(|(x, mu)| ((x - mu) / 0.5).abs() > t1);
                prop_assert_eq!(v.is_anomaly, dev);
            }
        }
    }
}
