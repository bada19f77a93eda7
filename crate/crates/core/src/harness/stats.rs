//! Aggregation helpers shared by evaluation and ablation reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single value.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Index of the value closest to the mean; ties go to the lower `key`
/// (trial seed).
pub fn representative_index(values: &[f64], keys: &[u64]) -> Option<usize> {
    assert_eq!(values.len(), keys.len());
    let mean = mean_std(values).mean;
    (0..values.len()).min_by(|&a, &b| {
        let (da, db) = ((values[a] - mean).abs(), (values[b] - mean).abs());
        da.total_cmp(&db).then(keys[a].cmp(&keys[b]))
    })
}

/// First episode index `i ≥ window − 1` whose trailing `window`-episode mean
/// of `series` reaches `threshold`; `series.len()` when never reached.
pub fn milestone_episode(series: &[f64], threshold: f64, window: usize) -> usize {
    let window = window.max(1);
    let mut sum = 0.0;
    for (i, v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        if i + 1 >= window && sum / window as f64 >= threshold {
            return i;
        }
    }
    series.len()
}

/// Mean of `series`, NaN when empty.
pub fn mean_of(series: &[f64]) -> f64 {
    mean_std(series).mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_value() {
        assert_eq!(mean_std(&[3.5]), MeanStd { mean: 3.5, std: 0.0 });
        assert_eq!(representative_index(&[3.5], &[7]), Some(0));
    }

    #[test]
    fn two_trials_tie_goes_to_lower_seed() {
        let m = mean_std(&[100.0, 200.0]);
        assert_eq!(m.mean, 150.0);
        assert!((m.std - 50.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(representative_index(&[100.0, 200.0], &[4, 3]), Some(1));
        assert_eq!(representative_index(&[100.0, 200.0], &[3, 4]), Some(0));
    }

    #[test]
    fn milestone_cases() {
        assert_eq!(milestone_episode(&[0.0, 1.0, 1.0], 0.5, 1), 1);
        // trailing pair means: 0.5, 1.0
        assert_eq!(milestone_episode(&[0.0, 1.0, 1.0], 0.75, 2), 2);
        assert_eq!(milestone_episode(&[0.9, 0.9], 0.5, 3), 2);
        assert_eq!(milestone_episode(&[], 0.5, 3), 0);
    }

    proptest! {
        #[test]
        fn milestone_matches_brute_force(
            series in proptest::collection::vec(0.0f64..1.0, 0..80),
            threshold in 0.0f64..1.0,
            window in 1usize..12,
        ) {
            let brute = (0..series.len())
                .find(|&i| i + 1 >= window
                    && series[i + 1 - window..=i].iter().sum::<f64>() / window as f64 >= threshold - 1e-12)
                .unwrap_or(series.len());
            let fast = milestone_episode(&series, threshold, window);
            // the running sum may differ from the direct sum in the last ulp
            let borderline = fast == brute || {
                let i = fast.min(brute);
                let w = &series[i + 1 - window..=i];
                (w.iter().sum::<f64>() / window as f64 - threshold).abs() < 1e-9
            };
            prop_assert!(borderline);
        }

        #[test]
        fn std_matches_two_pass(values in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let m = mean_std(&values);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
            prop_assert!((m.std - var.sqrt()).abs() <= 1e-9 * (1.0 + var.sqrt()));
        }
    }
}
