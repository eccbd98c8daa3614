//! Convergence-latency summaries per (model, condition).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hypothesis::{mean, sample_variance};
use super::OutcomeRecord;
use crate::debate::ToxicityLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub model_tag: String,
    pub condition: ToxicityLevel,
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; absent for a single observation.
    pub variance: Option<f64>,
    /// `100 * (mean - mean_No) / mean_No`; absent for the No condition and
    /// when the model has no No-condition records.
    pub pct_increase: Option<f64>,
    /// Set when a non-No group has no baseline to compare against.
    pub baseline_missing: bool,
    pub median: f64,
    pub max: u32,
}

pub fn pct_increase(mean: f64, baseline: f64) -> f64 {
    100.0 * (mean - baseline) / baseline
}

/// Groups converged records by (model, condition). Empty groups are simply
/// absent from the output.
pub fn summarize_latency(records: &[OutcomeRecord]) -> Vec<LatencySummary> {
    let mut groups: BTreeMap<(&str, ToxicityLevel), Vec<u32>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.model_tag.as_str(), r.condition))
            .or_default()
            .push(r.t_conv);
    }
    let baselines: BTreeMap<&str, f64> = groups
        .iter()
        .filter(|((_, level), _)| *level == ToxicityLevel::No)
        .map(|((model, _), values)| (*model, mean(&as_f64(values))))
        .collect();

    groups
        .into_iter()
        .map(|((model, condition), mut values)| {
            let xs = as_f64(&values);
            let m = mean(&xs);
            let baseline = baselines.get(model).copied();
            let (pct, missing) = match (condition, baseline) {
                (ToxicityLevel::No, _) => (None, false),
                (_, Some(b)) => (Some(pct_increase(m, b)), false),
                (_, None) => {
                    tracing::warn!(model, %condition, "no No-condition baseline; % increase omitted");
                    (None, true)
                }
            };
            values.sort_unstable();
            LatencySummary {
                model_tag: model.to_string(),
                condition,
                n: values.len(),
                mean: m,
                variance: sample_variance(&xs),
                pct_increase: pct,
                baseline_missing: missing,
                median: median_sorted(&values),
                max: *values.last().expect("groups are non-empty"),
            }
        })
        .collect()
}

fn as_f64(values: &[u32]) -> Vec<f64> {
    values.iter().map(|&v| f64::from(v)).collect()
}

fn median_sorted(values: &[u32]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        f64::from(values[n / 2])
    } else {
        0.5 * (f64::from(values[n / 2 - 1]) + f64::from(values[n / 2]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::Side;

    fn rec(model: &str, level: ToxicityLevel, t: u32) -> OutcomeRecord {
        OutcomeRecord {
            model_tag: model.into(),
            condition: level,
            t_conv: t,
            winner: Side::Pro,
            starter: Side::Pro,
            toxic_side: (level != ToxicityLevel::No).then_some(Side::Con),
        }
    }

    #[test]
    fn hand_computed_mean_and_variance() {
        let records: Vec<_> = [3, 5, 10].iter().map(|&t| rec("m", ToxicityLevel::No, t)).collect();
        let s = summarize_latency(&records);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 6.0);
        assert_eq!(s[0].variance, Some(13.0));
        assert_eq!(s[0].pct_increase, None);
        assert_eq!((s[0].median, s[0].max), (5.0, 10));
    }

    #[test]
    fn constant_sample() {
        let records: Vec<_> = ToxicityLevel::ALL
            .iter()
            .flat_map(|&l| (0..5).map(move |_| rec("m", l, 7)))
            .collect();
        for s in summarize_latency(&records) {
            assert_eq!(s.mean, 7.0);
            assert_eq!(s.variance, Some(0.0));
            if s.condition != ToxicityLevel::No {
                assert_eq!(s.pct_increase, Some(0.0));
            }
        }
    }

    #[test]
    fn missing_baseline_is_flagged() {
        let records = vec![rec("m", ToxicityLevel::Mild, 4), rec("m", ToxicityLevel::Mild, 6)];
        let s = summarize_latency(&records);
        assert!(s[0].baseline_missing);
        assert_eq!(s[0].pct_increase, None);
    }

    #[test]
    fn llama_moderate_increase() {
        let v = pct_increase(11.82, 9.45);
        assert!((v - 25.13).abs() <= 0.1, "{v}");
    }
}
