//! Integer-binned T_conv histograms with an overflow bin.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::OutcomeRecord;
use crate::debate::ToxicityLevel;

/// Default display cut-off for latency histograms.
pub const DEFAULT_TRUNCATE_AT: u32 = 23;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub model_tag: String,
    pub condition: ToxicityLevel,
    pub truncate_at: u32,
    /// `counts[i]` is the number of debates with `T_conv = i + 1`.
    pub counts: Vec<u64>,
    /// Debates with `T_conv > truncate_at`.
    pub overflow: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    /// Bin with the highest count (lowest bin on ties); `None` if empty.
    pub fn mode(&self) -> Option<u32> {
        let max = *self.counts.iter().max()?;
        if max == 0 {
            return None;
        }
        self.counts.iter().position(|&c| c == max).map(|i| i as u32 + 1)
    }
}

pub fn bin_counts(values: impl IntoIterator<Item = u32>, truncate_at: u32) -> (Vec<u64>, u64) {
    assert!(truncate_at >= 1, "truncate_at must be at least 1");
    let mut counts = vec![0u64; truncate_at as usize];
    let mut overflow = 0;
    for v in values {
        match v {
            0 => {}
            v if v <= truncate_at => counts[v as usize - 1] += 1,
            _ => overflow += 1,
        }
    }
    (counts, overflow)
}

/// One histogram per model and per condition seen anywhere in `records`;
/// a condition a model never reached gets all-zero bins.
pub fn histogram(records: &[OutcomeRecord], truncate_at: u32) -> Vec<Histogram> {
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_tag.as_str()).collect();
    let conditions: BTreeSet<ToxicityLevel> = records.iter().map(|r| r.condition).collect();
    let mut out = Vec::new();
    for model in &models {
        for &condition in &conditions {
            let (counts, overflow) = bin_counts(
                records
                    .iter()
                    .filter(|r| r.model_tag == *model && r.condition == condition)
                    .map(|r| r.t_conv),
                truncate_at,
            );
            out.push(Histogram {
                model_tag: model.to_string(),
                condition,
                truncate_at,
                counts,
                overflow,
            });
        }
    }
    out
}
