//! Shared fixtures for the benchmarks.

use debatesim_core::stats::OutcomeRecord;
use debatesim_core::{topics, ExperimentPlan, Side, ToxicityLevel};

/// Default synthetic plan over the bundled corpus.
pub fn synthetic_plan(n_per_condition: u64, seed: u64) -> ExperimentPlan {
    ExperimentPlan::synthetic(topics::bundled(), n_per_condition, seed)
}

/// Deterministic outcome records spread over every level and role.
pub fn outcome_records(n: usize) -> Vec<OutcomeRecord> {
    (0..n)
        .map(|i| {
            let level = ToxicityLevel::ALL[i % 4];
            let starter = if i % 3 == 0 { Side::Pro } else { Side::Con };
            OutcomeRecord {
                model_tag: "bench".into(),
                condition: level,
                t_conv: 2 + (i * 7 % 31) as u32,
                winner: if i % 5 < 3 { starter } else { starter.opposite() },
                starter,
                toxic_side: (level != ToxicityLevel::No).then_some(if i % 2 == 0 { Side::Pro } else { Side::Con }),
            }
        })
        .collect()
}
