//! Statistics over converged debates.
//!
//! Conventions: the exact binomial test sums all outcomes no more likely than
//! the observed one; t-tests are Welch by default; variances are unbiased
//! (n - 1); win-rate tests treat each debate's win indicator as one
//! observation.

use serde::{Deserialize, Serialize};

use crate::debate::{DebateStatus, Side, ToxicityLevel, Transcript};

pub mod histogram;
pub mod hypothesis;
pub mod latency;
pub mod special;
pub mod tables;

pub use histogram::{histogram, Histogram, DEFAULT_TRUNCATE_AT};
pub use hypothesis::{
    binom_test_two_sided, one_way_anova, student_t_test, welch_t_test, Degenerate, StatsError, TTestKind, TestResult,
};
pub use latency::{summarize_latency, LatencySummary};
pub use tables::{win_rate_tables, AnovaTable, LevelRates, StarterRow, ToxicRow, WinRateTables};

/// Analysis row for one converged debate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub model_tag: String,
    pub condition: ToxicityLevel,
    pub t_conv: u32,
    pub winner: Side,
    pub starter: Side,
    pub toxic_side: Option<Side>,
}

impl OutcomeRecord {
    /// `None` unless the transcript converged.
    pub fn from_transcript(t: &Transcript) -> Option<Self> {
        if t.status != DebateStatus::Converged {
            return None;
        }
        Some(OutcomeRecord {
            model_tag: t.config.model_tag.clone(),
            condition: t.config.level,
            t_conv: t.t_conv?,
            winner: t.winner?,
            starter: t.config.starter,
            toxic_side: t.config.toxic_side,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub truncate_at: u32,
    pub t_test: TTestKind,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            truncate_at: DEFAULT_TRUNCATE_AT,
            t_test: TTestKind::Welch,
        }
    }
}

/// Every table the analysis produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub options: ReportOptions,
    pub latency: Vec<LatencySummary>,
    pub starter: Vec<StarterRow>,
    pub toxic: Vec<ToxicRow>,
    pub anova: Vec<AnovaTable>,
    pub histograms: Vec<Histogram>,
}

pub fn compute_report(records: &[OutcomeRecord], options: ReportOptions) -> StatReport {
    let tables = win_rate_tables(records, options.t_test);
    StatReport {
        options,
        latency: summarize_latency(records),
        starter: tables.starter,
        toxic: tables.toxic,
        anova: tables.anova,
        histograms: histogram(records, options.truncate_at),
    }
}
