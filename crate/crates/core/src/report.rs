//! Plain-text rendering for the `validate` and `analyze` commands.

use std::fmt::Write;

use crate::montecarlo::{ExperimentPlan, RunSummary};
use crate::persistence::{format_p_value, StatusCounts};
use crate::stats::StatReport;

/// Significance level used for the yes/no decision lines.
pub const DECISION_ALPHA: f64 = 1e-4;

fn decision(p: f64) -> &'static str {
    if p < DECISION_ALPHA {
        "yes"
    } else {
        "no"
    }
}

pub fn render_plan(plan: &ExperimentPlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "fingerprint        {}", plan.fingerprint());
    let _ = writeln!(s, "model_tag          {}", plan.model_tag);
    let _ = writeln!(s, "backend            {}", plan.backend.name());
    let levels: Vec<&str> = plan.levels.iter().map(|l| l.as_str()).collect();
    let _ = writeln!(s, "levels             {}", levels.join(", "));
    let _ = writeln!(s, "n_per_condition    {}", plan.n_per_condition);
    let _ = writeln!(s, "planned trials     {}", plan.planned_trials());
    let _ = writeln!(s, "master_seed        {}", plan.master_seed);
    let _ = writeln!(s, "concurrency_limit  {}", plan.concurrency_limit);
    let _ = writeln!(s, "round_cap          {}", plan.round_cap);
    let _ = writeln!(s, "min_rounds         {}", plan.min_rounds);
    let _ = writeln!(s, "concession marker  {}", plan.protocol.concession_marker);
    let _ = writeln!(s, "refusal patterns   {}", plan.protocol.refusal_patterns.len());
    let _ = writeln!(s, "topics             {}", plan.corpus.len());
    for t in &plan.corpus {
        let _ = writeln!(s, "  {:<24} {:<18} {}", t.id, t.domain, t.proposition);
    }
    s
}

pub fn render_summary(summary: &RunSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "plan {} ({}, {})",
        summary.fingerprint, summary.model_tag, summary.backend
    );
    let _ = writeln!(
        s,
        "{:<10} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8}",
        "condition", "planned", "converged", "capped", "refused", "aborted", "pending"
    );
    let mut row = |name: &str, c: &crate::montecarlo::ConditionCounts| {
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8}",
            name, c.planned, c.converged, c.capped, c.refused, c.aborted, c.pending
        );
    };
    for (level, c) in &summary.conditions {
        row(level.as_str(), c);
    }
    row("total", &summary.totals());
    let _ = writeln!(s, "written this run: {}", summary.written);
    s
}

/// Human-readable versions of the latency, starter, toxic and per-level tables.
pub fn render_analysis(report: &StatReport, counts: &StatusCounts) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Stored debates: {} converged, {} capped, {} refused (only converged debates enter the statistics)",
        counts.converged, counts.capped, counts.refused
    );
    let _ = writeln!(
        s,
        "Conventions: exact two-sided binomial (small-p summation), {:?} t-test, unbiased variances\n",
        report.options.t_test
    );

    let _ = writeln!(s, "Convergence time by condition");
    let _ = writeln!(
        s,
        "{:<16} {:<9} {:>6} {:>9} {:>9} {:>11}",
        "model", "condition", "n", "mean", "variance", "% increase"
    );
    for r in &report.latency {
        let _ = writeln!(
            s,
            "{:<16} {:<9} {:>6} {:>9.2} {:>9} {:>11}",
            r.model_tag,
            r.condition.as_str(),
            r.n,
            r.mean,
            r.variance.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.pct_increase.map(|v| format!("{v:.2}")).unwrap_or_default()
        );
    }

    let _ = writeln!(s, "\nStarter advantage (binomial test against 0.5)");
    let _ = writeln!(
        s,
        "{:<16} {:<7} {:>6} {:>9} {:>9}  significant at α=1e-4",
        "model", "starter", "n", "win rate", "p"
    );
    for r in &report.starter {
        let _ = writeln!(
            s,
            "{:<16} {:<7} {:>6} {:>9.4} {:>9}  {}",
            r.model_tag,
            r.starter.as_str(),
            r.n,
            r.win_rate,
            format_p_value(r.test.p_value),
            decision(r.test.p_value)
        );
    }

    let _ = writeln!(
        s,
        "\nToxic-agent advantage (t-test of toxic against non-toxic win indicators)"
    );
    let _ = writeln!(
        s,
        "{:<16} {:<7} {:>6} {:>9} {:>9}  significant at α=1e-4",
        "model", "side", "n", "win rate", "p"
    );
    for r in &report.toxic {
        let (p, d) = match &r.test {
            Some(t) => (format_p_value(t.p_value), decision(t.p_value)),
            None => ("n/a".to_string(), "n/a"),
        };
        let _ = writeln!(
            s,
            "{:<16} {:<7} {:>6} {:>9.4} {:>9}  {}",
            r.model_tag,
            r.side.as_str(),
            r.n,
            r.win_rate,
            p,
            d
        );
    }

    let _ = writeln!(s, "\nWin rates by toxicity level (one-way ANOVA across levels)");
    for table in &report.anova {
        let _ = writeln!(s, "{}", table.model_tag);
        let _ = writeln!(s, "  {:<9} {:>6} {:>9} {:>9}", "level", "n", "Pro", "Con");
        for row in &table.rows {
            let _ = writeln!(
                s,
                "  {:<9} {:>6} {:>9.4} {:>9.4}",
                row.level.as_str(),
                row.n,
                row.pro_win_rate,
                row.con_win_rate
            );
        }
        match &table.test {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "  F({}, {}) = {:.2}, p = {}; toxicity effect significant at α=1e-4: {}",
                    t.df.unwrap_or(f64::NAN),
                    t.df2.unwrap_or(f64::NAN),
                    t.statistic,
                    format_p_value(t.p_value),
                    decision(t.p_value)
                );
            }
            None => {
                let _ = writeln!(s, "  ANOVA not available (fewer than two levels with data)");
            }
        }
    }

    let _ = writeln!(
        s,
        "\nConvergence-time histograms: truncated at {} rounds, see `report` for bin data",
        report.options.truncate_at
    );
    for h in &report.histograms {
        let mode = h.mode().map(|m| m.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "  {:<16} {:<9} total {:>6}  mode {:>3}  above {}: {}",
            h.model_tag,
            h.condition.as_str(),
            h.total(),
            mode,
            h.truncate_at,
            h.overflow
        );
    }
    s
}
