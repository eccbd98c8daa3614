//! CSV export of a [`StatReport`].
//!
//! Means, variances and percentages use 2 decimals, rates 4, p-values 4
//! unless below 1e-4, where they switch to `{:.1e}` scientific form.

use std::path::{Path, PathBuf};

use super::StoreError;
use crate::stats::{StatReport, TestResult};

pub const LATENCY_FILE: &str = "latency.csv";
pub const STARTER_FILE: &str = "starter.csv";
pub const TOXIC_FILE: &str = "toxic.csv";
pub const ANOVA_FILE: &str = "anova.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const ROUNDS_FILE: &str = "rounds.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedFiles {
    pub paths: Vec<PathBuf>,
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn format_p_value(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.1e}")
    } else {
        f4(p)
    }
}

fn format_statistic(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        f2(x)
    }
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map(f).unwrap_or_default()
}

/// Renders one table to CSV bytes; quoting is handled by the csv writer.
fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, StoreError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let map = |e: csv::Error| StoreError::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e),
    };
    w.write_record(header).map_err(map)?;
    for row in rows {
        w.write_record(&row).map_err(map)?;
    }
    w.into_inner().map_err(|e| StoreError::Io {
        path: PathBuf::from("<csv>"),
        source: e.into_error(),
    })
}

/// Every table as `(file name, bytes)`, in a fixed order.
pub fn render_report(report: &StatReport) -> Result<Vec<(&'static str, Vec<u8>)>, StoreError> {
    let latency = render(
        &["model", "condition", "n", "mean_tconv", "var_tconv", "pct_increase"],
        report.latency.iter().map(|s| {
            vec![
                s.model_tag.clone(),
                s.condition.to_string(),
                s.n.to_string(),
                f2(s.mean),
                opt(s.variance, f2),
                opt(s.pct_increase, f2),
            ]
        }),
    )?;
    let starter = render(
        &["model", "starter", "win_rate", "p_value"],
        report.starter.iter().map(|r| {
            vec![
                r.model_tag.clone(),
                r.starter.to_string(),
                f4(r.win_rate),
                format_p_value(r.test.p_value),
            ]
        }),
    )?;
    let toxic = render(
        &["model", "side", "win_rate", "p_value"],
        report.toxic.iter().map(|r| {
            vec![
                r.model_tag.clone(),
                r.side.to_string(),
                f4(r.win_rate),
                opt(r.test.as_ref().map(|t| t.p_value), format_p_value),
            ]
        }),
    )?;
    let anova = render(
        &["model", "level", "pro_win_rate", "con_win_rate", "F", "p_value"],
        report.anova.iter().flat_map(|table| {
            let (f, p) = match &table.test {
                Some(TestResult { statistic, p_value, .. }) => (format_statistic(*statistic), format_p_value(*p_value)),
                None => (String::new(), String::new()),
            };
            table.rows.iter().map(move |row| {
                vec![
                    table.model_tag.clone(),
                    row.level.to_string(),
                    f4(row.pro_win_rate),
                    f4(row.con_win_rate),
                    f.clone(),
                    p.clone(),
                ]
            })
        }),
    )?;
    let histogram = render(
        &["model", "condition", "bin", "count"],
        report.histograms.iter().flat_map(|h| {
            let bins = h.counts.iter().enumerate().map(|(i, c)| (format!("{}", i + 1), *c));
            let overflow = std::iter::once((format!(">{}", h.truncate_at), h.overflow));
            bins.chain(overflow)
                .map(|(bin, count)| vec![h.model_tag.clone(), h.condition.to_string(), bin, count.to_string()])
        }),
    )?;
    let rounds = render(
        &["model", "condition", "n", "median_tconv", "max_tconv"],
        report.latency.iter().map(|s| {
            vec![
                s.model_tag.clone(),
                s.condition.to_string(),
                s.n.to_string(),
                f2(s.median),
                s.max.to_string(),
            ]
        }),
    )?;
    Ok(vec![
        (LATENCY_FILE, latency),
        (STARTER_FILE, starter),
        (TOXIC_FILE, toxic),
        (ANOVA_FILE, anova),
        (HISTOGRAM_FILE, histogram),
        (ROUNDS_FILE, rounds),
    ])
}

/// Writes every table into `dir`, creating it if needed. Same report, same bytes.
pub fn export_report(report: &StatReport, dir: &Path) -> Result<ExportedFiles, StoreError> {
    std::fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for (name, bytes) in render_report(report)? {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(ExportedFiles { paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debate::ToxicityLevel;
    use crate::stats::{LatencySummary, ReportOptions};

    fn empty_report() -> StatReport {
        StatReport {
            options: ReportOptions::default(),
            latency: vec![],
            starter: vec![],
            toxic: vec![],
            anova: vec![],
            histograms: vec![],
        }
    }

    #[test]
    fn p_value_formatting() {
        assert_eq!(format_p_value(3.2e-7), "3.2e-7");
        assert_eq!(format_p_value(0.0), "0.0e0");
        assert_eq!(format_p_value(1e-4), "0.0001");
        assert_eq!(format_p_value(0.02131), "0.0213");
    }

    #[test]
    fn latency_row_layout() {
        let mut report = empty_report();
        report.latency.push(LatencySummary {
            model_tag: "LLaMA".into(),
            condition: ToxicityLevel::Moderate,
            n: 231,
            mean: 11.82,
            variance: Some(9.02),
            pct_increase: Some(25.13),
            baseline_missing: false,
            median: 11.0,
            max: 30,
        });
        let files = render_report(&report).unwrap();
        let latency = String::from_utf8(files[0].1.clone()).unwrap();
        assert_eq!(
            latency,
            "model,condition,n,mean_tconv,var_tconv,pct_increase\nLLaMA,Moderate,231,11.82,9.02,25.13\n"
        );
    }

    #[test]
    fn empty_sections_are_header_only() {
        let files = render_report(&empty_report()).unwrap();
        for (name, bytes) in files {
            let text = String::from_utf8(bytes).unwrap();
            assert_eq!(text.lines().count(), 1, "{name}");
        }
    }
}
