//! Win-rate tables: starter advantage, toxic advantage and per-level
//! Pro/Con rates with a one-way ANOVA across levels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::hypothesis::{binom_test_two_sided, indicators, one_way_anova, TTestKind, TestResult};
use super::OutcomeRecord;
use crate::debate::{Side, ToxicityLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarterRow {
    pub model_tag: String,
    pub starter: Side,
    pub wins: usize,
    pub n: usize,
    pub win_rate: f64,
    /// Exact binomial test of the starter win rate against 0.5.
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxicRow {
    pub model_tag: String,
    /// Side that carried the toxicity directive.
    pub side: Side,
    pub wins: usize,
    pub n: usize,
    pub win_rate: f64,
    /// Two-sample t-test of toxic-agent win indicators against the
    /// non-toxic agent's (their complement).
    pub test: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRates {
    pub level: ToxicityLevel,
    pub n: usize,
    pub pro_win_rate: f64,
    pub con_win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub model_tag: String,
    pub rows: Vec<LevelRates>,
    /// ANOVA of Pro-win indicators across levels; absent with fewer than two
    /// usable levels. The Con test is identical because Con wins = 1 - Pro wins.
    pub test: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateTables {
    pub starter: Vec<StarterRow>,
    pub toxic: Vec<ToxicRow>,
    pub anova: Vec<AnovaTable>,
}

pub fn win_rate_tables(records: &[OutcomeRecord], t_test: TTestKind) -> WinRateTables {
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_tag.as_str()).collect();
    let mut tables = WinRateTables {
        starter: Vec::new(),
        toxic: Vec::new(),
        anova: Vec::new(),
    };
    for model in models {
        let of_model: Vec<&OutcomeRecord> = records.iter().filter(|r| r.model_tag == model).collect();

        for side in Side::BOTH {
            let group: Vec<_> = of_model.iter().filter(|r| r.starter == side).collect();
            if group.is_empty() {
                continue;
            }
            let wins = group.iter().filter(|r| r.winner == r.starter).count();
            let test =
                binom_test_two_sided(wins as u64, group.len() as u64, 0.5).expect("non-empty group with wins <= n");
            tables.starter.push(StarterRow {
                model_tag: model.to_string(),
                starter: side,
                wins,
                n: group.len(),
                win_rate: wins as f64 / group.len() as f64,
                test,
            });
        }

        for side in Side::BOTH {
            let group: Vec<_> = of_model.iter().filter(|r| r.toxic_side == Some(side)).collect();
            if group.is_empty() {
                continue;
            }
            let n = group.len();
            let wins = group.iter().filter(|r| r.winner == side).count();
            let toxic = indicators(wins, n);
            let other = indicators(n - wins, n);
            tables.toxic.push(ToxicRow {
                model_tag: model.to_string(),
                side,
                wins,
                n,
                win_rate: wins as f64 / n as f64,
                test: t_test.run(&toxic, &other).ok(),
            });
        }

        let mut by_level: BTreeMap<ToxicityLevel, (usize, usize)> = BTreeMap::new();
        for r in &of_model {
            let entry = by_level.entry(r.condition).or_default();
            entry.1 += 1;
            if r.winner == Side::Pro {
                entry.0 += 1;
            }
        }
        let rows: Vec<LevelRates> = by_level
            .iter()
            .map(|(&level, &(pro, n))| LevelRates {
                level,
                n,
                pro_win_rate: pro as f64 / n as f64,
                con_win_rate: (n - pro) as f64 / n as f64,
            })
            .collect();
        let groups: Vec<Vec<f64>> = by_level
            .values()
            .filter(|(_, n)| *n >= 2)
            .map(|&(pro, n)| indicators(pro, n))
            .collect();
        tables.anova.push(AnovaTable {
            model_tag: model.to_string(),
            rows,
            test: one_way_anova(&groups).ok(),
        });
    }
    tables
}
