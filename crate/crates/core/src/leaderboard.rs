//! Per-language leaderboard tables with a macro-averaged column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{macro_average, round1};

/// Rows of per-language values (already scaled for display, e.g. nDCG×100).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub metric: String,
    pub rows: Vec<LeaderboardRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub name: String,
    pub values: BTreeMap<String, f64>,
}

impl Leaderboard {
    pub fn new(metric: impl Into<String>) -> Self {
        Self {
            metric: metric.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: BTreeMap<String, f64>) {
        self.rows.push(LeaderboardRow {
            name: name.into(),
            values,
        });
    }

    pub fn languages(&self) -> Vec<String> {
        self.rows
            .iter()
            .flat_map(|r| r.values.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Macro average of a row, or `None` when it lacks a language.
    pub fn average(&self, row: &LeaderboardRow) -> Result<Option<f64>> {
        let langs = self.languages();
        if row.values.is_empty() || langs.iter().any(|l| !row.values.contains_key(l)) {
            return Ok(None);
        }
        macro_average(&row.values).map(Some)
    }

    /// Tab-separated table, one decimal, `n/a` for missing cells.
    pub fn render(&self) -> Result<String> {
        let langs = self.languages();
        let mut out = format!("{}\tAverage", self.metric);
        for l in &langs {
            write!(out, "\t{l}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            let avg = self.average(row)?.map_or("n/a".to_string(), round1);
            write!(out, "{}\t{avg}", row.name).unwrap();
            for l in &langs {
                let cell = row.values.get(l).map_or("n/a".to_string(), |v| round1(*v));
                write!(out, "\t{cell}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_average_and_missing_cells() {
        let mut lb = Leaderboard::new("nDCG@10");
        lb.push(
            "a",
            [("de".to_string(), 74.4), ("yo".to_string(), 94.8)].into(),
        );
        lb.push("b", [("yo".to_string(), 39.8)].into());
        let t = lb.render().unwrap();
        assert_eq!(
            t,
            "nDCG@10\tAverage\tde\tyo\na\t84.6\t74.4\t94.8\nb\tn/a\tn/a\t39.8\n"
        );
    }
}
