use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Category, RunOutcome};
use crate::generation::Approach;

pub const TABLE_HEADER: &str = "| Model | Approach | Success | Different Result | No Result | Error | Price ($) | F1 |";

/// Summary of all runs of one model under one approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub approach: Approach,
    pub success: usize,
    pub different_result: usize,
    pub no_result: usize,
    pub error: usize,
    /// Mean price of a request (one question answered, fix rounds included).
    pub mean_price: f64,
    pub total_price: f64,
    pub mean_f1: f64,
}

impl ReportRow {
    pub fn total(&self) -> usize {
        self.success + self.different_result + self.no_result + self.error
    }

    pub fn count(&self, c: Category) -> usize {
        match c {
            Category::Success => self.success,
            Category::DifferentResult => self.different_result,
            Category::NoResult => self.no_result,
            Category::Error => self.error,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub outcomes: Vec<RunOutcome>,
}

impl Report {
    /// Rows are ordered by model, then approach.
    pub fn from_outcomes(outcomes: Vec<RunOutcome>) -> Self {
        let mut groups: BTreeMap<(&str, Approach), Vec<&RunOutcome>> = BTreeMap::new();
        for o in &outcomes {
            groups.entry((o.model.as_str(), o.approach)).or_default().push(o);
        }
        let rows = groups
            .into_iter()
            .map(|((model, approach), runs)| {
                let n = runs.len() as f64;
                let count = |c: Category| runs.iter().filter(|o| o.category == c).count();
                let total_price: f64 = runs.iter().map(|o| o.price).sum();
                ReportRow {
                    model: model.to_string(),
                    approach,
                    success: count(Category::Success),
                    different_result: count(Category::DifferentResult),
                    no_result: count(Category::NoResult),
                    error: count(Category::Error),
                    mean_price: total_price / n,
                    total_price,
                    mean_f1: runs.iter().map(|o| o.f1).sum::<f64>() / n,
                }
            })
            .collect();
        Report { rows, outcomes }
    }

    /// Combine reports, for instance one per model.
    pub fn merge(reports: impl IntoIterator<Item = Report>) -> Self {
        Report::from_outcomes(reports.into_iter().flat_map(|r| r.outcomes).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Markdown table, one line per row.
pub fn render_markdown(report: &Report) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push_str("\n|---|---|---:|---:|---:|---:|---:|---:|\n");
    for r in &report.rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {:.4} | {:.2} |\n",
            r.model,
            r.approach.label(),
            r.success,
            r.different_result,
            r.no_result,
            r.error,
            r.mean_price,
            r.mean_f1
        ));
    }
    out
}
