//! Campaign reports: one JSON document per campaign, plus a compact
//! human-readable rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::FailureRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub name: String,
    pub runs: u64,
    pub raw_failures: u64,
    pub reported_failures: u64,
    /// True when the run budget expired before all view combinations ran.
    pub truncated: bool,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub target: String,
    pub seed: u64,
    pub page_eq_threshold: f64,
    pub budget_secs: u64,
    pub generated_unix_ms: u64,
    pub duration_ms: u64,
    pub relations: Vec<RelationReport>,
}

impl CampaignReport {
    pub fn total_reported(&self) -> u64 {
        self.relations.iter().map(|r| r.reported_failures).sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render_summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "target: {}", self.target);
        let _ = writeln!(
            out,
            "seed: {}  page-eq-threshold: {}  budget: {}s  took: {}ms",
            self.seed, self.page_eq_threshold, self.budget_secs, self.duration_ms
        );
        for rel in &self.relations {
            let mark = if rel.truncated { " (budget exhausted)" } else { "" };
            let _ = writeln!(
                out,
                "{}: runs {}, raw failures {}, reported {}{}",
                rel.name, rel.runs, rel.raw_failures, rel.reported_failures, mark
            );
            for (i, failure) in rel.failures.iter().enumerate() {
                let views = failure
                    .view_indices
                    .iter()
                    .map(|(ty, off)| format!("{ty}={off}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                let sources = failure
                    .source_inputs
                    .iter()
                    .map(|s| s.id.as_str())
                    .collect::<Vec<_>>()
                    .join(",");
                let follow_ups = failure
                    .follow_up_inputs
                    .iter()
                    .map(|s| s.id.as_str())
                    .collect::<Vec<_>>()
                    .join(",");
                let _ = writeln!(
                    out,
                    "  [{}] views {views}; sources {sources}; follow-ups {}; novel requests {}",
                    i + 1,
                    if follow_ups.is_empty() { "-" } else { &follow_ups },
                    failure.novel_requests.len()
                );
            }
        }
        let _ = writeln!(out, "total reported failures: {}", self.total_reported());
        out
    }
}
