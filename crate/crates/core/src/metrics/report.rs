//! Multi-system comparison tables.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use futures::future::try_join_all;
use serde::Serialize;

use super::bleu::{bleu_corpus, BleuScore};
use super::external::{score_external, ScorerConfig};
use super::MetricsError;
use crate::corpus::Corpus;
use crate::prompts::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub system: String,
    pub bleu: BleuScore,
    pub external: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub timestamp: DateTime<Utc>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub corpus: String,
    pub segment_count: usize,
    /// Header of the external-metric column, when one was computed.
    pub metric_name: Option<String>,
    pub rows: Vec<ReportRow>,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn sort_by_bleu(&mut self) {
        self.rows
            .sort_by(|a, b| b.bleu.score.total_cmp(&a.bleu.score).then_with(|| a.system.cmp(&b.system)));
    }

    /// Plain-text table with `Model`, `BLEU` and the external-metric columns.
    pub fn render_table(&self) -> String {
        self.render_with_first_header("Model")
    }

    pub fn render_with_first_header(&self, first: &str) -> String {
        let mut header = vec![first.to_string(), "BLEU".to_string()];
        if let Some(m) = &self.metric_name {
            header.push(m.clone());
        }
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.system.clone(), format!("{:.2}", r.bleu.score)];
                if self.metric_name.is_some() {
                    cells.push(r.external.map_or_else(|| "-".into(), |v| format!("{v:.4}")));
                }
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                std::iter::once(&header[c])
                    .chain(body.iter().map(|row| &row[c]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let fmt_row = |cells: &[String]| {
            let mut line = String::new();
            for (i, cell) in cells.iter().enumerate() {
                if i > 0 {
                    line.push_str("  ");
                }
                let pad = widths[i] - cell.chars().count();
                if i == 0 {
                    let _ = write!(line, "{cell}{}", " ".repeat(pad));
                } else {
                    let _ = write!(line, "{}{cell}", " ".repeat(pad));
                }
            }
            line.trim_end().to_string()
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        let mut out = String::new();
        out.push_str(&fmt_row(&header));
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for row in &body {
            out.push_str(&fmt_row(row));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn config_hash(corpus: &Corpus, systems: &[(String, Vec<String>)], scorer: Option<&ScorerConfig>) -> String {
    let names: Vec<&str> = systems.iter().map(|(n, _)| n.as_str()).collect();
    let fingerprint = serde_json::json!({
        "corpus": corpus.name,
        "segments": corpus.len(),
        "systems": names,
        "scorer": scorer,
        "bleu": "case:mixed|tok:13a|smooth:exp|order:4|nrefs:1",
    });
    sha256_hex(&fingerprint.to_string())[..16].to_string()
}

/// Scores each system against the corpus references, keeping the given row
/// order.
pub async fn build_report_ordered(
    corpus: &Corpus,
    systems: &[(String, Vec<String>)],
    scorer: Option<&ScorerConfig>,
) -> Result<EvalReport, MetricsError> {
    let references = corpus.references();
    for (name, hyps) in systems {
        if hyps.len() != references.len() {
            return Err(MetricsError::HypothesisCount {
                system: name.clone(),
                expected: references.len(),
                actual: hyps.len(),
            });
        }
    }

    let mut rows = Vec::with_capacity(systems.len());
    for (name, hyps) in systems {
        rows.push(ReportRow {
            system: name.clone(),
            bleu: bleu_corpus(hyps, &references)?,
            external: None,
        });
    }

    if let Some(cfg) = scorer {
        let scored: Vec<f64> = if cfg.parallel {
            try_join_all(systems.iter().map(|(_, h)| score_external(Some(cfg), h, &references)))
                .await?
                .into_iter()
                .map(|s| s.mean)
                .collect()
        } else {
            let mut out = Vec::new();
            for (_, hyps) in systems {
                out.push(score_external(Some(cfg), hyps, &references).await?.mean);
            }
            out
        };
        for (row, v) in rows.iter_mut().zip(scored) {
            row.external = Some(v);
        }
    }

    Ok(EvalReport {
        corpus: corpus.name.clone(),
        segment_count: corpus.len(),
        metric_name: scorer.map(|s| s.name.clone()),
        rows,
        metadata: RunMetadata {
            timestamp: Utc::now(),
            config_hash: config_hash(corpus, systems, scorer),
        },
    })
}

/// Like [`build_report_ordered`], with rows sorted by BLEU, best first.
pub async fn build_report(
    corpus: &Corpus,
    systems: &[(String, Vec<String>)],
    scorer: Option<&ScorerConfig>,
) -> Result<EvalReport, MetricsError> {
    let mut report = build_report_ordered(corpus, systems, scorer).await?;
    report.sort_by_bleu();
    Ok(report)
}
