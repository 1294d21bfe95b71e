//! Runs several variants over one corpus.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::{Pipeline, Variant};
use crate::corpus::Corpus;
use crate::llm::duration_ms;

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("corpus {0:?} has no segments")]
    EmptyCorpus(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentOutcome {
    pub segment_id: String,
    /// Final translation, or the error message when the segment failed.
    pub result: Result<String, String>,
    pub calls: usize,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantRun {
    pub variant: Variant,
    pub segments: Vec<SegmentOutcome>,
    pub total_calls: usize,
    #[serde(with = "duration_ms")]
    pub wall_time: Duration,
}

impl VariantRun {
    pub fn failures(&self) -> usize {
        self.segments.iter().filter(|s| s.result.is_err()).count()
    }

    /// Finals in corpus order; failed segments become empty strings.
    pub fn hypotheses(&self) -> Vec<String> {
        self.segments
            .iter()
            .map(|s| s.result.clone().unwrap_or_default())
            .collect()
    }
}

/// Translates every segment under each variant, in the given order. Repeated
/// variants run once. A failing segment is recorded and the run continues.
pub async fn run_ablation(
    pipeline: &Pipeline,
    corpus: &Corpus,
    variants: &[Variant],
) -> Result<Vec<VariantRun>, AblationError> {
    if variants.is_empty() {
        return Ok(Vec::new());
    }
    if corpus.is_empty() {
        return Err(AblationError::EmptyCorpus(corpus.name.clone()));
    }
    let mut seen = Vec::new();
    let mut runs = Vec::new();
    for &variant in variants {
        if seen.contains(&variant) {
            continue;
        }
        seen.push(variant);
        let p = pipeline.with_variant(variant);
        let started = Instant::now();
        let mut segments = Vec::with_capacity(corpus.len());
        for seg in corpus.segments() {
            let t0 = Instant::now();
            let outcome = match p.translate(seg.latin()).await {
                Ok(trace) => SegmentOutcome {
                    segment_id: seg.id().to_string(),
                    result: Ok(trace.final_text),
                    calls: trace.calls.len(),
                    latency: t0.elapsed(),
                },
                Err(e) => SegmentOutcome {
                    segment_id: seg.id().to_string(),
                    calls: e.partial_trace().map_or(0, |t| t.calls.len()),
                    result: Err(e.to_string()),
                    latency: t0.elapsed(),
                },
            };
            segments.push(outcome);
        }
        runs.push(VariantRun {
            variant,
            total_calls: segments.iter().map(|s| s.calls).sum(),
            segments,
            wall_time: started.elapsed(),
        });
    }
    Ok(runs)
}
