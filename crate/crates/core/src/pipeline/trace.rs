use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Variant;
use crate::llm::{ChatRequest, ChatResponse};
use crate::prompts::PromptName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Propose,
    MiddleRevise,
    Filter,
    FinalRevise,
    NonLiteral,
    Clean,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Propose => "propose",
            Stage::MiddleRevise => "middle_revise",
            Stage::Filter => "filter",
            Stage::FinalRevise => "final_revise",
            Stage::NonLiteral => "non_literal",
            Stage::Clean => "clean",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One provider round trip made by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCall {
    pub stage: Stage,
    /// Set for `Propose` and `MiddleRevise` only.
    pub candidate_index: Option<usize>,
    pub prompt: PromptName,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

impl StageCall {
    pub fn to_json(&self, verbose: bool) -> Value {
        let mut request = json!({
            "model": self.request.model,
            "system_prompt": self.prompt.as_str(),
            "user": self.request.user,
            "temperature": self.request.temperature,
            "top_p": self.request.top_p,
            "frequency_penalty": self.request.frequency_penalty,
            "presence_penalty": self.request.presence_penalty,
        });
        if verbose {
            request["system"] = Value::String(self.request.system.clone());
        }
        json!({
            "stage": self.stage,
            "candidate_index": self.candidate_index,
            "request": request,
            "response": {
                "content": self.response.content,
                "model": self.response.model,
                "latency_ms": self.response.latency.as_secs_f64() * 1000.0,
                "attempt_count": self.response.attempt_count,
                "cached": self.response.cached,
            },
        })
    }
}

/// Everything one translation did, in execution order. Candidate calls are
/// grouped by candidate index, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTrace {
    pub latin: String,
    pub variant: Variant,
    /// Post middle revision when that stage ran, raw proposals otherwise.
    pub candidates: Vec<String>,
    /// Filter output, accepted verbatim.
    pub selected: String,
    /// Candidate closest to `selected` by normalized edit distance, when
    /// within 20% of its length.
    pub selected_index: Option<usize>,
    pub final_text: String,
    pub non_literal: Option<String>,
    pub calls: Vec<StageCall>,
    pub total_latency: Duration,
}

impl TranslationTrace {
    pub(crate) fn new(latin: &str, variant: Variant) -> Self {
        TranslationTrace {
            latin: latin.to_string(),
            variant,
            candidates: Vec::new(),
            selected: String::new(),
            selected_index: None,
            final_text: String::new(),
            non_literal: None,
            calls: Vec::new(),
            total_latency: Duration::ZERO,
        }
    }

    pub fn calls_for(&self, stage: Stage) -> impl Iterator<Item = &StageCall> {
        self.calls.iter().filter(move |c| c.stage == stage)
    }

    /// JSON mirror of the trace. System prompts appear by name; `verbose`
    /// adds their full text.
    pub fn to_json(&self, verbose: bool) -> Value {
        json!({
            "latin": self.latin,
            "variant": self.variant,
            "candidates": self.candidates,
            "selected": self.selected,
            "selected_index": self.selected_index,
            "final": self.final_text,
            "non_literal": self.non_literal,
            "calls": self.calls.iter().map(|c| c.to_json(verbose)).collect::<Vec<_>>(),
            "total_latency_ms": self.total_latency.as_secs_f64() * 1000.0,
        })
    }
}

/// Levenshtein distance over chars divided by the longer length.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as f64 / longest as f64
}

pub fn nearest_candidate<S: AsRef<str>>(selected: &str, candidates: &[S]) -> Option<usize> {
    candidates
        .iter()
        .map(|c| normalized_edit_distance(selected.trim(), c.as_ref().trim()))
        .enumerate()
        .filter(|(_, d)| *d <= 0.2)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}
