//! Multi-layered translation.
//!
//! A full run sends the Latin text to `k` proposer instances concurrently,
//! revises each proposal with the aggregator, asks the aggregator to pick the
//! best of the numbered candidates, and revises that pick once more. The
//! [`Variant`] decides which of these stages run.

mod ablation;
mod config;
mod trace;

use std::sync::Arc;
use std::time::Instant;

use futures::stream::{self, StreamExt};
use thiserror::Error;

pub use ablation::{run_ablation, AblationError, SegmentOutcome, VariantRun};
pub use config::{MiniOnlyPrompt, PipelineConfig, Variant};
pub use trace::{nearest_candidate, normalized_edit_distance, Stage, StageCall, TranslationTrace};

use crate::llm::{ChatRequest, LlmClient, LlmError};
use crate::prompts::{
    assemble_comparison_message, assemble_non_literal_message, assemble_revision_message,
    PromptError, PromptName, PromptRegistry,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("input is {chars} characters, limit is {limit}")]
    InputTooLong { chars: usize, limit: usize },
    #[error("{stage} stage{} failed: {source}", candidate_index.map(|i| format!(" (candidate {i})")).unwrap_or_default())]
    Stage {
        stage: Stage,
        candidate_index: Option<usize>,
        #[source]
        source: LlmError,
        /// Everything that completed before the failure.
        partial: Box<TranslationTrace>,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl PipelineError {
    pub fn partial_trace(&self) -> Option<&TranslationTrace> {
        match self {
            PipelineError::Stage { partial, .. } => Some(partial),
            _ => None,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// True for invalid configuration and provider failures, false for bad input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            PipelineError::InvalidInput(_) | PipelineError::InputTooLong { .. } | PipelineError::Prompt(_)
        )
    }
}

/// Strips a leading `Translation:` label.
pub fn strip_translation_label(text: &str) -> &str {
    let trimmed = text.trim_start();
    match trimmed.strip_prefix("Translation:") {
        Some(rest) => rest.trim_start_matches([' ', '\t', '\n', '\r']),
        None => text,
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    client: LlmClient,
    prompts: Arc<PromptRegistry>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        client: LlmClient,
        prompts: Arc<PromptRegistry>,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate().map_err(PipelineError::Config)?;
        Ok(Pipeline {
            client,
            prompts,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn prompts(&self) -> &PromptRegistry {
        &self.prompts
    }

    pub fn with_variant(&self, variant: Variant) -> Pipeline {
        let mut p = self.clone();
        p.config.variant = variant;
        p
    }

    fn check_input(&self, latin: &str) -> Result<(), PipelineError> {
        if latin.trim().is_empty() {
            return Err(PipelineError::InvalidInput("latin text is empty".into()));
        }
        let chars = latin.chars().count();
        if chars > self.config.max_input_chars {
            return Err(PipelineError::InputTooLong {
                chars,
                limit: self.config.max_input_chars,
            });
        }
        Ok(())
    }

    async fn call(
        &self,
        stage: Stage,
        candidate_index: Option<usize>,
        prompt: PromptName,
        model: &str,
        user: String,
    ) -> Result<StageCall, LlmError> {
        let request = ChatRequest::new(model, self.prompts.text(prompt), user);
        let response = self.client.complete(&request).await?;
        Ok(StageCall {
            stage,
            candidate_index,
            prompt,
            request,
            response,
        })
    }

    fn stage_error(
        &self,
        latin: &str,
        stage: Stage,
        candidate_index: Option<usize>,
        source: LlmError,
        calls: Vec<StageCall>,
        started: Instant,
    ) -> PipelineError {
        let mut partial = TranslationTrace::new(latin, self.config.variant);
        partial.calls = calls;
        partial.total_latency = started.elapsed();
        PipelineError::Stage {
            stage,
            candidate_index,
            source,
            partial: Box::new(partial),
        }
    }

    fn proposer_model(&self) -> &str {
        match self.config.variant {
            Variant::BaseCandidateAggregator => &self.config.aggregator_model,
            _ => &self.config.proposer_model,
        }
    }

    /// One proposal, revised when the variant runs middle revision. Returns
    /// the last call's content and the calls made.
    pub async fn generate_candidate(
        &self,
        latin: &str,
        index: usize,
    ) -> Result<(String, Vec<StageCall>), PipelineError> {
        if index >= self.config.k {
            return Err(PipelineError::InvalidInput(format!(
                "candidate index {index} outside 0..{}",
                self.config.k
            )));
        }
        let started = Instant::now();
        let mut calls = Vec::with_capacity(2);
        let proposal = self
            .call(
                Stage::Propose,
                Some(index),
                PromptName::FineTunedSystem,
                self.proposer_model(),
                latin.to_string(),
            )
            .await
            .map_err(|e| self.stage_error(latin, Stage::Propose, Some(index), e, Vec::new(), started))?;
        let mut candidate = proposal.response.content.clone();
        calls.push(proposal);

        if self.config.variant.runs_middle_revision() {
            let user = assemble_revision_message(latin, &candidate)?;
            match self
                .call(
                    Stage::MiddleRevise,
                    Some(index),
                    PromptName::Revision,
                    &self.config.aggregator_model,
                    user,
                )
                .await
            {
                Ok(revised) => {
                    candidate = revised.response.content.clone();
                    calls.push(revised);
                }
                Err(e) => {
                    return Err(self.stage_error(latin, Stage::MiddleRevise, Some(index), e, calls, started))
                }
            }
        }
        Ok((candidate, calls))
    }

    /// Runs the configured variant on one segment.
    pub async fn translate(&self, latin: &str) -> Result<TranslationTrace, PipelineError> {
        if self.config.variant.is_single() {
            return self.translate_single(latin).await;
        }
        self.check_input(latin)?;
        let started = Instant::now();
        let k = self.config.k;

        let results: Vec<_> = stream::iter(0..k)
            .map(|i| self.generate_candidate(latin, i))
            .buffered(self.config.max_in_flight)
            .collect()
            .await;

        let mut calls = Vec::with_capacity(self.config.variant.expected_calls(k));
        let mut candidates = Vec::with_capacity(k);
        let mut first_failure = None;
        for result in results {
            match result {
                Ok((candidate, c)) => {
                    candidates.push(candidate);
                    calls.extend(c);
                }
                Err(PipelineError::Stage {
                    stage,
                    candidate_index,
                    source,
                    partial,
                }) => {
                    calls.extend(partial.calls);
                    first_failure.get_or_insert((stage, candidate_index, source));
                }
                Err(other) => return Err(other),
            }
        }
        if let Some((stage, index, source)) = first_failure {
            return Err(self.stage_error(latin, stage, index, source, calls, started));
        }

        let comparison = assemble_comparison_message(latin, &candidates, k)?;
        let filter = match self
            .call(
                Stage::Filter,
                None,
                PromptName::FinalFilter,
                &self.config.aggregator_model,
                comparison,
            )
            .await
        {
            Ok(c) => c,
            Err(e) => return Err(self.stage_error(latin, Stage::Filter, None, e, calls, started)),
        };
        let selected = filter.response.content.clone();
        calls.push(filter);

        let mut final_text = selected.clone();
        if self.config.variant.runs_final_revision() {
            let user = assemble_revision_message(latin, &selected)?;
            match self
                .call(
                    Stage::FinalRevise,
                    None,
                    PromptName::Revision,
                    &self.config.aggregator_model,
                    user,
                )
                .await
            {
                Ok(c) => {
                    final_text = c.response.content.clone();
                    calls.push(c);
                }
                Err(e) => return Err(self.stage_error(latin, Stage::FinalRevise, None, e, calls, started)),
            }
        }

        if final_text.trim().is_empty() {
            let stage = calls.last().map(|c| c.stage).unwrap_or(Stage::Filter);
            return Err(self.stage_error(
                latin,
                stage,
                None,
                LlmError::Permanent {
                    attempts: 1,
                    message: "empty final translation".into(),
                },
                calls,
                started,
            ));
        }

        Ok(TranslationTrace {
            latin: latin.to_string(),
            variant: self.config.variant,
            selected_index: nearest_candidate(&selected, &candidates),
            candidates,
            selected,
            final_text,
            non_literal: None,
            calls,
            total_latency: started.elapsed(),
        })
    }

    /// A single provider call, for the `single_*` variants.
    pub async fn translate_single(&self, latin: &str) -> Result<TranslationTrace, PipelineError> {
        let (prompt, model) = match self.config.variant {
            Variant::SingleFineTuned => (PromptName::FineTunedSystem, &self.config.proposer_model),
            Variant::SingleAggregatorMini => (
                match self.config.mini_only_prompt {
                    MiniOnlyPrompt::Baseline => PromptName::BaselineTranslator,
                    MiniOnlyPrompt::FineTunedSystem => PromptName::FineTunedSystem,
                },
                &self.config.mini_model,
            ),
            Variant::SingleBaseline => (PromptName::BaselineTranslator, &self.config.aggregator_model),
            other => {
                return Err(PipelineError::Config(format!(
                    "translate_single requires a single_* variant, got {other}"
                )))
            }
        };
        self.check_input(latin)?;
        let started = Instant::now();
        let call = self
            .call(Stage::Propose, Some(0), prompt, model, latin.to_string())
            .await
            .map_err(|e| self.stage_error(latin, Stage::Propose, Some(0), e, Vec::new(), started))?;
        let text = call.response.content.clone();
        Ok(TranslationTrace {
            latin: latin.to_string(),
            variant: self.config.variant,
            candidates: vec![text.clone()],
            selected: text.clone(),
            selected_index: Some(0),
            final_text: text,
            non_literal: None,
            calls: vec![call],
            total_latency: started.elapsed(),
        })
    }

    /// Readability-oriented rendering conditioned on a literal translation.
    pub async fn translate_non_literal(
        &self,
        latin: &str,
        literal: &str,
    ) -> Result<(String, StageCall), PipelineError> {
        let user = assemble_non_literal_message(latin, literal)?;
        let started = Instant::now();
        let call = self
            .call(
                Stage::NonLiteral,
                None,
                PromptName::NonLiteral,
                &self.config.aggregator_model,
                user,
            )
            .await
            .map_err(|e| self.stage_error(latin, Stage::NonLiteral, None, e, Vec::new(), started))?;
        let text = strip_translation_label(&call.response.content).to_string();
        Ok((text, call))
    }

    /// `translate` followed by the non-literal pass, recorded in one trace.
    pub async fn translate_with_non_literal(&self, latin: &str) -> Result<TranslationTrace, PipelineError> {
        let mut trace = self.translate(latin).await?;
        match self.translate_non_literal(latin, &trace.final_text).await {
            Ok((text, call)) => {
                trace.total_latency += call.response.latency;
                trace.calls.push(call);
                trace.non_literal = Some(text);
                Ok(trace)
            }
            Err(PipelineError::Stage {
                stage,
                candidate_index,
                source,
                ..
            }) => Err(PipelineError::Stage {
                stage,
                candidate_index,
                source,
                partial: Box::new(trace),
            }),
            Err(other) => Err(other),
        }
    }

    /// Strips commentary from raw model output. Evaluation flows use this
    /// for open models; `translate` never calls it.
    pub async fn clean_output(&self, raw: &str) -> Result<(String, StageCall), PipelineError> {
        if raw.trim().is_empty() {
            return Err(PipelineError::InvalidInput("raw output is empty".into()));
        }
        let started = Instant::now();
        let call = self
            .call(
                Stage::Clean,
                None,
                PromptName::OutputCleaner,
                &self.config.aggregator_model,
                raw.to_string(),
            )
            .await
            .map_err(|e| self.stage_error(raw, Stage::Clean, None, e, Vec::new(), started))?;
        Ok((call.response.content.clone(), call))
    }
}
