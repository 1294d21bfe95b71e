#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use litera_core::llm::{LlmClient, MockBackend, MockRule, MockScript, RetryPolicy};
use litera_core::pipeline::{Pipeline, PipelineConfig, Variant};
use litera_core::prompts::PromptRegistry;

pub const PROPOSE: &str = "You are an advanced Latin translator";
pub const REVISE: &str = "You are a highly critical";
pub const FILTER: &str = "You are the final filter";
pub const NON_LITERAL: &str = "When provided with Latin text";
pub const BASELINE: &str = "You are a Latin translator.";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_json(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// Replies identify the stage and carry a per-rule counter, so every
/// response is distinct.
pub fn staged_script() -> MockScript {
    MockScript::constant("unmatched")
        .with_rule(MockRule::any("proposal {hits} by {model}").system_prefix(PROPOSE))
        .with_rule(MockRule::any("revision {hits}").system_prefix(REVISE))
        .with_rule(MockRule::any("filtered {hits}").system_prefix(FILTER))
        .with_rule(MockRule::any("Translation: readable {hits}").system_prefix(NON_LITERAL))
        .with_rule(MockRule::any("baseline {hits} by {model}").system_prefix(BASELINE))
}

pub fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 3,
        backoff_base: Duration::from_millis(1),
        factor: 2.0,
        max_backoff: Duration::from_millis(5),
    }
}

pub fn mock_pipeline(script: MockScript, config: PipelineConfig) -> (Pipeline, Arc<MockBackend>) {
    let mock = Arc::new(MockBackend::new(script));
    let client = LlmClient::new(mock.clone(), fast_retry());
    let pipeline = Pipeline::new(client, Arc::new(PromptRegistry::builtin()), config).unwrap();
    (pipeline, mock)
}

pub fn variant_pipeline(script: MockScript, variant: Variant) -> (Pipeline, Arc<MockBackend>) {
    mock_pipeline(
        script,
        PipelineConfig {
            variant,
            ..PipelineConfig::default()
        },
    )
}
