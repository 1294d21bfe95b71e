pub mod cli;
pub mod config;
pub mod corpus;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod service;
