//! Evaluation: 13a tokenization, corpus BLEU, external learned metrics and
//! comparison reports.

mod bleu;
mod external;
mod report;
mod tokenize;

use thiserror::Error;

pub use bleu::{bleu_corpus, BleuScore, BleuStats, MAX_ORDER};
pub use external::{
    decode_scores, encode_pairs, score_external, ExternalScorerError, ExternalScores, ScorerConfig,
    ScorerTransport,
};
pub use report::{build_report, build_report_ordered, EvalReport, ReportRow, RunMetadata};
pub use tokenize::{tokenize_13a, TokenSequence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("no segments to score")]
    EmptyInput,
    #[error("system {system:?} has {actual} hypotheses, corpus has {expected} segments")]
    HypothesisCount {
        system: String,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    External(#[from] ExternalScorerError),
}
