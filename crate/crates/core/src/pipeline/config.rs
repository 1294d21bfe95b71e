use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Which stages run and which model proposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// propose → middle revise (×k) → filter → final revise
    Full,
    NoMiddleRevision,
    NoFinalRevision,
    /// `Full` with the aggregator model proposing.
    BaseCandidateAggregator,
    /// One call on the base mini model.
    SingleAggregatorMini,
    /// One call on the fine-tuned proposer with its system prompt.
    SingleFineTuned,
    /// One call on the aggregator with the plain baseline prompt.
    SingleBaseline,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::NoMiddleRevision,
        Variant::NoFinalRevision,
        Variant::BaseCandidateAggregator,
        Variant::SingleAggregatorMini,
        Variant::SingleFineTuned,
        Variant::SingleBaseline,
    ];

    /// The six ablation rows, in report order.
    pub const ABLATION: [Variant; 6] = [
        Variant::Full,
        Variant::NoMiddleRevision,
        Variant::NoFinalRevision,
        Variant::BaseCandidateAggregator,
        Variant::SingleAggregatorMini,
        Variant::SingleFineTuned,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMiddleRevision => "no_middle_revision",
            Variant::NoFinalRevision => "no_final_revision",
            Variant::BaseCandidateAggregator => "base_candidate_aggregator",
            Variant::SingleAggregatorMini => "single_aggregator_mini",
            Variant::SingleFineTuned => "single_fine_tuned",
            Variant::SingleBaseline => "single_baseline",
        }
    }

    /// Human-readable row label for ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full LITERA",
            Variant::NoMiddleRevision => "No Middle Revision",
            Variant::NoFinalRevision => "No Final Revision",
            Variant::BaseCandidateAggregator => "Base Candidate as Aggregator",
            Variant::SingleAggregatorMini => "Mini Model Only",
            Variant::SingleFineTuned => "Fine-Tuned Only",
            Variant::SingleBaseline => "Baseline Prompt Only",
        }
    }

    pub fn is_single(self) -> bool {
        matches!(
            self,
            Variant::SingleAggregatorMini | Variant::SingleFineTuned | Variant::SingleBaseline
        )
    }

    pub fn runs_middle_revision(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::NoFinalRevision | Variant::BaseCandidateAggregator
        )
    }

    pub fn runs_final_revision(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::NoMiddleRevision | Variant::BaseCandidateAggregator
        )
    }

    /// Provider calls one translation makes with `k` candidates.
    pub fn expected_calls(self, k: usize) -> usize {
        if self.is_single() {
            return 1;
        }
        let per_candidate = if self.runs_middle_revision() { 2 } else { 1 };
        k * per_candidate + 1 + usize::from(self.runs_final_revision())
    }

    pub fn names() -> String {
        Variant::ALL.map(Variant::as_str).join(", ")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant {s:?}; valid variants: {}", Variant::names()))
    }
}

/// System prompt used by [`Variant::SingleAggregatorMini`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiniOnlyPrompt {
    #[default]
    Baseline,
    FineTunedSystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub k: usize,
    pub proposer_model: String,
    pub aggregator_model: String,
    /// Base (not fine-tuned) small model used by the mini-only variant.
    pub mini_model: String,
    pub max_in_flight: usize,
    /// Inputs longer than this many characters are rejected.
    pub max_input_chars: usize,
    pub mini_only_prompt: MiniOnlyPrompt,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            variant: Variant::Full,
            k: 5,
            proposer_model: "proposer-fine-tuned".into(),
            aggregator_model: "aggregator".into(),
            mini_model: "aggregator-mini".into(),
            max_in_flight: 5,
            max_input_chars: 8000,
            mini_only_prompt: MiniOnlyPrompt::Baseline,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        if self.max_input_chars == 0 {
            return Err("max_input_chars must be positive".into());
        }
        for (field, value) in [
            ("proposer_model", &self.proposer_model),
            ("aggregator_model", &self.aggregator_model),
            ("mini_model", &self.mini_model),
        ] {
            if value.trim().is_empty() {
                return Err(format!("{field} must not be empty"));
            }
        }
        Ok(())
    }
}
