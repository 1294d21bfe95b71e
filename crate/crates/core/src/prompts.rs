//! Prompt registry and user-message assembly.
//!
//! The built-in prompt texts live in `prompts/*.txt` and are compiled into the
//! binary. `prompts/MANIFEST` pins their SHA-256 digests. An override
//! directory may replace any entry with a file named `<name>.txt`; overridden
//! entries are exempt from checksum verification.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt name {0:?}")]
    UnknownName(String),
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("expected {expected} candidates, got {actual}")]
    CandidateCount { expected: usize, actual: usize },
    #[error("prompt {name} checksum mismatch: expected {expected}, found {actual}")]
    ChecksumMismatch {
        name: PromptName,
        expected: String,
        actual: String,
    },
    #[error("reading prompt override {path}: {message}")]
    Override { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptName {
    FineTunedSystem,
    Revision,
    FinalFilter,
    NonLiteral,
    BaselineTranslator,
    OutputCleaner,
}

impl PromptName {
    pub const ALL: [PromptName; 6] = [
        PromptName::FineTunedSystem,
        PromptName::Revision,
        PromptName::FinalFilter,
        PromptName::NonLiteral,
        PromptName::BaselineTranslator,
        PromptName::OutputCleaner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptName::FineTunedSystem => "fine_tuned_system",
            PromptName::Revision => "revision",
            PromptName::FinalFilter => "final_filter",
            PromptName::NonLiteral => "non_literal",
            PromptName::BaselineTranslator => "baseline_translator",
            PromptName::OutputCleaner => "output_cleaner",
        }
    }

    fn builtin_text(self) -> &'static str {
        match self {
            PromptName::FineTunedSystem => include_str!("../prompts/fine_tuned_system.txt"),
            PromptName::Revision => include_str!("../prompts/revision.txt"),
            PromptName::FinalFilter => include_str!("../prompts/final_filter.txt"),
            PromptName::NonLiteral => include_str!("../prompts/non_literal.txt"),
            PromptName::BaselineTranslator => include_str!("../prompts/baseline_translator.txt"),
            PromptName::OutputCleaner => include_str!("../prompts/output_cleaner.txt"),
        }
    }

    /// The output cleaner text is not a published prompt and is not held to
    /// golden-file equality.
    pub fn is_normative(self) -> bool {
        self != PromptName::OutputCleaner
    }
}

impl fmt::Display for PromptName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptName {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| PromptError::UnknownName(s.to_string()))
    }
}

const MANIFEST: &str = include_str!("../prompts/MANIFEST");

/// Digest recorded in the shipped manifest for a prompt.
pub fn manifest_digest(name: PromptName) -> Option<&'static str> {
    let file = format!("{}.txt", name.as_str());
    MANIFEST.lines().find_map(|line| {
        let (f, digest) = line.split_once(' ')?;
        (f == file).then_some(digest.trim())
    })
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: PromptName,
    pub text: Arc<str>,
    pub overridden: bool,
}

#[derive(Debug, Clone)]
pub struct PromptRegistry {
    entries: BTreeMap<PromptName, PromptTemplate>,
}

impl Default for PromptRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptRegistry {
    pub fn builtin() -> Self {
        let entries = PromptName::ALL
            .into_iter()
            .map(|name| {
                (
                    name,
                    PromptTemplate {
                        name,
                        text: Arc::from(name.builtin_text()),
                        overridden: false,
                    },
                )
            })
            .collect();
        PromptRegistry { entries }
    }

    /// Built-in registry with any `<name>.txt` found in `dir` substituted.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut reg = Self::builtin();
        for name in PromptName::ALL {
            let path = dir.join(format!("{}.txt", name.as_str()));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Override {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            reg.entries.insert(
                name,
                PromptTemplate {
                    name,
                    text: Arc::from(text),
                    overridden: true,
                },
            );
        }
        Ok(reg)
    }

    pub fn get(&self, name: PromptName) -> &PromptTemplate {
        &self.entries[&name]
    }

    pub fn text(&self, name: PromptName) -> &str {
        &self.get(name).text
    }

    pub fn get_by_name(&self, name: &str) -> Result<&PromptTemplate, PromptError> {
        Ok(self.get(name.parse()?))
    }

    /// Verifies every non-overridden entry against the shipped manifest.
    pub fn verify_checksums(&self) -> Result<(), PromptError> {
        for entry in self.entries.values().filter(|e| !e.overridden) {
            let expected = manifest_digest(entry.name).unwrap_or_default();
            let actual = sha256_hex(&entry.text);
            if expected != actual {
                return Err(PromptError::ChecksumMismatch {
                    name: entry.name,
                    expected: expected.to_string(),
                    actual,
                });
            }
        }
        Ok(())
    }
}

pub const REVISION_HEADER: &str = "Return a corrected translation or the same if it is accurate:";

fn require(value: &str, what: &'static str) -> Result<(), PromptError> {
    if value.is_empty() {
        Err(PromptError::EmptyInput(what))
    } else {
        Ok(())
    }
}

/// User message for a revision call. Inputs are interpolated verbatim.
pub fn assemble_revision_message(latin: &str, translation: &str) -> Result<String, PromptError> {
    require(latin, "latin text")?;
    require(translation, "translation")?;
    Ok(format!(
        "{REVISION_HEADER}\nLatin text: {latin}\nTranslation:\n{translation}"
    ))
}

/// User message for the selection call, candidates numbered from 1 in the
/// order given. The space before the first newline is intentional.
pub fn assemble_comparison_message<S: AsRef<str>>(
    latin: &str,
    candidates: &[S],
    expected: usize,
) -> Result<String, PromptError> {
    require(latin, "latin text")?;
    if candidates.len() != expected || expected == 0 {
        return Err(PromptError::CandidateCount {
            expected,
            actual: candidates.len(),
        });
    }
    let count = if expected == 5 {
        "five".to_string()
    } else {
        expected.to_string()
    };
    let mut msg = format!(
        "Given these {count} translations, select the best one based on this Latin provided text: \n{latin}"
    );
    for (i, c) in candidates.iter().enumerate() {
        msg.push_str(&format!("\n{}. {}", i + 1, c.as_ref()));
    }
    Ok(msg)
}

pub fn assemble_non_literal_message(latin: &str, literal: &str) -> Result<String, PromptError> {
    require(latin, "latin text")?;
    require(literal, "literal translation")?;
    Ok(format!(
        "Latin Text: {latin}\nLiteral English Translation: {literal}"
    ))
}
