//! Parallel Latin–English corpora: loading, saving and fine-tune export.
//!
//! Two on-disk layouts are supported. JSONL carries one object per line with
//! the keys `id`, `latin`, `english` and `era`. TSV carries
//! `latin<TAB>english` or `id<TAB>latin<TAB>english` with an optional fourth
//! `era` column. Both are UTF-8 with LF line endings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate segment id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("segment {id:?} (line {line}) has an empty latin field")]
    EmptyLatin { id: String, line: usize },
    #[error("segment {id:?} has no english reference")]
    MissingReference { id: String },
    #[error("segment {id:?}: {field} contains a tab or newline and cannot be written as TSV")]
    NotTsvSafe { id: String, field: &'static str },
    #[error("invalid fine-tune job spec: {0}")]
    InvalidJobSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Era {
    Classical,
    EarlyModern,
    #[default]
    Unspecified,
}

impl Era {
    pub fn as_str(self) -> &'static str {
        match self {
            Era::Classical => "classical",
            Era::EarlyModern => "early_modern",
            Era::Unspecified => "unspecified",
        }
    }
}

impl FromStr for Era {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(Era::Classical),
            "early_modern" => Ok(Era::EarlyModern),
            "unspecified" | "" => Ok(Era::Unspecified),
            other => Err(format!("unknown era {other:?}")),
        }
    }
}

impl fmt::Display for Era {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Picks the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or tsv)")),
        }
    }
}

/// One aligned sentence pair. Text fields are trimmed on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelSegment {
    id: String,
    latin: String,
    english: String,
    era: Era,
}

impl ParallelSegment {
    /// Returns `None` when the trimmed latin text is empty.
    pub fn new(
        id: impl Into<String>,
        latin: &str,
        english: &str,
        era: Era,
    ) -> Option<ParallelSegment> {
        let latin = latin.trim();
        if latin.is_empty() {
            return None;
        }
        Some(ParallelSegment {
            id: id.into(),
            latin: latin.to_string(),
            english: english.trim().to_string(),
            era,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn latin(&self) -> &str {
        &self.latin
    }

    pub fn english(&self) -> &str {
        &self.english
    }

    pub fn era(&self) -> Era {
        self.era
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub name: String,
    segments: Vec<ParallelSegment>,
    pub metadata: BTreeMap<String, String>,
}

impl Corpus {
    pub fn new(name: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            segments: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// Builds a corpus, rejecting duplicate ids. Positions in errors are 1-based.
    pub fn from_segments(
        name: impl Into<String>,
        segments: Vec<ParallelSegment>,
    ) -> Result<Self, CorpusError> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, seg) in segments.iter().enumerate() {
            if let Some(first) = seen.insert(seg.id(), i + 1) {
                return Err(CorpusError::DuplicateId {
                    id: seg.id().to_string(),
                    first_line: first,
                    second_line: i + 1,
                });
            }
        }
        Ok(Corpus {
            name: name.into(),
            segments,
            metadata: BTreeMap::new(),
        })
    }

    pub fn segments(&self) -> &[ParallelSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn references(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.english()).collect()
    }

    /// Checks the `segment_count` metadata entry, when present, against the
    /// actual number of segments.
    pub fn check_counts(&self) -> Result<(), String> {
        match self.metadata.get("segment_count") {
            None => Ok(()),
            Some(raw) => {
                let expected: usize = raw
                    .parse()
                    .map_err(|_| format!("segment_count {raw:?} is not an integer"))?;
                if expected == self.len() {
                    Ok(())
                } else {
                    Err(format!(
                        "metadata declares {expected} segments but corpus has {}",
                        self.len()
                    ))
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonlRecordIn {
    id: Option<String>,
    latin: String,
    #[serde(default)]
    english: Option<String>,
    #[serde(default)]
    era: Option<String>,
}

#[derive(Serialize)]
struct JsonlRecordOut<'a> {
    id: &'a str,
    latin: &'a str,
    #[serde(skip_serializing_if = "str::is_empty")]
    english: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    era: Option<&'static str>,
}

fn auto_id(ordinal: usize) -> String {
    format!("{ordinal:06}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a corpus, preserving input order. Blank lines are ignored; missing ids
/// become the zero-padded ordinal of the segment.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&name, &text, format)
}

pub fn parse_corpus(name: &str, text: &str, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let mut segments = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let (id, latin, english, era) = match format {
            CorpusFormat::Jsonl => parse_jsonl_line(line, line_no)?,
            CorpusFormat::Tsv => parse_tsv_line(line, line_no)?,
        };
        let id = match id {
            Some(id) if !id.trim().is_empty() => id.trim().to_string(),
            _ => auto_id(segments.len() + 1),
        };
        if let Some(&first) = first_seen.get(&id) {
            return Err(CorpusError::DuplicateId {
                id,
                first_line: first,
                second_line: line_no,
            });
        }
        let segment = ParallelSegment::new(id.clone(), &latin, &english, era).ok_or_else(|| {
            CorpusError::EmptyLatin {
                id: id.clone(),
                line: line_no,
            }
        })?;
        first_seen.insert(id, line_no);
        segments.push(segment);
    }

    Ok(Corpus {
        name: name.to_string(),
        segments,
        metadata: BTreeMap::new(),
    })
}

type RawSegment = (Option<String>, String, String, Era);

fn parse_jsonl_line(line: &str, line_no: usize) -> Result<RawSegment, CorpusError> {
    let rec: JsonlRecordIn = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    let era = match rec.era.as_deref() {
        None => Era::Unspecified,
        Some(s) => s.parse().map_err(|message| CorpusError::Malformed {
            line: line_no,
            message,
        })?,
    };
    Ok((rec.id, rec.latin, rec.english.unwrap_or_default(), era))
}

fn parse_tsv_line(line: &str, line_no: usize) -> Result<RawSegment, CorpusError> {
    let cols: Vec<&str> = line.split('\t').collect();
    match cols.as_slice() {
        [latin, english] => Ok((None, latin.to_string(), english.to_string(), Era::Unspecified)),
        [id, latin, english] => Ok((
            Some(id.to_string()),
            latin.to_string(),
            english.to_string(),
            Era::Unspecified,
        )),
        [id, latin, english, era] => {
            let era = era.trim().parse().map_err(|message| CorpusError::Malformed {
                line: line_no,
                message,
            })?;
            Ok((Some(id.to_string()), latin.to_string(), english.to_string(), era))
        }
        _ => Err(CorpusError::Malformed {
            line: line_no,
            message: format!("expected 2 to 4 tab-separated columns, found {}", cols.len()),
        }),
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let rendered = render_corpus(corpus, format)?;
    fs::write(path, rendered).map_err(io_err(path))
}

pub fn render_corpus(corpus: &Corpus, format: CorpusFormat) -> Result<String, CorpusError> {
    let mut out = String::new();
    for seg in corpus.segments() {
        match format {
            CorpusFormat::Jsonl => {
                let rec = JsonlRecordOut {
                    id: seg.id(),
                    latin: seg.latin(),
                    english: seg.english(),
                    era: match seg.era() {
                        Era::Unspecified => None,
                        e => Some(e.as_str()),
                    },
                };
                out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            }
            CorpusFormat::Tsv => {
                for (field, value) in [("id", seg.id()), ("latin", seg.latin()), ("english", seg.english())] {
                    if value.contains(['\t', '\n', '\r']) {
                        return Err(CorpusError::NotTsvSafe {
                            id: seg.id().to_string(),
                            field,
                        });
                    }
                }
                out.push_str(seg.id());
                out.push('\t');
                out.push_str(seg.latin());
                out.push('\t');
                out.push_str(seg.english());
                if seg.era() != Era::Unspecified {
                    out.push('\t');
                    out.push_str(seg.era().as_str());
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// One chat-format training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FineTuneRecord {
    pub system: String,
    pub user: String,
    pub assistant: String,
}

#[derive(Serialize, Deserialize)]
struct ChatLine {
    messages: Vec<ChatMessage>,
}

#[derive(Serialize, Deserialize)]
struct ChatMessage {
    role: String,
    content: String,
}

/// Writes one chat-format training example per segment and returns the number
/// of lines written. Every segment must carry an english reference.
pub fn export_finetune(
    corpus: &Corpus,
    system_prompt: &str,
    path: &Path,
) -> Result<usize, CorpusError> {
    if let Some(seg) = corpus.segments().iter().find(|s| s.english().is_empty()) {
        return Err(CorpusError::MissingReference {
            id: seg.id().to_string(),
        });
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    for seg in corpus.segments() {
        let line = ChatLine {
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: system_prompt.into(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: seg.latin().into(),
                },
                ChatMessage {
                    role: "assistant".into(),
                    content: seg.english().into(),
                },
            ],
        };
        serde_json::to_writer(&mut writer, &line).expect("record serializes");
        writer.write_all(b"\n").map_err(io_err(path))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(corpus.len())
}

pub fn parse_finetune(path: &Path) -> Result<Vec<FineTuneRecord>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let malformed = |message: String| CorpusError::Malformed {
            line: idx + 1,
            message,
        };
        let parsed: ChatLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let roles: Vec<&str> = parsed.messages.iter().map(|m| m.role.as_str()).collect();
        if roles != ["system", "user", "assistant"] {
            return Err(malformed(format!("unexpected message roles {roles:?}")));
        }
        let mut it = parsed.messages.into_iter().map(|m| m.content);
        records.push(FineTuneRecord {
            system: it.next().unwrap_or_default(),
            user: it.next().unwrap_or_default(),
            assistant: it.next().unwrap_or_default(),
        });
    }
    Ok(records)
}

/// Hyperparameters recorded next to an exported training file. Nothing is
/// submitted anywhere; this is metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneJobSpec {
    pub epochs: u32,
    pub batch_size: u32,
    pub lr_multiplier: f64,
    pub base_model: String,
    pub notes: String,
}

impl Default for FineTuneJobSpec {
    fn default() -> Self {
        FineTuneJobSpec {
            epochs: 3,
            batch_size: 1,
            lr_multiplier: 1.8,
            base_model: "gpt-4o-mini".into(),
            notes: "final checkpoint selected, no intermediate checkpoints".into(),
        }
    }
}

impl FineTuneJobSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.epochs == 0 {
            return Err(CorpusError::InvalidJobSpec("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(CorpusError::InvalidJobSpec("batch_size must be positive".into()));
        }
        if !(self.lr_multiplier.is_finite() && self.lr_multiplier > 0.0) {
            return Err(CorpusError::InvalidJobSpec(
                "lr_multiplier must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        self.validate()?;
        let json = serde_json::to_string_pretty(self).expect("job spec serializes");
        fs::write(path, json + "\n").map_err(io_err(path))
    }
}
