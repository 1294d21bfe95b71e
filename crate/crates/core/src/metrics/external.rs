//! Adapter for learned metrics that run outside this process.
//!
//! Subprocess mode: the executable reads `candidate<TAB>reference` lines on
//! stdin and writes one decimal per line to stdout, in order. HTTP mode:
//! `POST {url}/score` with `{"pairs":[{"candidate":..,"reference":..}]}`
//! answered by `{"scores":[..]}`.

use std::path::PathBuf;
use std::process::Stdio;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::AsyncWriteExt;

#[derive(Debug, Error)]
pub enum ExternalScorerError {
    #[error("scorer configuration: {0}")]
    Config(String),
    #[error("scorer runtime failure: {0}")]
    Runtime(String),
    #[error("scorer protocol error at output line {line}: {message}")]
    Protocol { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScorerTransport {
    Subprocess {
        command: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
    Http {
        url: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Column header used in reports, e.g. "BLEURT".
    #[serde(default = "default_metric_name")]
    pub name: String,
    #[serde(flatten)]
    pub transport: ScorerTransport,
    /// Score several systems concurrently instead of one after another.
    #[serde(default)]
    pub parallel: bool,
}

fn default_metric_name() -> String {
    "BLEURT".into()
}

impl ScorerConfig {
    pub fn subprocess(command: impl Into<PathBuf>) -> Self {
        ScorerConfig {
            name: default_metric_name(),
            transport: ScorerTransport::Subprocess {
                command: command.into(),
                args: Vec::new(),
            },
            parallel: false,
        }
    }

    pub fn http(url: impl Into<String>) -> Self {
        ScorerConfig {
            name: default_metric_name(),
            transport: ScorerTransport::Http { url: url.into() },
            parallel: false,
        }
    }

    fn check(&self) -> Result<(), ExternalScorerError> {
        match &self.transport {
            ScorerTransport::Subprocess { command, .. } if command.as_os_str().is_empty() => {
                Err(ExternalScorerError::Config("scorer command is not set".into()))
            }
            ScorerTransport::Http { url } if url.trim().is_empty() => {
                Err(ExternalScorerError::Config("scorer url is not set".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalScores {
    pub per_segment: Vec<f64>,
    /// Unweighted arithmetic mean over segments.
    pub mean: f64,
}

fn flatten_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Encodes pairs in the subprocess wire format.
pub fn encode_pairs<C: AsRef<str>, R: AsRef<str>>(candidates: &[C], references: &[R]) -> String {
    let mut out = String::new();
    for (c, r) in candidates.iter().zip(references) {
        out.push_str(&flatten_field(c.as_ref()));
        out.push('\t');
        out.push_str(&flatten_field(r.as_ref()));
        out.push('\n');
    }
    out
}

/// Parses subprocess output, requiring exactly `expected` numeric lines.
pub fn decode_scores(output: &str, expected: usize) -> Result<Vec<f64>, ExternalScorerError> {
    let lines: Vec<&str> = output.lines().collect();
    let mut scores = Vec::with_capacity(expected);
    for (i, line) in lines.iter().enumerate() {
        let v: f64 = line.trim().parse().map_err(|_| ExternalScorerError::Protocol {
            line: i + 1,
            message: format!("not a number: {line:?}"),
        })?;
        if !v.is_finite() {
            return Err(ExternalScorerError::Protocol {
                line: i + 1,
                message: format!("non-finite score {line:?}"),
            });
        }
        scores.push(v);
    }
    if scores.len() != expected {
        return Err(ExternalScorerError::Protocol {
            line: scores.len() + 1,
            message: format!("expected {expected} scores, received {}", scores.len()),
        });
    }
    Ok(scores)
}

fn finish(per_segment: Vec<f64>) -> ExternalScores {
    let mean = per_segment.iter().sum::<f64>() / per_segment.len() as f64;
    ExternalScores { per_segment, mean }
}

pub async fn score_external<C: AsRef<str>, R: AsRef<str>>(
    config: Option<&ScorerConfig>,
    candidates: &[C],
    references: &[R],
) -> Result<ExternalScores, ExternalScorerError> {
    let config = config.ok_or_else(|| ExternalScorerError::Config("no external scorer configured".into()))?;
    config.check()?;
    if candidates.len() != references.len() {
        return Err(ExternalScorerError::Config(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(ExternalScorerError::Config("nothing to score".into()));
    }
    let scores = match &config.transport {
        ScorerTransport::Subprocess { command, args } => {
            run_subprocess(command, args, encode_pairs(candidates, references), candidates.len()).await?
        }
        ScorerTransport::Http { url } => run_http(url, candidates, references).await?,
    };
    Ok(finish(scores))
}

async fn run_subprocess(
    command: &PathBuf,
    args: &[String],
    input: String,
    expected: usize,
) -> Result<Vec<f64>, ExternalScorerError> {
    let mut child = tokio::process::Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                ExternalScorerError::Config(format!("cannot launch {}: {e}", command.display()))
            }
            _ => ExternalScorerError::Runtime(format!("launching {}: {e}", command.display())),
        })?;
    let mut stdin = child.stdin.take().expect("stdin piped");
    let writer = tokio::spawn(async move {
        let r = stdin.write_all(input.as_bytes()).await;
        drop(stdin);
        r
    });
    let output = child
        .wait_with_output()
        .await
        .map_err(|e| ExternalScorerError::Runtime(format!("waiting for scorer: {e}")))?;
    // a scorer that exits early may close stdin; its exit status is the better diagnostic
    let _ = writer.await;
    if !output.status.success() {
        return Err(ExternalScorerError::Runtime(format!(
            "scorer exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let stdout = String::from_utf8(output.stdout).map_err(|_| ExternalScorerError::Protocol {
        line: 0,
        message: "output is not UTF-8".into(),
    })?;
    decode_scores(&stdout, expected)
}

#[derive(Serialize)]
struct HttpPair<'a> {
    candidate: &'a str,
    reference: &'a str,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    pairs: Vec<HttpPair<'a>>,
}

#[derive(Deserialize)]
struct HttpResponse {
    scores: Vec<f64>,
}

async fn run_http<C: AsRef<str>, R: AsRef<str>>(
    url: &str,
    candidates: &[C],
    references: &[R],
) -> Result<Vec<f64>, ExternalScorerError> {
    let body = HttpRequest {
        pairs: candidates
            .iter()
            .zip(references)
            .map(|(c, r)| HttpPair {
                candidate: c.as_ref(),
                reference: r.as_ref(),
            })
            .collect(),
    };
    let endpoint = format!("{}/score", url.trim_end_matches('/'));
    let resp = reqwest::Client::new()
        .post(&endpoint)
        .json(&body)
        .send()
        .await
        .map_err(|e| ExternalScorerError::Runtime(format!("POST {endpoint}: {e}")))?;
    if !resp.status().is_success() {
        return Err(ExternalScorerError::Runtime(format!("POST {endpoint}: HTTP {}", resp.status())));
    }
    let parsed: HttpResponse = resp.json().await.map_err(|e| ExternalScorerError::Protocol {
        line: 0,
        message: format!("malformed JSON response: {e}"),
    })?;
    if parsed.scores.len() != candidates.len() {
        return Err(ExternalScorerError::Protocol {
            line: 0,
            message: format!("expected {} scores, received {}", candidates.len(), parsed.scores.len()),
        });
    }
    Ok(parsed.scores)
}
