//! Corpus-level BLEU with a single reference per segment.
//!
//! Defaults mirror the common standardized configuration: case-sensitive,
//! 13a tokenization, n-grams up to order 4 and exponential smoothing for
//! orders with no matches.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{is_py_whitespace, tokenize_13a};
use super::MetricsError;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// On the 0..=100 scale.
    pub score: f64,
    /// Per-order precisions p1..p4 on the 0..=1 scale, after smoothing.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub sys_len: usize,
    pub ref_len: usize,
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
}

/// Sufficient statistics; additive over segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub sys_len: usize,
    pub ref_len: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn preprocess(text: &str) -> Vec<String> {
    tokenize_13a(text.trim_end_matches(is_py_whitespace)).into_inner()
}

impl BleuStats {
    pub fn from_pair(hypothesis: &str, reference: &str) -> Self {
        let hyp = preprocess(hypothesis);
        let reference = preprocess(reference);
        let mut stats = BleuStats {
            sys_len: hyp.len(),
            ref_len: reference.len(),
            ..BleuStats::default()
        };
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(&reference, n);
            let hyp_counts = ngram_counts(&hyp, n);
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1);
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for i in 0..MAX_ORDER {
            self.matches[i] += other.matches[i];
            self.totals[i] += other.totals[i];
        }
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.sys_len >= self.ref_len {
            1.0
        } else if self.sys_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.sys_len as f64).exp()
        }
    }

    #[allow(clippy::needless_range_loop)]
    pub fn score(&self) -> BleuScore {
        let bp = self.brevity_penalty();
        let mut precisions = [0.0; MAX_ORDER];
        let mut score = 0.0;
        if self.matches.iter().any(|&m| m > 0) {
            let mut smooth = 1.0;
            for n in 0..MAX_ORDER {
                if self.totals[n] == 0 {
                    break;
                }
                precisions[n] = if self.matches[n] == 0 {
                    smooth *= 2.0;
                    1.0 / (smooth * self.totals[n] as f64)
                } else {
                    self.matches[n] as f64 / self.totals[n] as f64
                };
            }
            if precisions.iter().all(|&p| p > 0.0) {
                let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
                score = 100.0 * bp * mean_log.exp();
            }
        }
        BleuScore {
            score,
            precisions,
            brevity_penalty: bp,
            sys_len: self.sys_len,
            ref_len: self.ref_len,
            matches: self.matches,
            totals: self.totals,
        }
    }
}

/// Corpus BLEU of `hypotheses` against one reference each.
///
/// An empty system output (`sys_len == 0`) scores 0 and reports a brevity
/// penalty of 0.
pub fn bleu_corpus<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
) -> Result<BleuScore, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        total.add(&BleuStats::from_pair(h.as_ref(), r.as_ref()));
    }
    Ok(total.score())
}
