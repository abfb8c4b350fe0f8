//! N-gram and vector similarity metrics.
//!
//! Tokenization everywhere: lowercase, split on runs of non-alphanumeric
//! characters. No stemming.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ValueEntry;

/// Fixed English function-word list used by [`content_overlap`]. 50 entries.
pub const STOPWORDS: [&str; 50] = [
    "a", "an", "the", "and", "or", "but", "if", "of", "to", "in", //
    "on", "at", "by", "for", "with", "from", "as", "into", "about", "than", //
    "be", "is", "are", "was", "were", "been", "being", "it", "its", "this", //
    "that", "these", "those", "not", "no", "one", "their", "his", "her", "your", //
    "my", "our", "own", "so", "such", "can", "may", "should", "would", "s",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    fn from_hits(hits: usize, candidate_len: usize, reference_len: usize) -> Self {
        if candidate_len == 0 || reference_len == 0 {
            return Prf::default();
        }
        Prf::from_pr(
            hits as f64 / candidate_len as f64,
            hits as f64 / reference_len as f64,
        )
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Rouge-N with clipped multiset overlap.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Prf {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&refr, n);
    let cand_total: usize = cand_counts.values().sum();
    let ref_total: usize = ref_counts.values().sum();
    let overlap = cand_counts
        .iter()
        .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    Prf::from_hits(overlap, cand_total, ref_total)
}

/// Positions in `a` belonging to one longest common subsequence with `b`.
fn lcs_positions(a: &[String], b: &[String]) -> Vec<usize> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if table[i - 1][j] >= table[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Summary-level Rouge-L: each item is one sentence. For every reference
/// sentence the union of its LCS tokens against all candidate sentences is
/// taken; hits are clipped by remaining token counts on both sides.
pub fn rouge_l_sum<S: AsRef<str>, T: AsRef<str>>(candidate_items: &[S], reference_items: &[T]) -> Prf {
    let cand: Vec<Vec<String>> = candidate_items
        .iter()
        .flat_map(|s| s.as_ref().lines().map(tokenize).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect();
    let refs: Vec<Vec<String>> = reference_items
        .iter()
        .flat_map(|s| s.as_ref().lines().map(tokenize).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect();

    let cand_len: usize = cand.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if cand_len == 0 || ref_len == 0 {
        return Prf::default();
    }

    let mut cand_left: HashMap<&str, usize> = HashMap::new();
    for t in cand.iter().flatten() {
        *cand_left.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut ref_left: HashMap<&str, usize> = HashMap::new();
    for t in refs.iter().flatten() {
        *ref_left.entry(t.as_str()).or_insert(0) += 1;
    }

    let mut hits = 0;
    for r in &refs {
        let mut union: Vec<usize> = cand
            .iter()
            .flat_map(|c| lcs_positions(r, c))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        union.sort_unstable();
        for pos in union {
            let tok = r[pos].as_str();
            let (Some(cl), Some(rl)) = (cand_left.get(tok).copied(), ref_left.get(tok).copied()) else {
                continue;
            };
            if cl > 0 && rl > 0 {
                hits += 1;
                cand_left.insert(tok, cl - 1);
                ref_left.insert(tok, rl - 1);
            }
        }
    }
    Prf::from_hits(hits, cand_len, ref_len)
}

/// Content tokens of an entry: kind markers and stopwords removed.
pub fn content_tokens(text: &str) -> HashSet<String> {
    let mut tokens = tokenize(text);
    // "Value: X" / "Right: X" / "Duty: X" marker
    let trimmed = text.trim_start();
    if let Some((head, _)) = trimmed.split_once(':') {
        let head = head.trim().to_ascii_lowercase();
        if matches!(head.as_str(), "value" | "right" | "duty") && tokens.first().map(String::as_str) == Some(head.as_str()) {
            tokens.remove(0);
        }
    }
    // "Right to/of ..." / "Duty to/of ..." phrase
    if tokens.len() >= 2
        && matches!(tokens[0].as_str(), "right" | "duty")
        && matches!(tokens[1].as_str(), "to" | "of")
    {
        tokens.drain(..2);
    }
    tokens
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Jaccard similarity of content unigram sets. Kinds must match.
pub fn content_overlap(a: &ValueEntry, b: &ValueEntry) -> Result<f64> {
    if a.kind != b.kind {
        return Err(Error::InvalidInput(format!(
            "cannot compare {} with {}",
            a.kind, b.kind
        )));
    }
    Ok(content_overlap_text(&a.text, &b.text))
}

pub(crate) fn content_overlap_text(a: &str, b: &str) -> f64 {
    let sa = content_tokens(a);
    let sb = content_tokens(b);
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::InvalidInput("cosine of a zero or non-finite vector".into()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
