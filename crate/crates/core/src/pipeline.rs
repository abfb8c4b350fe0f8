//! Overgenerate, score, filter, deduplicate.
//!
//! 1. Ask the backend for `beam_count` beams on the Generate prompt.
//! 2. Parse each beam into (kind, text); unparseable beams are dropped.
//! 3. Score relevance for every parsed candidate.
//! 4. Sort by relevance, then beam score, then text.
//! 5. Scan in that order. A candidate is kept when its relevance reaches the
//!    threshold for its kind and both its maximum content overlap and its
//!    maximum embedding cosine against already-kept candidates of the same
//!    kind are strictly below their thresholds.
//! 6. Score valence for the kept candidates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::codec::{encode_task, parse_generation_output, Task, TaskPrompt, RELEVANCE_LABELS, VALENCE_LABELS};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::textsim::{content_overlap_text, cosine};
use crate::types::{validate_params, ScoredCandidate, SystemParams, ValenceDistribution, ValueEntry, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Parse,
    BelowThreshold,
    NgramDup,
    EmbedDup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub beam: String,
    pub beam_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ValueKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<f64>,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub action: String,
    pub candidates: Vec<ScoredCandidate>,
    pub dropped: Vec<DroppedCandidate>,
}

#[derive(Debug, Clone)]
struct Parsed {
    beam: String,
    beam_score: f64,
    entry: ValueEntry,
    relevance: f64,
}

impl Parsed {
    fn dropped(&self, reason: DropReason) -> DroppedCandidate {
        DroppedCandidate {
            beam: self.beam.clone(),
            beam_score: self.beam_score,
            kind: Some(self.entry.kind),
            text: Some(self.entry.text.clone()),
            relevance: Some(self.relevance),
            reason,
        }
    }
}

/// Candidate order: relevance desc, beam score desc, text asc.
pub fn candidate_order(a: (f64, f64, &str), b: (f64, f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.total_cmp(&a.1))
        .then_with(|| a.2.cmp(b.2))
}

/// The string handed to the sentence embedder for an entry.
pub fn embedding_text(entry: &ValueEntry) -> String {
    entry.generation_target()
}

#[derive(Clone, Copy)]
pub struct Pipeline<'b> {
    backend: &'b dyn Backend,
    exec: Execution,
}

impl<'b> Pipeline<'b> {
    pub fn new(backend: &'b dyn Backend) -> Self {
        Pipeline {
            backend,
            exec: Execution::default(),
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn backend(&self) -> &'b dyn Backend {
        self.backend
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    /// P(Yes) for the Relevance prompt.
    pub fn score_relevance(&self, action: &str, entry: &ValueEntry) -> Result<f64> {
        let prompt = encode_task(&TaskPrompt::with_entry(
            Task::Relevance,
            action,
            entry.kind,
            entry.text.as_str(),
        ))?;
        let probs = self.backend.classify(&prompt, &RELEVANCE_LABELS)?;
        Ok(probs[0])
    }

    pub fn score_valence(&self, action: &str, entry: &ValueEntry) -> Result<ValenceDistribution> {
        let prompt = encode_task(&TaskPrompt::with_entry(
            Task::Valence,
            action,
            entry.kind,
            entry.text.as_str(),
        ))?;
        let p = self.backend.classify(&prompt, &VALENCE_LABELS)?;
        // the backend already normalized; absorb last-ulp drift
        crate::types::normalize_distribution([p[0], p[1], p[2]])
    }

    pub fn explain(&self, action: &str, entry: &ValueEntry) -> Result<String> {
        let prompt = encode_task(&TaskPrompt::with_entry(
            Task::Explanation,
            action,
            entry.kind,
            entry.text.as_str(),
        ))?;
        let beams = self.backend.generate(&prompt, 1)?;
        match beams.into_iter().next() {
            Some(b) if !b.text.trim().is_empty() => Ok(b.text),
            _ => Err(Error::EmptyExplanation),
        }
    }

    pub fn generate_values(&self, action: &str, params: &SystemParams) -> Result<PipelineOutput> {
        validate_params(params)?;
        let prompt = encode_task(&TaskPrompt::generate(action))?;
        let beams = self.backend.generate(&prompt, params.beam_count)?;

        let mut dropped = Vec::new();
        let mut parsed_entries = Vec::new();
        for beam in beams {
            match parse_generation_output(&beam.text) {
                Ok((kind, text)) => parsed_entries.push((beam, ValueEntry::new(kind, text)?)),
                Err(_) => dropped.push(DroppedCandidate {
                    beam: beam.text,
                    beam_score: beam.score,
                    kind: None,
                    text: None,
                    relevance: None,
                    reason: DropReason::Parse,
                }),
            }
        }

        let relevances = par::try_map(self.exec, &parsed_entries, |(_, entry)| {
            self.score_relevance(action, entry)
        })?;
        let mut parsed: Vec<Parsed> = parsed_entries
            .into_iter()
            .zip(relevances)
            .map(|((beam, entry), relevance)| Parsed {
                beam: beam.text,
                beam_score: beam.score,
                entry,
                relevance,
            })
            .collect();
        parsed.sort_by(|a, b| {
            candidate_order(
                (a.relevance, a.beam_score, &a.entry.text),
                (b.relevance, b.beam_score, &b.entry.text),
            )
        });

        let relevant: Vec<bool> = parsed
            .iter()
            .map(|p| p.relevance >= params.relevance_threshold.get(p.entry.kind))
            .collect();
        let embed_inputs: Vec<String> = parsed
            .iter()
            .zip(&relevant)
            .filter(|(_, keep)| **keep)
            .map(|(p, _)| embedding_text(&p.entry))
            .collect();
        let mut embeddings = if embed_inputs.is_empty() {
            Vec::new()
        } else {
            self.backend.embed(&embed_inputs)?
        }
        .into_iter();

        let mut kept: Vec<(Parsed, Vec<f64>)> = Vec::new();
        for (p, is_relevant) in parsed.into_iter().zip(relevant) {
            if !is_relevant {
                dropped.push(p.dropped(DropReason::BelowThreshold));
                continue;
            }
            let vector = embeddings.next().expect("one embedding per relevant candidate");
            let kind = p.entry.kind;
            // max over an empty set is 0
            let mut max_overlap = 0.0f64;
            let mut max_cosine: Option<f64> = None;
            for (other, other_vec) in kept.iter().filter(|(o, _)| o.entry.kind == kind) {
                max_overlap = max_overlap.max(content_overlap_text(&p.entry.text, &other.entry.text));
                let c = cosine(&vector, other_vec)?;
                max_cosine = Some(max_cosine.map_or(c, |m| m.max(c)));
            }
            let max_cosine = max_cosine.unwrap_or(0.0);
            if max_overlap >= params.ngram_threshold {
                dropped.push(p.dropped(DropReason::NgramDup));
            } else if max_cosine >= params.embed_threshold.get(kind) {
                dropped.push(p.dropped(DropReason::EmbedDup));
            } else {
                kept.push((p, vector));
            }
        }

        let valences = par::try_map(self.exec, &kept, |(p, _)| self.score_valence(action, &p.entry))?;
        let candidates = kept
            .into_iter()
            .zip(valences)
            .map(|((p, _), valence)| ScoredCandidate {
                entry: p.entry,
                relevance: p.relevance,
                valence,
                beam_score: p.beam_score,
            })
            .collect();

        Ok(PipelineOutput {
            action: action.to_string(),
            candidates,
            dropped,
        })
    }
}

/// Convenience wrapper around [`Pipeline::generate_values`].
pub fn generate_values(backend: &dyn Backend, action: &str, params: &SystemParams) -> Result<PipelineOutput> {
    Pipeline::new(backend).generate_values(action, params)
}
