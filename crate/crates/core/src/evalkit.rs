//! Label accuracy, grouped accuracy and set-level precision/recall.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::pipeline::Pipeline;
use crate::textsim::rouge_n;
use crate::types::{SystemParams, ValueEntry, ValueKind};

/// Minimum unigram Rouge F1 for a generated item to match a reference item.
pub const MATCH_F1: f64 = 0.5;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("{a} predictions but {b} gold labels")));
    }
    if a == 0 {
        return Err(Error::InvalidInput("no predictions".into()));
    }
    Ok(())
}

pub fn label_accuracy<T: PartialEq>(predictions: &[T], golds: &[T]) -> Result<f64> {
    check_lengths(predictions.len(), golds.len())?;
    let hits = predictions.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Fraction of consecutive groups in which every prediction is correct.
pub fn grouped_accuracy<T: PartialEq>(predictions: &[T], golds: &[T], group_size: usize) -> Result<f64> {
    check_lengths(predictions.len(), golds.len())?;
    if group_size == 0 || predictions.len() % group_size != 0 {
        return Err(Error::InvalidInput(format!(
            "{} rows do not split into groups of {group_size}",
            predictions.len()
        )));
    }
    let groups = predictions.len() / group_size;
    let ok = predictions
        .chunks(group_size)
        .zip(golds.chunks(group_size))
        .filter(|(p, g)| p == g)
        .count();
    Ok(ok as f64 / groups as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMatch {
    pub generated: usize,
    pub reference: usize,
    pub f1: f64,
}

/// Greedy one-to-one matching of same-kind items, highest F1 first.
/// Ties go to the lower generated index, then the lower reference index.
pub fn match_items(generated: &[ValueEntry], reference: &[ValueEntry]) -> Vec<SetMatch> {
    let mut pairs = Vec::new();
    for (i, g) in generated.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            if g.kind != r.kind {
                continue;
            }
            let f1 = rouge_n(&g.text, &r.text, 1).f1;
            if f1 >= MATCH_F1 {
                pairs.push(SetMatch { generated: i, reference: j, f1 });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.f1.total_cmp(&a.f1)
            .then(a.generated.cmp(&b.generated))
            .then(a.reference.cmp(&b.reference))
    });
    let mut used_g = vec![false; generated.len()];
    let mut used_r = vec![false; reference.len()];
    let mut out = Vec::new();
    for m in pairs {
        if !used_g[m.generated] && !used_r[m.reference] {
            used_g[m.generated] = true;
            used_r[m.reference] = true;
            out.push(m);
        }
    }
    out
}

/// Item-level (precision, recall). An empty side scores 1 when the other
/// side is empty too and 0 otherwise.
pub fn set_precision_recall(generated: &[ValueEntry], reference: &[ValueEntry]) -> (f64, f64) {
    let matches = match_items(generated, reference).len() as f64;
    let ratio = |denom: usize, other: usize| match (denom, other) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (d, _) => matches / d as f64,
    };
    (
        ratio(generated.len(), reference.len()),
        ratio(reference.len(), generated.len()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub action: String,
    pub references: Vec<ValueEntry>,
}

impl ReferenceSet {
    /// Build from `"Kind: text"` strings.
    pub fn from_items<S: AsRef<str>>(action: impl Into<String>, items: &[S]) -> Result<Self> {
        let references = items
            .iter()
            .map(|s| {
                let (kind, text) = crate::codec::parse_generation_output(s.as_ref())?;
                ValueEntry::new(kind, text)
            })
            .collect::<Result<_>>()?;
        Ok(ReferenceSet {
            action: action.into(),
            references,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub params: SystemParams,
    pub precision: f64,
    pub recall: f64,
    pub avg_output_count: f64,
}

/// Mean precision, recall and output count over `sets` for each params entry.
pub fn pr_sweep(backend: &dyn Backend, sets: &[ReferenceSet], params: &[SystemParams], exec: Execution) -> Result<Vec<PrPoint>> {
    if sets.is_empty() || params.is_empty() {
        return Err(Error::InvalidInput("pr sweep needs actions and params".into()));
    }
    let pipeline = Pipeline::new(backend).with_execution(Execution::Sequential);
    params
        .iter()
        .map(|p| {
            let per_action = par::try_map(exec, sets, |set| {
                let out = pipeline.generate_values(&set.action, p)?;
                let generated: Vec<ValueEntry> = out.candidates.into_iter().map(|c| c.entry).collect();
                let (prec, rec) = set_precision_recall(&generated, &set.references);
                Ok::<_, Error>((prec, rec, generated.len()))
            })?;
            let n = per_action.len() as f64;
            Ok(PrPoint {
                params: *p,
                precision: per_action.iter().map(|x| x.0).sum::<f64>() / n,
                recall: per_action.iter().map(|x| x.1).sum::<f64>() / n,
                avg_output_count: per_action.iter().map(|x| x.2 as f64).sum::<f64>() / n,
            })
        })
        .collect()
}

pub fn write_pr_csv<W: Write>(out: W, points: &[PrPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    for prefix in ["relevance", "embed"] {
        for k in ValueKind::ALL {
            header.push(format!("{prefix}_{}", k.as_str().to_ascii_lowercase()));
        }
    }
    header.extend(["ngram", "beam_count", "precision", "recall", "avg_count"].map(String::from));
    w.write_record(&header)?;
    for p in points {
        let mut row: Vec<String> = Vec::new();
        for k in ValueKind::ALL {
            row.push(p.params.relevance_threshold.get(k).to_string());
        }
        for k in ValueKind::ALL {
            row.push(p.params.embed_threshold.get(k).to_string());
        }
        row.push(p.params.ngram_threshold.to_string());
        row.push(p.params.beam_count.to_string());
        row.push(p.precision.to_string());
        row.push(p.recall.to_string());
        row.push(p.avg_output_count.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
