//! Judgment aggregation over scored candidates.
//!
//! Class mass is `sum_i w_i * relevance_i * valence_i[class]`, normalized to a
//! distribution. Binary mode drops the either class before normalizing.
//! Entropy is reported in nats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textsim::Prf;
use crate::types::{Contribution, DecisionResult, ScoredCandidate, ValenceDistribution};

/// Per-candidate weights in [0,1]; unlisted candidates weigh 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightOverrides(pub BTreeMap<usize, f64>);

impl WeightOverrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, index: usize, weight: f64) -> Result<()> {
        check_weight(index, weight)?;
        self.0.insert(index, weight);
        Ok(())
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.0.get(&index).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.0.iter().try_for_each(|(i, w)| check_weight(*i, *w))
    }
}

fn check_weight(index: usize, w: f64) -> Result<()> {
    if w.is_finite() && (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("weight {w} for candidate {index} outside [0,1]")))
    }
}

pub fn decide(candidates: &[ScoredCandidate], weights: &WeightOverrides, binary: bool) -> Result<DecisionResult> {
    weights.validate()?;
    if candidates.is_empty() {
        return Err(Error::NoEffectiveEvidence);
    }
    let mut total = [0.0f64; 3];
    let mut contributions = Vec::with_capacity(candidates.len());
    for (index, c) in candidates.iter().enumerate() {
        c.validate()?;
        let scale = weights.weight(index) * c.relevance;
        let mut mass = c.valence.as_array().map(|p| scale * p);
        if binary {
            mass[2] = 0.0;
        }
        for k in 0..3 {
            total[k] += mass[k];
        }
        contributions.push(Contribution { index, mass });
    }
    let sum: f64 = total.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::NoEffectiveEvidence);
    }
    let distribution = ValenceDistribution {
        support: total[0] / sum,
        oppose: total[1] / sum,
        either: total[2] / sum,
    };
    Ok(DecisionResult {
        entropy_nats: entropy(&distribution),
        distribution,
        contributions,
    })
}

/// Shannon entropy in nats with 0 ln 0 = 0.
pub fn entropy(d: &ValenceDistribution) -> f64 {
    let h: f64 = d
        .as_array()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyThreshold {
    pub tau: f64,
    pub achieved_f1: f64,
}

impl EntropyThreshold {
    pub fn is_ambiguous(&self, entropy: f64) -> bool {
        entropy >= self.tau
    }
}

/// F1 of the rule `entropy >= tau -> positive`.
pub fn threshold_f1(samples: &[(f64, bool)], tau: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for &(h, label) in samples {
        match (h >= tau, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    Prf::from_pr(precision, recall).f1
}

/// Pick the F1-maximizing entropy threshold (positive = ambiguous).
///
/// Candidates are the midpoints between consecutive distinct entropies plus
/// one sentinel below the minimum and one above the maximum. Ties go to the
/// smaller threshold.
pub fn fit_threshold(samples: &[(f64, bool)]) -> Result<EntropyThreshold> {
    if samples.iter().any(|(h, _)| !h.is_finite() || *h < 0.0) {
        return Err(Error::InvalidInput("entropies must be finite and non-negative".into()));
    }
    let positives = samples.iter().filter(|(_, l)| *l).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::InvalidInput(
            "threshold fitting needs both positive and negative samples".into(),
        ));
    }
    let mut values: Vec<f64> = samples.iter().map(|(h, _)| *h).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut candidates = Vec::with_capacity(values.len() + 1);
    candidates.push(values[0] / 2.0);
    candidates.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(values[values.len() - 1] + 1.0);

    let mut best = EntropyThreshold {
        tau: candidates[0],
        achieved_f1: threshold_f1(samples, candidates[0]),
    };
    for &tau in &candidates[1..] {
        let f1 = threshold_f1(samples, tau);
        if f1 > best.achieved_f1 {
            best = EntropyThreshold { tau, achieved_f1: f1 };
        }
    }
    Ok(best)
}

/// Multinomial logistic regression over (p_support, p_oppose, p_either).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// One row of feature weights per class.
    pub weights: Vec<[f64; 3]>,
    pub biases: Vec<f64>,
}

impl CalibrationModel {
    pub fn num_classes(&self) -> usize {
        self.biases.len()
    }

    fn scores(&self, x: &[f64; 3]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + b)
            .collect()
    }

    pub fn predict_proba(&self, feature: &ValenceDistribution) -> Vec<f64> {
        softmax(&self.scores(&feature.as_array()))
    }

    /// Argmax class; ties go to the lower class id.
    pub fn predict(&self, feature: &ValenceDistribution) -> usize {
        argmax(&self.scores(&feature.as_array()))
    }

    pub fn accuracy(&self, features: &[ValenceDistribution], labels: &[usize]) -> Result<f64> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(Error::InvalidInput("features and labels must be equal-length and non-empty".into()));
        }
        let correct = features
            .iter()
            .zip(labels)
            .filter(|(f, l)| self.predict(f) == **l)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Accuracy of predicting the raw distribution's argmax class
/// (0 support, 1 oppose, 2 either).
pub fn argmax_accuracy(features: &[ValenceDistribution], labels: &[usize]) -> Result<f64> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::InvalidInput("features and labels must be equal-length and non-empty".into()));
    }
    let correct = features
        .iter()
        .zip(labels)
        .filter(|(f, l)| f.argmax().class_index() == **l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Full-batch gradient descent on the softmax cross-entropy.
pub fn calibrate(
    features: &[ValenceDistribution],
    labels: &[usize],
    iterations: usize,
    learning_rate: f64,
) -> Result<CalibrationModel> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::InvalidInput("no training data".into()));
    }
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::InvalidInput("learning rate must be positive".into()));
    }
    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 2 {
        return Err(Error::InvalidInput("calibration needs at least two classes".into()));
    }

    let n = features.len() as f64;
    let xs: Vec<[f64; 3]> = features.iter().map(ValenceDistribution::as_array).collect();
    let mut model = CalibrationModel {
        weights: vec![[0.0; 3]; num_classes],
        biases: vec![0.0; num_classes],
    };
    for _ in 0..iterations {
        let mut grad_w = vec![[0.0f64; 3]; num_classes];
        let mut grad_b = vec![0.0f64; num_classes];
        for (x, &y) in xs.iter().zip(labels) {
            let p = softmax(&model.scores(x));
            for k in 0..num_classes {
                let err = p[k] - if k == y { 1.0 } else { 0.0 };
                for j in 0..3 {
                    grad_w[k][j] += err * x[j];
                }
                grad_b[k] += err;
            }
        }
        for k in 0..num_classes {
            for j in 0..3 {
                model.weights[k][j] -= learning_rate * grad_w[k][j] / n;
            }
            model.biases[k] -= learning_rate * grad_b[k] / n;
        }
    }
    if model
        .weights
        .iter()
        .flatten()
        .chain(&model.biases)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("calibration diverged; lower the learning rate".into()));
    }
    Ok(model)
}
