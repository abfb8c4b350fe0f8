//! Domain types shared across the crate.
//!
//! Valence vectors always use the class order (support, oppose, either).

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for every "sums to one" check.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueKind {
    Value,
    Right,
    Duty,
}

impl ValueKind {
    pub const ALL: [ValueKind; 3] = [ValueKind::Value, ValueKind::Right, ValueKind::Duty];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Value => "Value",
            ValueKind::Right => "Right",
            ValueKind::Duty => "Duty",
        }
    }

    /// Plural section heading used in raw corpus batches ("Values", ...).
    pub fn plural(self) -> &'static str {
        match self {
            ValueKind::Value => "Values",
            ValueKind::Right => "Rights",
            ValueKind::Duty => "Duties",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Value" => Ok(ValueKind::Value),
            "Right" => Ok(ValueKind::Right),
            "Duty" => Ok(ValueKind::Duty),
            other => Err(Error::Codec(format!("unknown kind {other:?}"))),
        }
    }
}

/// Textual valence label attached to a corpus entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValenceLabel {
    Supports,
    Opposes,
    Either,
}

impl ValenceLabel {
    pub const ALL: [ValenceLabel; 3] = [
        ValenceLabel::Supports,
        ValenceLabel::Opposes,
        ValenceLabel::Either,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValenceLabel::Supports => "Supports",
            ValenceLabel::Opposes => "Opposes",
            ValenceLabel::Either => "Either",
        }
    }

    /// Index of this label in the canonical (support, oppose, either) order.
    pub fn class_index(self) -> usize {
        match self {
            ValenceLabel::Supports => 0,
            ValenceLabel::Opposes => 1,
            ValenceLabel::Either => 2,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for ValenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value, right or duty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueEntry {
    pub kind: ValueKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence_label: Option<ValenceLabel>,
}

impl ValueEntry {
    pub fn new(kind: ValueKind, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("entry text is empty".into()));
        }
        Ok(ValueEntry {
            kind,
            text,
            explanation: None,
            valence_label: None,
        })
    }

    pub fn with_explanation(mut self, explanation: impl Into<String>) -> Self {
        self.explanation = Some(explanation.into());
        self
    }

    pub fn with_label(mut self, label: ValenceLabel) -> Self {
        self.valence_label = Some(label);
        self
    }

    /// The generation-target form, e.g. `Right: Right to life`.
    pub fn generation_target(&self) -> String {
        format!("{}: {}", self.kind, self.text)
    }
}

/// Probability over (support, oppose, either).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct ValenceDistribution {
    pub support: f64,
    pub oppose: f64,
    pub either: f64,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: f64,
    oppose: f64,
    either: f64,
}

impl TryFrom<RawDistribution> for ValenceDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        ValenceDistribution::new(raw.support, raw.oppose, raw.either)
    }
}

impl ValenceDistribution {
    pub fn new(support: f64, oppose: f64, either: f64) -> Result<Self> {
        let parts = [support, oppose, either];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::InvalidInput(format!(
                "valence components must lie in [0,1], got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "valence components must sum to 1, got {sum}"
            )));
        }
        Ok(ValenceDistribution {
            support,
            oppose,
            either,
        })
    }

    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        ValenceDistribution {
            support: third,
            oppose: third,
            either: third,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.support, self.oppose, self.either]
    }

    /// Most likely class; ties go to the earlier class in canonical order.
    pub fn argmax(&self) -> ValenceLabel {
        let values = self.as_array();
        let mut best = 0;
        for (i, v) in values.iter().enumerate().skip(1) {
            if *v > values[best] {
                best = i;
            }
        }
        ValenceLabel::ALL[best]
    }
}

/// Scale three non-negative masses so they sum to one.
pub fn normalize_distribution(raw: [f64; 3]) -> Result<ValenceDistribution> {
    if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "distribution masses must be finite and non-negative, got {raw:?}"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    Ok(ValenceDistribution {
        support: raw[0] / total,
        oppose: raw[1] / total,
        either: raw[2] / total,
    })
}

/// A generated entry with its relevance and valence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    #[serde(flatten)]
    pub entry: ValueEntry,
    pub relevance: f64,
    pub valence: ValenceDistribution,
    #[serde(default)]
    pub beam_score: f64,
}

impl ScoredCandidate {
    pub fn validate(&self) -> Result<()> {
        if self.entry.text.trim().is_empty() {
            return Err(Error::InvalidInput("candidate text is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.relevance) {
            return Err(Error::InvalidInput(format!(
                "candidate relevance {} outside [0,1]",
                self.relevance
            )));
        }
        Ok(())
    }
}

/// Per-kind thresholds. Serializes as an object keyed `Value`/`Right`/`Duty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KindThresholds {
    #[serde(rename = "Value")]
    pub value: f64,
    #[serde(rename = "Right")]
    pub right: f64,
    #[serde(rename = "Duty")]
    pub duty: f64,
}

impl KindThresholds {
    pub fn new(value: f64, right: f64, duty: f64) -> Self {
        KindThresholds { value, right, duty }
    }

    pub fn uniform(v: f64) -> Self {
        KindThresholds::new(v, v, v)
    }

    pub fn get(&self, kind: ValueKind) -> f64 {
        match kind {
            ValueKind::Value => self.value,
            ValueKind::Right => self.right,
            ValueKind::Duty => self.duty,
        }
    }

    pub fn set(&mut self, kind: ValueKind, v: f64) {
        match kind {
            ValueKind::Value => self.value = v,
            ValueKind::Right => self.right = v,
            ValueKind::Duty => self.duty = v,
        }
    }
}

#[derive(Deserialize)]
struct KindThresholdsObject {
    #[serde(rename = "Value")]
    value: f64,
    #[serde(rename = "Right")]
    right: f64,
    #[serde(rename = "Duty")]
    duty: f64,
}

impl From<KindThresholdsObject> for KindThresholds {
    fn from(o: KindThresholdsObject) -> Self {
        KindThresholds::new(o.value, o.right, o.duty)
    }
}

// Accepts either a JSON object or the Python-dict string form
// `"{'Value': 0.53, 'Right': 0.63, 'Duty': 0.55}"` found in exported configs.
impl<'de> Deserialize<'de> for KindThresholds {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Object(KindThresholdsObject),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Object(o) => Ok(o.into()),
            Repr::Text(s) => {
                let json = s.replace('\'', "\"");
                let o: KindThresholdsObject =
                    serde_json::from_str(&json).map_err(de::Error::custom)?;
                Ok(o.into())
            }
        }
    }
}

fn number_or_string<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }
    match Repr::deserialize(deserializer)? {
        Repr::Number(v) => Ok(v),
        Repr::Text(s) => s.trim().parse().map_err(de::Error::custom),
    }
}

/// Knobs of the generate-score-filter system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub relevance_threshold: KindThresholds,
    pub embed_threshold: KindThresholds,
    #[serde(deserialize_with = "number_or_string")]
    pub ngram_threshold: f64,
    #[serde(default = "default_beam_count")]
    pub beam_count: usize,
}

fn default_beam_count() -> usize {
    SystemParams::DEFAULT_BEAM_COUNT
}

impl SystemParams {
    pub const DEFAULT_BEAM_COUNT: usize = 100;

    /// The published tuned values for the 3B system.
    pub fn published() -> Self {
        SystemParams {
            relevance_threshold: KindThresholds::new(0.77, 0.82, 0.9),
            embed_threshold: KindThresholds::new(0.53, 0.63, 0.55),
            ngram_threshold: 0.05,
            beam_count: Self::DEFAULT_BEAM_COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_params(self)
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::published()
    }
}

fn check_unit(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid_params(field, format!("{v} is outside [0,1]")))
    }
}

/// Accepts `p` iff every threshold lies in [0,1] and `beam_count >= 1`.
/// Reports the first violated field.
pub fn validate_params(p: &SystemParams) -> Result<()> {
    for kind in ValueKind::ALL {
        check_unit(
            &format!("relevance_threshold.{kind}"),
            p.relevance_threshold.get(kind),
        )?;
    }
    for kind in ValueKind::ALL {
        check_unit(&format!("embed_threshold.{kind}"), p.embed_threshold.get(kind))?;
    }
    check_unit("ngram_threshold", p.ngram_threshold)?;
    if p.beam_count == 0 {
        return Err(Error::invalid_params("beam_count", "must be at least 1"));
    }
    Ok(())
}

/// Unnormalized per-class mass contributed by one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub index: usize,
    pub mass: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionResult {
    pub distribution: ValenceDistribution,
    pub entropy_nats: f64,
    pub contributions: Vec<Contribution>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_params_validate() {
        assert!(validate_params(&SystemParams::published()).is_ok());
    }

    #[test]
    fn out_of_range_ngram_rejected() {
        let mut p = SystemParams::published();
        p.ngram_threshold = 1.5;
        match validate_params(&p) {
            Err(Error::InvalidParams { field, .. }) => assert_eq!(field, "ngram_threshold"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_beams_rejected() {
        let mut p = SystemParams::published();
        p.beam_count = 0;
        match validate_params(&p) {
            Err(Error::InvalidParams { field, .. }) => assert_eq!(field, "beam_count"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn first_violation_reported() {
        let mut p = SystemParams::published();
        p.embed_threshold.right = -0.1;
        p.beam_count = 0;
        match validate_params(&p) {
            Err(Error::InvalidParams { field, .. }) => assert_eq!(field, "embed_threshold.Right"),
            other => panic!("unexpected {other:?}"),
        }
        p.relevance_threshold.duty = f64::NAN;
        match validate_params(&p) {
            Err(Error::InvalidParams { field, .. }) => {
                assert_eq!(field, "relevance_threshold.Duty")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_examples() {
        let d = normalize_distribution([1.0, 1.0, 1.0]).unwrap();
        for v in d.as_array() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let d = normalize_distribution([2.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.as_array(), [1.0, 0.0, 0.0]);
        // 0.82 / 1.40, 0.44 / 1.40, 0.14 / 1.40
        let d = normalize_distribution([0.82, 0.44, 0.14]).unwrap();
        assert!((d.support - 0.585_714_285_714_285_7).abs() < 1e-12);
        assert!((d.oppose - 0.314_285_714_285_714_3).abs() < 1e-12);
        assert!((d.either - 0.1).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_all_zero() {
        assert!(matches!(
            normalize_distribution([0.0, 0.0, 0.0]),
            Err(Error::DegenerateDistribution)
        ));
        assert!(normalize_distribution([-1.0, 2.0, 0.0]).is_err());
    }

    #[test]
    fn params_json_round_trip_is_exact() {
        let p = SystemParams::published();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"relevance_threshold":{"Value":0.77,"Right":0.82,"Duty":0.9},"embed_threshold":{"Value":0.53,"Right":0.63,"Duty":0.55},"ngram_threshold":0.05,"beam_count":100}"#
        );
        let back: SystemParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn params_accept_exported_string_form() {
        let raw = r#"{
            "embed_threshold": "{'Value': 0.53, 'Right': 0.63, 'Duty': 0.55}",
            "ngram_threshold": "0.05",
            "relevance_threshold": "{'Value': 0.77, 'Right': 0.82, 'Duty': 0.9}"
        }"#;
        let p: SystemParams = serde_json::from_str(raw).unwrap();
        assert_eq!(p, SystemParams::published());
    }

    #[test]
    fn params_missing_kind_rejected() {
        let raw = r#"{"relevance_threshold":{"Value":0.7,"Right":0.8},
            "embed_threshold":{"Value":0.5,"Right":0.6,"Duty":0.5},
            "ngram_threshold":0.05,"beam_count":10}"#;
        assert!(serde_json::from_str::<SystemParams>(raw).is_err());
    }

    #[test]
    fn distribution_deserialization_validates() {
        let ok: ValenceDistribution =
            serde_json::from_str(r#"{"support":0.5,"oppose":0.5,"either":0.0}"#).unwrap();
        assert_eq!(ok.argmax(), ValenceLabel::Supports);
        assert!(
            serde_json::from_str::<ValenceDistribution>(r#"{"support":0.5,"oppose":0.6,"either":0.0}"#)
                .is_err()
        );
    }

    #[test]
    fn candidate_serializes_flat() {
        let c = ScoredCandidate {
            entry: ValueEntry::new(ValueKind::Value, "Safety").unwrap(),
            relevance: 0.9,
            valence: ValenceDistribution::new(0.8, 0.1, 0.1).unwrap(),
            beam_score: -0.5,
        };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"Value","text":"Safety","relevance":0.9,"valence":{"support":0.8,"oppose":0.1,"either":0.1},"beam_score":-0.5}"#
        );
        let back: ScoredCandidate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_entry_text_rejected() {
        assert!(ValueEntry::new(ValueKind::Duty, "   ").is_err());
    }
}
