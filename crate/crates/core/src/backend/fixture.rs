use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_labels, check_vectors, renormalize, sort_and_truncate, Backend, BackendMode, GenerationCandidate};
use crate::error::{BackendError, Result};

/// Contents of a fixture file. Every map is keyed by the exact prompt or text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureData {
    #[serde(default)]
    pub generate: BTreeMap<String, Vec<GenerationCandidate>>,
    /// Raw per-label masses; labels absent from a prompt's map have mass 0.
    #[serde(default)]
    pub classify: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub embed: BTreeMap<String, Vec<f64>>,
}

impl FixtureData {
    pub fn add_generation(&mut self, prompt: impl Into<String>, beams: Vec<GenerationCandidate>) -> &mut Self {
        self.generate.insert(prompt.into(), beams);
        self
    }

    pub fn add_classification<L: Into<String>>(
        &mut self,
        prompt: impl Into<String>,
        masses: impl IntoIterator<Item = (L, f64)>,
    ) -> &mut Self {
        self.classify.insert(
            prompt.into(),
            masses.into_iter().map(|(l, p)| (l.into(), p)).collect(),
        );
        self
    }

    pub fn add_embedding(&mut self, text: impl Into<String>, vector: Vec<f64>) -> &mut Self {
        self.embed.insert(text.into(), vector);
        self
    }
}

/// Deterministic backend answering from [`FixtureData`]. Unknown prompts are errors.
#[derive(Debug, Clone, Default)]
pub struct FixtureBackend {
    data: FixtureData,
}

impl FixtureBackend {
    pub fn new(data: FixtureData) -> Self {
        FixtureBackend { data }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        let data: FixtureData = serde_json::from_slice(&bytes)?;
        Ok(FixtureBackend { data })
    }

    pub fn data(&self) -> &FixtureData {
        &self.data
    }
}

impl Backend for FixtureBackend {
    fn generate(&self, prompt: &str, n: usize) -> Result<Vec<GenerationCandidate>, BackendError> {
        if n == 0 {
            return Err(BackendError::Precondition("n must be at least 1".into()));
        }
        let beams = self
            .data
            .generate
            .get(prompt)
            .ok_or_else(|| BackendError::FixtureMiss(prompt.to_string()))?;
        Ok(sort_and_truncate(beams.clone(), n))
    }

    fn classify(&self, prompt: &str, labels: &[&str]) -> Result<Vec<f64>, BackendError> {
        check_labels(labels)?;
        let masses = self
            .data
            .classify
            .get(prompt)
            .ok_or_else(|| BackendError::FixtureMiss(prompt.to_string()))?;
        let raw = labels
            .iter()
            .map(|l| masses.get(*l).copied().unwrap_or(0.0))
            .collect();
        renormalize(raw)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::Precondition("texts must be non-empty".into()));
        }
        let vectors = texts
            .iter()
            .map(|t| {
                self.data
                    .embed
                    .get(t)
                    .cloned()
                    .ok_or_else(|| BackendError::FixtureMiss(t.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        check_vectors(texts.len(), &vectors)?;
        Ok(vectors)
    }

    fn mode(&self) -> BackendMode {
        BackendMode::Fixture
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beams() -> Vec<GenerationCandidate> {
        [-0.1, -0.2, -0.3, -0.4, -0.5, -0.6]
            .iter()
            .enumerate()
            .map(|(i, s)| GenerationCandidate {
                text: format!("Value: V{i}"),
                score: *s,
            })
            .collect()
    }

    fn backend() -> FixtureBackend {
        let mut data = FixtureData::default();
        data.add_generation("[Generate]:\tAction: X", beams())
            .add_classification("rel", [("Yes", 0.6), ("No", 0.2)])
            .add_classification("val", [("Supports", 0.8), ("Opposes", 0.1), ("Either", 0.1)])
            .add_embedding("Safety", vec![1.0, 0.0])
            .add_embedding("Harmony", vec![0.0, 1.0])
            .add_embedding("Odd", vec![1.0, 0.0, 0.0]);
        FixtureBackend::new(data)
    }

    #[test]
    fn generate_echoes_fixture_order() {
        let b = backend();
        let out = b.generate("[Generate]:\tAction: X", 6).unwrap();
        assert_eq!(out, beams());
    }

    #[test]
    fn generate_truncates_to_top_scores() {
        let mut data = FixtureData::default();
        let mut shuffled = beams();
        shuffled.reverse();
        data.add_generation("p", shuffled);
        let out = FixtureBackend::new(data).generate("p", 3).unwrap();
        assert_eq!(out, beams()[..3].to_vec());
    }

    #[test]
    fn generate_unknown_prompt_is_error() {
        assert!(matches!(
            backend().generate("other", 3),
            Err(BackendError::FixtureMiss(_))
        ));
        assert!(matches!(
            backend().generate("[Generate]:\tAction: X", 0),
            Err(BackendError::Precondition(_))
        ));
    }

    #[test]
    fn classify_renormalizes() {
        let p = backend().classify("rel", &["Yes", "No"]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        let p = backend()
            .classify("val", &["Supports", "Opposes", "Either"])
            .unwrap();
        assert!((p[0] - 0.8).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_is_permutation_equivariant() {
        let b = backend();
        let fwd = b.classify("val", &["Supports", "Opposes", "Either"]).unwrap();
        let rev = b.classify("val", &["Either", "Opposes", "Supports"]).unwrap();
        assert_eq!(fwd[0], rev[2]);
        assert_eq!(fwd[1], rev[1]);
        assert_eq!(fwd[2], rev[0]);
    }

    #[test]
    fn classify_rejects_empty_labels() {
        assert!(matches!(
            backend().classify("rel", &[]),
            Err(BackendError::Precondition(_))
        ));
    }

    #[test]
    fn embed_shapes() {
        let b = backend();
        assert_eq!(b.embed(&["Safety".into()]).unwrap(), vec![vec![1.0, 0.0]]);
        let two = b.embed(&["Safety".into(), "Harmony".into()]).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].len(), two[1].len());
        assert!(matches!(
            b.embed(&["Safety".into(), "Odd".into()]),
            Err(BackendError::Protocol(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.json");
        std::fs::write(&path, serde_json::to_vec(backend().data()).unwrap()).unwrap();
        let loaded = FixtureBackend::load(&path).unwrap();
        assert_eq!(loaded.data(), backend().data());
    }
}
