//! Model backend contract: generate, classify, embed.
//!
//! Two implementations ship with the crate. [`FixtureBackend`] answers from a
//! JSON file keyed by exact prompt text and is used by every test.
//! [`RemoteBackend`] speaks the JSON-over-HTTP protocol:
//!
//! ```text
//! POST {base}/v1/backend/generate  {"prompt", "num_return"} -> {"candidates":[{"text","score"}]}
//! POST {base}/v1/backend/classify  {"prompt", "labels"}     -> {"probs":[f64]}
//! POST {base}/v1/backend/embed     {"texts"}                -> {"vectors":[[f64]]}
//! ```

mod fixture;
mod remote;

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use crate::error::BackendError;
use crate::error::{Error, Result};
pub use fixture::{FixtureBackend, FixtureData};
pub use remote::{ClassifyRequest, ClassifyResponse, EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse, RemoteBackend};

/// One beam returned by `generate`. Higher score is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationCandidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Fixture,
    Remote,
}

impl BackendMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendMode::Fixture => "fixture",
            BackendMode::Remote => "remote",
        }
    }
}

pub trait Backend: Send + Sync {
    /// Up to `n` candidates, best first.
    fn generate(&self, prompt: &str, n: usize) -> Result<Vec<GenerationCandidate>, BackendError>;

    /// Probabilities aligned with `labels`, normalized over that label set.
    fn classify(&self, prompt: &str, labels: &[&str]) -> Result<Vec<f64>, BackendError>;

    /// One vector per text, all of the same dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;

    fn mode(&self) -> BackendMode;

    fn health(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn generate(&self, prompt: &str, n: usize) -> Result<Vec<GenerationCandidate>, BackendError> {
        (**self).generate(prompt, n)
    }
    fn classify(&self, prompt: &str, labels: &[&str]) -> Result<Vec<f64>, BackendError> {
        (**self).classify(prompt, labels)
    }
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        (**self).embed(texts)
    }
    fn mode(&self) -> BackendMode {
        (**self).mode()
    }
    fn health(&self) -> Result<(), BackendError> {
        (**self).health()
    }
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_in_flight() -> usize {
    8
}

/// Where model answers come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub mode: BackendMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl BackendDescriptor {
    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        BackendDescriptor {
            mode: BackendMode::Fixture,
            fixture_path: Some(path.into()),
            base_url: None,
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn remote(base_url: impl Into<String>) -> Self {
        BackendDescriptor {
            mode: BackendMode::Remote,
            fixture_path: None,
            base_url: Some(base_url.into()),
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.mode, &self.fixture_path, &self.base_url) {
            (BackendMode::Fixture, Some(_), None) | (BackendMode::Remote, None, Some(_)) => {}
            (mode, _, _) => {
                return Err(Error::InvalidInput(format!(
                    "{} backend needs exactly {}",
                    mode.as_str(),
                    match mode {
                        BackendMode::Fixture => "fixture_path",
                        BackendMode::Remote => "base_url",
                    }
                )))
            }
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidInput("max_in_flight must be positive".into()));
        }
        Ok(())
    }

    pub fn connect(&self) -> Result<Arc<dyn Backend>> {
        self.validate()?;
        match self.mode {
            BackendMode::Fixture => {
                let path = self.fixture_path.as_ref().expect("validated");
                Ok(Arc::new(FixtureBackend::load(path)?))
            }
            BackendMode::Remote => {
                let url = self.base_url.as_ref().expect("validated");
                Ok(Arc::new(RemoteBackend::new(
                    url,
                    std::time::Duration::from_millis(self.timeout_ms),
                    self.max_in_flight,
                )?))
            }
        }
    }
}

pub(crate) fn check_labels(labels: &[&str]) -> Result<(), BackendError> {
    if labels.is_empty() {
        return Err(BackendError::Precondition("labels must be non-empty".into()));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(*l) {
            return Err(BackendError::Precondition(format!("duplicate label {l:?}")));
        }
    }
    Ok(())
}

/// Renormalize raw label masses over the requested label set.
pub(crate) fn renormalize(raw: Vec<f64>) -> Result<Vec<f64>, BackendError> {
    if raw.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(BackendError::Protocol(format!("invalid probabilities {raw:?}")));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(BackendError::Protocol("zero probability mass over labels".into()));
    }
    Ok(raw.into_iter().map(|p| p / total).collect())
}

pub(crate) fn check_vectors(texts: usize, vectors: &[Vec<f64>]) -> Result<(), BackendError> {
    if vectors.len() != texts {
        return Err(BackendError::Protocol(format!(
            "expected {texts} vectors, got {}",
            vectors.len()
        )));
    }
    let dim = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(BackendError::Protocol("embedding dimension mismatch".into()));
    }
    if texts > 0 && dim == 0 {
        return Err(BackendError::Protocol("zero-dimensional embedding".into()));
    }
    if vectors
        .iter()
        .any(|v| v.iter().any(|x| !x.is_finite()) || v.iter().all(|x| *x == 0.0))
    {
        return Err(BackendError::Protocol("embedding is zero or non-finite".into()));
    }
    Ok(())
}

pub(crate) fn sort_and_truncate(mut candidates: Vec<GenerationCandidate>, n: usize) -> Vec<GenerationCandidate> {
    // stable: equal scores keep backend order
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    candidates.truncate(n);
    candidates
}
