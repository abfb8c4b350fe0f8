use std::path::Path;
use std::time::Duration;

use kaleido_core::backend::BackendDescriptor;
use kaleido_core::{Error, Result, SystemParams};
use serde::{Deserialize, Serialize};

pub const BACKEND_URL_ENV: &str = "KALEIDO_BACKEND_URL";

fn default_bind() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_concurrent() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub backend: BackendDescriptor,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default = "default_timeout_ms")]
    pub request_timeout_ms: u64,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    /// Allowed browser origins. `"*"` allows any; empty disables CORS headers.
    #[serde(default)]
    pub cors_origins: Vec<String>,
}

impl ServiceConfig {
    pub fn new(backend: BackendDescriptor) -> Self {
        ServiceConfig {
            bind: default_bind(),
            backend,
            params: SystemParams::default(),
            request_timeout_ms: default_timeout_ms(),
            max_concurrent: default_max_concurrent(),
            cors_origins: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ServiceConfig = serde_json::from_str(&text)?;
        // relative fixture paths are resolved against the config file
        if let (Some(fixture), Some(dir)) = (cfg.backend.fixture_path.as_mut(), path.parent()) {
            if fixture.is_relative() {
                *fixture = dir.join(&*fixture);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.backend.validate()?;
        if self.max_concurrent == 0 {
            return Err(Error::InvalidInput("max_concurrent must be positive".into()));
        }
        if self.request_timeout_ms == 0 {
            return Err(Error::InvalidInput("request_timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }

    /// Point the backend at `url` (normally from `KALEIDO_BACKEND_URL`), keeping client limits.
    pub fn override_backend_url(&mut self, url: &str) {
        let mut remote = BackendDescriptor::remote(url);
        remote.timeout_ms = self.backend.timeout_ms;
        remote.max_in_flight = self.backend.max_in_flight;
        self.backend = remote;
    }

    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            if !url.trim().is_empty() {
                self.override_backend_url(url.trim());
            }
        }
    }
}
