use std::path::{Path, PathBuf};

use kaleido_core::backend::BackendDescriptor;
use kaleido_core::SystemParams;
use kaleido_service::{ServiceConfig, BACKEND_URL_ENV};
use serde::Deserialize;

use crate::fail::{Failure, Outcome};

/// The service config without the bind address. Unknown keys are ignored so a
/// service config file can be shared with the CLI.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct CliConfig {
    #[serde(default)]
    pub backend: Option<BackendDescriptor>,
    #[serde(default)]
    pub params: Option<SystemParams>,
}

/// Command-line overrides that apply to every subcommand.
#[derive(Debug, Clone, Default)]
pub struct BackendFlags {
    pub config: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
    pub backend_url: Option<String>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn resolve_fixture(desc: &mut BackendDescriptor, base: &Path) {
    if let (Some(p), Some(dir)) = (desc.fixture_path.as_mut(), base.parent()) {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    }
}

impl CliConfig {
    /// Defaults, then the config file, then the environment, then flags.
    pub fn resolve(flags: &BackendFlags) -> Outcome<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let mut cfg: CliConfig = read_json(path)?;
                if let Some(b) = cfg.backend.as_mut() {
                    resolve_fixture(b, path);
                }
                cfg
            }
            None => CliConfig::default(),
        };
        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            if !url.trim().is_empty() {
                cfg.backend = Some(remote_like(cfg.backend.as_ref(), url.trim()));
            }
        }
        if let Some(url) = &flags.backend_url {
            cfg.backend = Some(remote_like(cfg.backend.as_ref(), url));
        }
        if let Some(path) = &flags.fixture {
            cfg.backend = Some(BackendDescriptor::fixture(path));
        }
        Ok(cfg)
    }

    pub fn backend(&self) -> Outcome<BackendDescriptor> {
        self.backend.clone().ok_or_else(|| {
            Failure::usage(format!(
                "no backend configured; pass --fixture, --backend-url, --config or set {BACKEND_URL_ENV}"
            ))
        })
    }

    pub fn params(&self) -> SystemParams {
        self.params.unwrap_or_default()
    }
}

fn remote_like(previous: Option<&BackendDescriptor>, url: &str) -> BackendDescriptor {
    let mut d = BackendDescriptor::remote(url);
    if let Some(p) = previous {
        d.timeout_ms = p.timeout_ms;
        d.max_in_flight = p.max_in_flight;
    }
    d
}

/// `serve` reads a full service config; backend flags still win.
pub fn service_config(flags: &BackendFlags, bind: Option<String>) -> Outcome<ServiceConfig> {
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| Failure::usage("serve needs --config"))?;
    let mut cfg = ServiceConfig::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    cfg.apply_env();
    if let Some(url) = &flags.backend_url {
        cfg.override_backend_url(url);
    }
    if let Some(p) = &flags.fixture {
        cfg.backend = BackendDescriptor::fixture(p);
    }
    if let Some(b) = bind {
        cfg.bind = b;
    }
    cfg.validate().map_err(Failure::usage)?;
    Ok(cfg)
}
