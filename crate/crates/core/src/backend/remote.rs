use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{check_labels, check_vectors, renormalize, sort_and_truncate, Backend, BackendMode, GenerationCandidate};
use crate::error::{BackendError, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub num_return: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub candidates: Vec<GenerationCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub prompt: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

/// Counting semaphore bounding concurrent HTTP requests.
#[derive(Debug)]
struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Blocking client for the backend wire protocol.
#[derive(Debug)]
pub struct RemoteBackend {
    base_url: String,
    timeout: Duration,
    // built on first use so construction is safe inside an async runtime
    client: OnceLock<Client>,
    in_flight: InFlight,
}

impl RemoteBackend {
    pub fn new(base_url: &str, timeout: Duration, max_in_flight: usize) -> Result<Self> {
        if max_in_flight == 0 {
            return Err(Error::InvalidInput("max_in_flight must be positive".into()));
        }
        let parsed = reqwest::Url::parse(base_url)
            .map_err(|e| Error::InvalidInput(format!("bad base_url {base_url:?}: {e}")))?;
        if parsed.host_str().is_none() {
            return Err(Error::InvalidInput(format!("base_url {base_url:?} has no host")));
        }
        Ok(RemoteBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            timeout,
            client: OnceLock::new(),
            in_flight: InFlight {
                count: Mutex::new(0),
                freed: Condvar::new(),
                limit: max_in_flight,
            },
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn client(&self) -> Result<&Client, BackendError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, BackendError> {
        let client = self.client()?;
        let _permit = self.in_flight.acquire();
        let url = format!("{}{}", self.base_url, path);
        let resp = client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        if !status.is_success() {
            return Err(BackendError::Transport(format!(
                "{url}: HTTP {status}: {}",
                String::from_utf8_lossy(&bytes)
            )));
        }
        serde_json::from_slice(&bytes).map_err(|e| BackendError::Protocol(format!("{url}: {e}")))
    }
}

impl Backend for RemoteBackend {
    fn generate(&self, prompt: &str, n: usize) -> Result<Vec<GenerationCandidate>, BackendError> {
        if n == 0 {
            return Err(BackendError::Precondition("n must be at least 1".into()));
        }
        let resp: GenerateResponse = self.post(
            "/v1/backend/generate",
            &GenerateRequest {
                prompt: prompt.to_string(),
                num_return: n,
            },
        )?;
        if resp.candidates.iter().any(|c| c.text.is_empty()) {
            return Err(BackendError::Protocol("empty candidate text".into()));
        }
        Ok(sort_and_truncate(resp.candidates, n))
    }

    fn classify(&self, prompt: &str, labels: &[&str]) -> Result<Vec<f64>, BackendError> {
        check_labels(labels)?;
        let resp: ClassifyResponse = self.post(
            "/v1/backend/classify",
            &ClassifyRequest {
                prompt: prompt.to_string(),
                labels: labels.iter().map(|l| l.to_string()).collect(),
            },
        )?;
        if resp.probs.len() != labels.len() {
            return Err(BackendError::Protocol(format!(
                "expected {} probabilities, got {}",
                labels.len(),
                resp.probs.len()
            )));
        }
        renormalize(resp.probs)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::Precondition("texts must be non-empty".into()));
        }
        let resp: EmbedResponse = self.post(
            "/v1/backend/embed",
            &EmbedRequest {
                texts: texts.to_vec(),
            },
        )?;
        check_vectors(texts.len(), &resp.vectors)?;
        Ok(resp.vectors)
    }

    fn mode(&self) -> BackendMode {
        BackendMode::Remote
    }

    /// Reachability check: a TCP connect to the server's host and port.
    fn health(&self) -> Result<(), BackendError> {
        let url = reqwest::Url::parse(&self.base_url).map_err(|e| BackendError::Transport(e.to_string()))?;
        let host = url
            .host_str()
            .ok_or_else(|| BackendError::Transport("base_url has no host".into()))?;
        let port = url
            .port_or_known_default()
            .ok_or_else(|| BackendError::Transport("base_url has no port".into()))?;
        let addrs = (host, port)
            .to_socket_addrs()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let timeout = self.timeout.min(Duration::from_secs(2));
        let mut last = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(_) => return Ok(()),
                Err(e) => last = Some(e),
            }
        }
        Err(BackendError::Transport(format!(
            "{}: unreachable ({})",
            self.base_url,
            last.map_or_else(|| "no address".to_string(), |e| e.to_string())
        )))
    }
}
