//! Blocking HTTP clients for the embedder, labeler and generator endpoints.

use std::time::Duration;

use regqa_core::dense::QueryEmbedder;
use regqa_core::generator::GeneratorClient;
use regqa_core::reader::{LabelProbs, LabelRequest, Labeler};
use regqa_core::wire::{
    parse_embed_response, parse_generate_response, parse_label_response, EmbedRequest,
    GenerateRequest, LabelRequestBody,
};
use regqa_core::TransportError;
use serde::Serialize;
use ureq::Agent;

#[derive(Debug, Clone)]
struct Endpoint {
    agent: Agent,
    url: String,
}

impl Endpoint {
    fn new(base: &str, path: &str, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Endpoint {
            agent,
            url: format!("{}{path}", base.trim_end_matches('/')),
        }
    }

    fn post<T: Serialize>(&self, body: &T) -> Result<Vec<u8>, TransportError> {
        let payload = serde_json::to_vec(body).expect("request bodies serialize");
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(&payload[..])
            .map_err(|e| map_error(&self.url, e))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Unavailable(format!("{}: HTTP {status}", self.url)));
        }
        resp.body_mut()
            .read_to_vec()
            .map_err(|e| map_error(&self.url, e))
    }
}

fn map_error(url: &str, e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Unavailable(format!("{url}: {other}")),
    }
}

/// `POST {base}/embed`
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: Endpoint,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(base: &str, dim: usize, timeout: Duration) -> Self {
        HttpEmbedder {
            endpoint: Endpoint::new(base, "/embed", timeout),
            dim,
        }
    }
}

impl QueryEmbedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError> {
        let body = self.endpoint.post(&EmbedRequest { text: text.to_owned() })?;
        parse_embed_response(&body, self.dim)
    }
}

/// `POST {base}/label`
#[derive(Debug, Clone)]
pub struct HttpLabeler {
    endpoint: Endpoint,
}

impl HttpLabeler {
    pub fn new(base: &str, timeout: Duration) -> Self {
        HttpLabeler {
            endpoint: Endpoint::new(base, "/label", timeout),
        }
    }
}

impl Labeler for HttpLabeler {
    fn label(&self, req: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError> {
        let body = self.endpoint.post(&LabelRequestBody {
            question_tokens: req.question_tokens.to_vec(),
            context_tokens: req.context_tokens.to_vec(),
        })?;
        parse_label_response(&body, req.context_tokens.len())
    }
}

/// `POST {base}/generate`
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: Endpoint,
}

impl HttpGenerator {
    pub fn new(base: &str, timeout: Duration) -> Self {
        HttpGenerator {
            endpoint: Endpoint::new(base, "/generate", timeout),
        }
    }
}

impl GeneratorClient for HttpGenerator {
    fn generate(&self, formatted: &str) -> Result<String, TransportError> {
        let body = self.endpoint.post(&GenerateRequest {
            input: formatted.to_owned(),
        })?;
        parse_generate_response(&body)
    }
}
