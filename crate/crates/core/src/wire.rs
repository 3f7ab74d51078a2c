//! JSON bodies exchanged with the model endpoints and the HTTP API.
//!
//! Model endpoints (all `POST`):
//!
//! | path        | request                                         | response               |
//! |-------------|-------------------------------------------------|------------------------|
//! | `/embed`    | `{"text": str}`                                 | `{"vector": [f64]}`    |
//! | `/label`    | `{"question_tokens": [str], "context_tokens": [str]}` | `{"probs": [[B, I, O]]}` |
//! | `/generate` | `{"input": str}`                                | `{"text": str}`        |
//!
//! The parsers here turn bad bodies into [`TransportError::Malformed`].

use serde::{Deserialize, Serialize};

use crate::error::TransportError;
use crate::fusion::FusionMode;
use crate::reader::bio::validate_probs;
use crate::reader::LabelProbs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequestBody {
    pub question_tokens: Vec<String>,
    pub context_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub probs: Vec<LabelProbs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

/// Body of `POST /ask`. Absent fields fall back to the service configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionMode>,
}

/// Body of `POST /retrieve`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveRequest {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

fn malformed(what: &str, e: impl std::fmt::Display) -> TransportError {
    TransportError::Malformed(format!("{what}: {e}"))
}

/// Parses a `/label` body and checks one valid row per context token.
pub fn parse_label_response(
    body: &[u8],
    expected_rows: usize,
) -> Result<Vec<LabelProbs>, TransportError> {
    let resp: LabelResponse = serde_json::from_slice(body).map_err(|e| malformed("label", e))?;
    if resp.probs.len() != expected_rows {
        return Err(malformed(
            "label",
            format!("expected {expected_rows} rows, got {}", resp.probs.len()),
        ));
    }
    validate_probs(&resp.probs).map_err(|e| malformed("label", e))?;
    Ok(resp.probs)
}

/// Parses an `/embed` body and checks the dimension and finiteness.
pub fn parse_embed_response(body: &[u8], dim: usize) -> Result<Vec<f64>, TransportError> {
    let resp: EmbedResponse = serde_json::from_slice(body).map_err(|e| malformed("embed", e))?;
    if resp.vector.len() != dim {
        return Err(malformed(
            "embed",
            format!("expected dimension {dim}, got {}", resp.vector.len()),
        ));
    }
    if resp.vector.iter().any(|x| !x.is_finite()) {
        return Err(malformed("embed", "non-finite component"));
    }
    Ok(resp.vector)
}

/// Parses a `/generate` body. Empty text is passed through; the caller
/// decides whether that counts as a failure.
pub fn parse_generate_response(body: &[u8]) -> Result<String, TransportError> {
    let resp: GenerateResponse =
        serde_json::from_slice(body).map_err(|e| malformed("generate", e))?;
    Ok(resp.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_response_checks() {
        let ok = br#"{"probs": [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1]]}"#;
        assert_eq!(parse_label_response(ok, 2).unwrap().len(), 2);
        assert!(parse_label_response(ok, 3).is_err());
        for bad in [
            &br#"{"probs": [[0.8, 0.1]]}"#[..],
            br#"{"probs": [[0.8, 0.8, 0.8]]}"#,
            br#"{"probs": [[-0.1, 0.6, 0.5]]}"#,
            br#"{"prob": []}"#,
            b"not json",
        ] {
            assert!(
                matches!(parse_label_response(bad, 1), Err(TransportError::Malformed(_))),
                "{}",
                String::from_utf8_lossy(bad)
            );
        }
    }

    #[test]
    fn embed_response_checks() {
        assert_eq!(parse_embed_response(br#"{"vector":[1,0.5]}"#, 2).unwrap(), vec![1.0, 0.5]);
        assert!(parse_embed_response(br#"{"vector":[1]}"#, 2).is_err());
        assert!(parse_embed_response(br#"{"vector":"x"}"#, 1).is_err());
    }

    #[test]
    fn generate_response() {
        assert_eq!(parse_generate_response(br#"{"text":"ok"}"#).unwrap(), "ok");
        assert!(parse_generate_response(br#"{"txt":"ok"}"#).is_err());
    }

    #[test]
    fn ask_request_shape() {
        let req: AskRequest =
            serde_json::from_str(r#"{"question":"q","top_k":5,"fusion":"multiplication"}"#).unwrap();
        assert_eq!(req.top_k, Some(5));
        assert_eq!(req.fusion, Some(FusionMode::Multiplication));
        assert_eq!(req.alpha, None);
        assert!(serde_json::from_str::<AskRequest>(r#"{"question":"q","k":5}"#).is_err());
        assert_eq!(
            serde_json::to_string(&AskRequest { question: "q".into(), ..Default::default() }).unwrap(),
            r#"{"question":"q"}"#
        );
    }
}
