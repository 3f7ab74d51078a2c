//! Abstractive answer generation from the question and the extractive answer.
//!
//! The model runs behind [`GeneratorClient`]; without one, or when it fails,
//! the extractive answer is returned with `#` turned into `; `.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SPAN_SEPARATOR;
use crate::error::{Error, Result, TransportError};

const SEP: &str = "</s>";
const BOS: &str = "<s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputTemplate {
    /// `Question </s> Extractive answer </s>`
    #[default]
    Standard,
    /// `<s> Question </s></s> Extractive answer </s>`
    Sentinel,
}

impl FromStr for InputTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(InputTemplate::Standard),
            "sentinel" => Ok(InputTemplate::Sentinel),
            other => Err(Error::invalid(format!("unknown generator template `{other}`"))),
        }
    }
}

impl fmt::Display for InputTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputTemplate::Standard => "standard",
            InputTemplate::Sentinel => "sentinel",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorInput {
    pub question: String,
    pub extractive: String,
    pub formatted: String,
}

fn check_field(name: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        return Err(Error::invalid(format!("generator {name} is empty")));
    }
    if value.contains(SEP) || value.contains(BOS) {
        return Err(Error::invalid(format!(
            "generator {name} contains a reserved separator token"
        )));
    }
    Ok(())
}

pub fn format_generator_input(
    question: &str,
    extractive: &str,
    template: InputTemplate,
) -> Result<GeneratorInput> {
    check_field("question", question)?;
    check_field("extractive answer", extractive)?;
    let formatted = match template {
        InputTemplate::Standard => format!("{question} {SEP} {extractive} {SEP}"),
        InputTemplate::Sentinel => format!("{BOS} {question} {SEP}{SEP} {extractive} {SEP}"),
    };
    Ok(GeneratorInput {
        question: question.to_owned(),
        extractive: extractive.to_owned(),
        formatted,
    })
}

/// Like [`format_generator_input`] with the article context appended as a
/// third segment. Off by default in the pipeline.
pub fn format_generator_input_with_context(
    question: &str,
    extractive: &str,
    context: &str,
    template: InputTemplate,
) -> Result<GeneratorInput> {
    check_field("context", context)?;
    let mut input = format_generator_input(question, extractive, template)?;
    input.formatted = format!("{} {context} {SEP}", input.formatted);
    Ok(input)
}

pub trait GeneratorClient: Send + Sync {
    fn generate(&self, formatted: &str) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorSource {
    Remote,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorOutput {
    pub text: String,
    pub source: GeneratorSource,
    /// Why the remote path was not used, if it was attempted and failed.
    pub degradation: Option<String>,
}

pub fn fallback_text(extractive: &str) -> String {
    extractive.replace(SPAN_SEPARATOR, "; ")
}

pub fn generate_abstractive(
    input: &GeneratorInput,
    client: Option<&dyn GeneratorClient>,
) -> GeneratorOutput {
    let fallback = |degradation: Option<String>| GeneratorOutput {
        text: fallback_text(&input.extractive),
        source: GeneratorSource::Fallback,
        degradation,
    };
    let Some(client) = client else {
        return fallback(None);
    };
    match client.generate(&input.formatted) {
        Ok(text) if !text.trim().is_empty() => GeneratorOutput {
            text,
            source: GeneratorSource::Remote,
            degradation: None,
        },
        Ok(_) => fallback(Some("generator returned empty text".into())),
        Err(e) => fallback(Some(format!("generator: {e}"))),
    }
}

/// Offline stand-in that returns the extractive segment of its input
/// verbatim, so an extractive-equals-abstractive dataset scores perfectly.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoExtractiveGenerator;

impl GeneratorClient for EchoExtractiveGenerator {
    fn generate(&self, formatted: &str) -> Result<String, TransportError> {
        let body = formatted.strip_prefix(BOS).unwrap_or(formatted);
        let mut parts = body.split(SEP).map(str::trim).filter(|p| !p.is_empty());
        let _question = parts.next();
        parts
            .next()
            .map(str::to_owned)
            .ok_or_else(|| TransportError::Malformed("no extractive segment".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn templates() {
        let s = format_generator_input("Q?", "A", InputTemplate::Standard).unwrap();
        assert_eq!(s.formatted, "Q? </s> A </s>");
        let b = format_generator_input("Q?", "A", InputTemplate::Sentinel).unwrap();
        assert_eq!(b.formatted, "<s> Q? </s></s> A </s>");
        let c = format_generator_input_with_context("Q?", "A", "C", InputTemplate::Standard).unwrap();
        assert_eq!(c.formatted, "Q? </s> A </s> C </s>");
    }

    #[test]
    fn rejects_empty_and_reserved() {
        assert!(format_generator_input("Q?", "", InputTemplate::Standard).is_err());
        assert!(format_generator_input("", "A", InputTemplate::Standard).is_err());
        assert!(format_generator_input("Q </s>", "A", InputTemplate::Standard).is_err());
        assert!(format_generator_input("Q", "<s>A", InputTemplate::Sentinel).is_err());
    }

    struct Echo(&'static str);
    impl GeneratorClient for Echo {
        fn generate(&self, _: &str) -> Result<String, TransportError> {
            Ok(self.0.to_owned())
        }
    }

    struct TimesOut;
    impl GeneratorClient for TimesOut {
        fn generate(&self, _: &str) -> Result<String, TransportError> {
            Err(TransportError::Timeout)
        }
    }

    #[test]
    fn remote_and_fallback_paths() {
        let input = format_generator_input("Q?", "a#b", InputTemplate::Standard).unwrap();
        let out = generate_abstractive(&input, Some(&Echo("ANSWER")));
        assert_eq!((out.text.as_str(), out.source), ("ANSWER", GeneratorSource::Remote));

        let out = generate_abstractive(&input, None);
        assert_eq!((out.text.as_str(), out.source), ("a; b", GeneratorSource::Fallback));
        assert_eq!(out.degradation, None);

        let x = format_generator_input("Q?", "x", InputTemplate::Standard).unwrap();
        let out = generate_abstractive(&x, Some(&TimesOut));
        assert_eq!((out.text.as_str(), out.source), ("x", GeneratorSource::Fallback));
        assert!(out.degradation.unwrap().contains("timed out"));

        let out = generate_abstractive(&x, Some(&Echo("  ")));
        assert_eq!(out.source, GeneratorSource::Fallback);
    }

    #[test]
    fn echo_stub_extracts_segment() {
        for t in [InputTemplate::Standard, InputTemplate::Sentinel] {
            let input = format_generator_input("Học kỳ là gì?", "học kỳ chính#học kỳ hè", t).unwrap();
            assert_eq!(
                EchoExtractiveGenerator.generate(&input.formatted).unwrap(),
                "học kỳ chính#học kỳ hè"
            );
        }
    }

    proptest! {
        #[test]
        fn formatting_is_injective(q1 in "[a-z ?]{1,8}", e1 in "[a-z#]{1,8}", q2 in "[a-z ?]{1,8}", e2 in "[a-z#]{1,8}") {
            prop_assume!(!q1.trim().is_empty() && !q2.trim().is_empty());
            for t in [InputTemplate::Standard, InputTemplate::Sentinel] {
                let a = format_generator_input(&q1, &e1, t).unwrap();
                let b = format_generator_input(&q2, &e2, t).unwrap();
                prop_assert_eq!(a.formatted == b.formatted, (q1.as_str(), e1.as_str()) == (q2.as_str(), e2.as_str()));
            }
        }

        #[test]
        fn fallback_keeps_every_span(spans in proptest::collection::vec("[a-zà-ỹ ]{1,10}", 1..5)) {
            let extractive = spans.join("#");
            prop_assume!(!extractive.trim().is_empty());
            let input = format_generator_input("q", &extractive, InputTemplate::Standard).unwrap();
            let out = generate_abstractive(&input, None);
            for s in &spans {
                prop_assert!(out.text.contains(s.as_str()));
            }
        }
    }
}
