//! Pipeline configuration file.
//!
//! Line-oriented `key = value` pairs under `[section]` headers. Lines starting
//! with `#` or `;` are comments. Every key can be overridden by an environment
//! variable named `REGQA_<SECTION>_<KEY>` in upper case, e.g.
//! `REGQA_RETRIEVAL_TOP_K=5`. Relative paths resolve against the directory of
//! the config file.
//!
//! ```text
//! [corpus]
//! path = corpus.jsonl
//! qa = qa.jsonl
//! segmenter = whitespace          # or: dictionary
//! dictionary = compounds.txt      # one compound per line
//!
//! [index]
//! dir = build
//!
//! [embedder]
//! mode = hashing                  # hashing | file | remote
//! dim = 256
//! path = question_vectors.jsonl   # file mode
//! endpoint = http://127.0.0.1:9001
//! article_vectors = embeddings.jsonl
//! timeout_ms = 10000
//!
//! [retrieval]
//! fusion = weight                 # weight | multiplication | lexical | dense
//! alpha = 0.1
//! method = bm25                   # bm25 | tfidf
//! k1 = 1.2
//! b = 0.75
//! top_k = 10
//! normalize_lexical = false
//!
//! [reader]
//! labeler = overlap               # overlap | outside | remote
//! endpoint = http://127.0.0.1:9002
//! max_seq_length = 512
//! stride = 128
//! special_overhead = 4
//! lambda = 0.3
//! max_in_flight = 4
//! timeout_ms = 10000
//!
//! [generator]
//! mode = fallback                 # fallback | remote
//! endpoint = http://127.0.0.1:9003
//! template = standard             # standard | sentinel
//! include_context = false
//! timeout_ms = 10000
//!
//! [service]
//! bind = 127.0.0.1:8080
//!
//! [eval]
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionMode};
use crate::generator::InputTemplate;
use crate::lexical::{Bm25Params, LexicalScorer};
use crate::reader::ReaderParams;

const ENV_PREFIX: &str = "REGQA_";

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("corpus", &["path", "qa", "segmenter", "dictionary"]),
    ("index", &["dir"]),
    (
        "embedder",
        &["mode", "dim", "path", "endpoint", "article_vectors", "timeout_ms"],
    ),
    (
        "retrieval",
        &["fusion", "alpha", "method", "k1", "b", "top_k", "normalize_lexical"],
    ),
    (
        "reader",
        &[
            "labeler",
            "endpoint",
            "max_seq_length",
            "stride",
            "special_overhead",
            "lambda",
            "max_in_flight",
            "timeout_ms",
        ],
    ),
    (
        "generator",
        &["mode", "endpoint", "template", "include_context", "timeout_ms"],
    ),
    ("service", &["bind"]),
    ("eval", &["seed"]),
];

/// Untyped `section.key -> value` map, with source line numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<(String, String), (String, usize)>,
}

impl RawConfig {
    pub fn parse(input: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?
                    .trim();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::parse(line_no, format!("unknown section `{name}`")));
                }
                section = Some(name.to_owned());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let sec = section
                .as_deref()
                .ok_or_else(|| Error::parse(line_no, "key outside of any section"))?;
            if !is_known(sec, key) {
                return Err(Error::parse(line_no, format!("unknown key `{sec}.{key}`")));
            }
            let value = strip_comment(value).trim().to_owned();
            values.insert((sec.to_owned(), key.to_owned()), (value, line_no));
        }
        Ok(RawConfig { values })
    }

    /// Applies `REGQA_<SECTION>_<KEY>` overrides from the given variables.
    pub fn apply_env<I, K, V>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        for (name, value) in vars {
            let Some(rest) = name.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let rest = rest.to_ascii_lowercase();
            for (sec, keys) in KNOWN_KEYS {
                let Some(key) = rest.strip_prefix(sec).and_then(|r| r.strip_prefix('_')) else {
                    continue;
                };
                if keys.contains(&key) {
                    self.values
                        .insert((sec.to_string(), key.to_owned()), (value.into(), 0));
                    break;
                }
            }
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_owned(), key.to_owned()))
            .map(|(v, _)| v.as_str())
            .filter(|v| !v.is_empty())
    }

    fn typed<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((raw, line)) = self.values.get(&(section.to_owned(), key.to_owned())) else {
            return Ok(None);
        };
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse::<T>().map(Some).map_err(|e| {
            let msg = format!("{section}.{key} = `{raw}`: {e}");
            if *line == 0 {
                Error::invalid(format!("environment override {msg}"))
            } else {
                Error::parse(*line, msg)
            }
        })
    }
}

fn is_known(section: &str, key: &str) -> bool {
    KNOWN_KEYS
        .iter()
        .any(|(s, keys)| *s == section && keys.contains(&key))
}

fn strip_comment(value: &str) -> &str {
    match value.find(" #") {
        Some(pos) => &value[..pos],
        None => value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedderMode {
    #[default]
    Hashing,
    File,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelerMode {
    #[default]
    Overlap,
    Outside,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorMode {
    #[default]
    Fallback,
    Remote,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, { $($word:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($word => Ok($variant),)+
                    other => Err(Error::invalid(format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
    };
}

keyword_enum!(EmbedderMode, "embedder mode", {
    "hashing" => EmbedderMode::Hashing,
    "file" => EmbedderMode::File,
    "remote" => EmbedderMode::Remote,
});

keyword_enum!(LabelerMode, "labeler mode", {
    "overlap" => LabelerMode::Overlap,
    "outside" => LabelerMode::Outside,
    "remote" => LabelerMode::Remote,
});

keyword_enum!(GeneratorMode, "generator mode", {
    "fallback" => GeneratorMode::Fallback,
    "remote" => GeneratorMode::Remote,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmenterKind {
    #[default]
    Whitespace,
    Dictionary,
}

keyword_enum!(SegmenterKind, "segmenter", {
    "whitespace" => SegmenterKind::Whitespace,
    "dictionary" => SegmenterKind::Dictionary,
});

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderConfig {
    pub mode: EmbedderMode,
    pub dim: usize,
    pub path: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub article_vectors: Option<PathBuf>,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelerConfig {
    pub mode: LabelerMode,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub mode: GeneratorMode,
    pub endpoint: Option<String>,
    pub template: InputTemplate,
    pub include_context: bool,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    pub qa_path: Option<PathBuf>,
    pub segmenter: SegmenterKind,
    pub dictionary: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    pub fusion: FusionConfig,
    pub labeler: LabelerConfig,
    pub reader: ReaderParams,
    pub lambda: f64,
    pub max_in_flight: usize,
    pub generator: GeneratorConfig,
    pub bind: String,
    pub eval_seed: u64,
}

pub const DEFAULT_LAMBDA: f64 = 0.3;
const DEFAULT_TIMEOUT_MS: u64 = 10_000;

impl PipelineConfig {
    /// Reads the file, applies process environment overrides and resolves
    /// relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut raw = RawConfig::parse(&text)?;
        raw.apply_env(std::env::vars());
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_raw(&raw, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?, base)
    }

    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self> {
        let path = |sec: &str, key: &str| raw.get(sec, key).map(|p| base.join(p));
        let corpus_path =
            path("corpus", "path").ok_or_else(|| Error::invalid("corpus.path is required"))?;

        let scorer = match raw.get("retrieval", "method").unwrap_or("bm25") {
            "bm25" => LexicalScorer::Bm25(Bm25Params::new(
                raw.typed("retrieval", "k1")?.unwrap_or(1.2),
                raw.typed("retrieval", "b")?.unwrap_or(0.75),
            )?),
            "tfidf" => LexicalScorer::TfIdf,
            other => return Err(Error::invalid(format!("unknown lexical method `{other}`"))),
        };
        let default_alpha = match scorer {
            LexicalScorer::TfIdf => crate::fusion::TUNED_ALPHA_TFIDF,
            LexicalScorer::Bm25(_) => crate::fusion::TUNED_ALPHA_BM25,
        };
        let fusion = FusionConfig {
            mode: raw.typed::<FusionMode>("retrieval", "fusion")?.unwrap_or_default(),
            alpha: raw.typed("retrieval", "alpha")?.unwrap_or(default_alpha),
            lexical: scorer,
            top_k: raw.typed("retrieval", "top_k")?.unwrap_or(10),
            normalize_lexical: raw.typed("retrieval", "normalize_lexical")?.unwrap_or(false),
        };
        fusion.validate()?;

        let defaults = ReaderParams::default();
        let reader = ReaderParams {
            max_seq_length: raw.typed("reader", "max_seq_length")?.unwrap_or(defaults.max_seq_length),
            stride: raw.typed("reader", "stride")?.unwrap_or(defaults.stride),
            special_overhead: raw
                .typed("reader", "special_overhead")?
                .unwrap_or(defaults.special_overhead),
        };
        let lambda: f64 = raw.typed("reader", "lambda")?.unwrap_or(DEFAULT_LAMBDA);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("reader.lambda must be in [0, 1], got {lambda}")));
        }
        let max_in_flight: usize = raw.typed("reader", "max_in_flight")?.unwrap_or(4);
        if max_in_flight == 0 {
            return Err(Error::invalid("reader.max_in_flight must be at least 1"));
        }

        let embedder = EmbedderConfig {
            mode: raw.typed("embedder", "mode")?.unwrap_or_default(),
            dim: raw.typed("embedder", "dim")?.unwrap_or(256),
            path: path("embedder", "path"),
            endpoint: raw.get("embedder", "endpoint").map(str::to_owned),
            article_vectors: path("embedder", "article_vectors"),
            timeout_ms: raw.typed("embedder", "timeout_ms")?.unwrap_or(DEFAULT_TIMEOUT_MS),
        };
        if embedder.dim == 0 {
            return Err(Error::invalid("embedder.dim must be positive"));
        }
        require(embedder.mode == EmbedderMode::File, &embedder.path, "embedder.path")?;
        require(embedder.mode == EmbedderMode::Remote, &embedder.endpoint, "embedder.endpoint")?;

        let labeler = LabelerConfig {
            mode: raw.typed("reader", "labeler")?.unwrap_or_default(),
            endpoint: raw.get("reader", "endpoint").map(str::to_owned),
            timeout_ms: raw.typed("reader", "timeout_ms")?.unwrap_or(DEFAULT_TIMEOUT_MS),
        };
        require(labeler.mode == LabelerMode::Remote, &labeler.endpoint, "reader.endpoint")?;

        let generator = GeneratorConfig {
            mode: raw.typed("generator", "mode")?.unwrap_or_default(),
            endpoint: raw.get("generator", "endpoint").map(str::to_owned),
            template: raw.typed("generator", "template")?.unwrap_or_default(),
            include_context: raw.typed("generator", "include_context")?.unwrap_or(false),
            timeout_ms: raw.typed("generator", "timeout_ms")?.unwrap_or(DEFAULT_TIMEOUT_MS),
        };
        require(
            generator.mode == GeneratorMode::Remote,
            &generator.endpoint,
            "generator.endpoint",
        )?;

        let segmenter: SegmenterKind = raw.typed("corpus", "segmenter")?.unwrap_or_default();
        let dictionary = path("corpus", "dictionary");
        require(segmenter == SegmenterKind::Dictionary, &dictionary, "corpus.dictionary")?;

        Ok(PipelineConfig {
            corpus_path,
            qa_path: path("corpus", "qa"),
            segmenter,
            dictionary,
            index_dir: path("index", "dir"),
            embedder,
            fusion,
            labeler,
            reader,
            lambda,
            max_in_flight,
            generator,
            bind: raw
                .get("service", "bind")
                .unwrap_or("127.0.0.1:8080")
                .to_owned(),
            eval_seed: raw.typed("eval", "seed")?.unwrap_or(42),
        })
    }

    /// Fails when a referenced input file is missing.
    pub fn check_paths(&self) -> Result<()> {
        let files = [
            Some(&self.corpus_path),
            self.qa_path.as_ref(),
            self.dictionary.as_ref(),
            self.embedder.path.as_ref(),
            self.embedder.article_vectors.as_ref(),
        ];
        for p in files.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::invalid(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Builds the configured segmenter, reading the dictionary if any.
    pub fn build_segmenter(&self) -> Result<crate::segment::Segmenter> {
        match (&self.segmenter, &self.dictionary) {
            (SegmenterKind::Dictionary, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Ok(crate::segment::Segmenter::with_dictionary(
                    text.lines().map(str::trim).filter(|l| !l.is_empty()),
                ))
            }
            _ => Ok(crate::segment::Segmenter::whitespace()),
        }
    }
}

fn require<T>(needed: bool, value: &Option<T>, name: &str) -> Result<()> {
    if needed && value.is_none() {
        return Err(Error::invalid(format!("{name} is required for the selected mode")));
    }
    Ok(())
}
