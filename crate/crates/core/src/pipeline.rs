//! Question in, answer out: retrieve, read every candidate, select, generate.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dense::QueryEmbedder;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionMode, HybridRetriever, RetrievalResult, RetrievedContext};
use crate::generator::{
    format_generator_input, format_generator_input_with_context, generate_abstractive,
    GeneratorClient, GeneratorSource, InputTemplate,
};
use crate::reader::{
    read_article, select_best, ArticleView, Candidate, ExtractiveAnswer, Labeler, ReaderParams,
    Span,
};
use crate::segment::Segmenter;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub fusion: FusionConfig,
    pub reader: ReaderParams,
    pub lambda: f64,
    /// Upper bound on concurrent labeler calls per question.
    pub max_in_flight: usize,
    pub template: InputTemplate,
    pub include_context: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            fusion: FusionConfig::default(),
            reader: ReaderParams::default(),
            lambda: crate::config::DEFAULT_LAMBDA,
            max_in_flight: 4,
            template: InputTemplate::default(),
            include_context: false,
        }
    }
}

/// Per-request knobs; `None` keeps the configured value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QueryOverrides {
    pub top_k: Option<usize>,
    pub alpha: Option<f64>,
    pub fusion: Option<FusionMode>,
}

impl From<&crate::wire::AskRequest> for QueryOverrides {
    fn from(req: &crate::wire::AskRequest) -> Self {
        QueryOverrides {
            top_k: req.top_k,
            alpha: req.alpha,
            fusion: req.fusion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    NoAnswer,
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    pub retrieval: f64,
    pub retrieval_normalized: f64,
    pub reader: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResponse {
    pub question: String,
    pub status: ResponseStatus,
    pub no_answer: bool,
    pub abstractive: Option<String>,
    pub extractive: Option<String>,
    /// Char offsets into the selected article's text.
    pub spans: Vec<Span>,
    pub article_id: Option<String>,
    pub article_title: Option<String>,
    pub document_title: Option<String>,
    pub scores: Option<StageScores>,
    pub generator_source: Option<GeneratorSource>,
    pub retrieved: Vec<RetrievedContext>,
    /// One entry per stage that fell back, e.g. `generator: request timed out`.
    pub degraded: Vec<String>,
}

pub struct Pipeline {
    corpus: Corpus,
    seg: Segmenter,
    retriever: HybridRetriever,
    embedder: Box<dyn QueryEmbedder>,
    labeler: Box<dyn Labeler>,
    generator: Option<Box<dyn GeneratorClient>>,
    settings: PipelineSettings,
}

impl Pipeline {
    /// Fails unless the retriever indexes exactly the corpus articles.
    pub fn new(
        corpus: Corpus,
        seg: Segmenter,
        retriever: HybridRetriever,
        embedder: Box<dyn QueryEmbedder>,
        labeler: Box<dyn Labeler>,
        generator: Option<Box<dyn GeneratorClient>>,
        settings: PipelineSettings,
    ) -> Result<Self> {
        settings.fusion.validate()?;
        if settings.max_in_flight == 0 {
            return Err(Error::invalid("max_in_flight must be at least 1"));
        }
        if !(0.0..=1.0).contains(&settings.lambda) {
            return Err(Error::invalid(format!("lambda must be in [0, 1], got {}", settings.lambda)));
        }
        let indexed = retriever.index().article_ids();
        if indexed.len() != corpus.articles().len()
            || indexed.iter().any(|id| corpus.article(id).is_none())
        {
            return Err(Error::Integrity(
                "index does not cover the same articles as the corpus".into(),
            ));
        }
        Ok(Pipeline {
            corpus,
            seg,
            retriever,
            embedder,
            labeler,
            generator,
            settings,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn segmenter(&self) -> &Segmenter {
        &self.seg
    }

    pub fn retriever(&self) -> &HybridRetriever {
        &self.retriever
    }

    pub fn embedder(&self) -> &dyn QueryEmbedder {
        self.embedder.as_ref()
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.settings
    }

    /// The configured fusion settings with per-request overrides applied.
    pub fn fusion_for(&self, overrides: &QueryOverrides) -> Result<FusionConfig> {
        let mut cfg = self.settings.fusion;
        if let Some(k) = overrides.top_k {
            cfg.top_k = k;
        }
        if let Some(a) = overrides.alpha {
            cfg.alpha = a;
        }
        if let Some(m) = overrides.fusion {
            cfg.mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Retrieval only. When the embedder fails, falls back to lexical-only
    /// ranking and reports it in the second element.
    pub fn retrieve(&self, question: &str, cfg: &FusionConfig) -> Result<(RetrievalResult, Option<String>)> {
        check_question(question)?;
        match self
            .retriever
            .query_context(question, self.embedder.as_ref(), &self.seg, cfg)
        {
            Ok(r) => Ok((r, None)),
            Err(Error::Transport(e)) => {
                let lexical = FusionConfig {
                    mode: FusionMode::LexicalOnly,
                    ..*cfg
                };
                let r = self
                    .retriever
                    .query_context(question, self.embedder.as_ref(), &self.seg, &lexical)?;
                Ok((r, Some(format!("embedder: {e}; ranked by lexical score only"))))
            }
            Err(e) => Err(e),
        }
    }

    pub fn answer_question(&self, question: &str, overrides: &QueryOverrides) -> Result<PipelineResponse> {
        let cfg = self.fusion_for(overrides)?;
        self.answer_with(question, &cfg)
    }

    pub fn answer_with(&self, question: &str, cfg: &FusionConfig) -> Result<PipelineResponse> {
        let (retrieval, retrieval_issue) = self.retrieve(question, cfg)?;
        self.answer_from(question, retrieval, retrieval_issue.into_iter().collect())
    }

    /// Reads, selects and generates over an existing ranking.
    pub fn answer_from(
        &self,
        question: &str,
        retrieval: RetrievalResult,
        mut degraded: Vec<String>,
    ) -> Result<PipelineResponse> {
        let question_tokens = self.seg.surfaces(question);
        let outcomes = self.read_all(question, &question_tokens, &retrieval.ranked)?;
        let mut candidates = Vec::with_capacity(outcomes.len());
        for (ctx, outcome) in retrieval.ranked.iter().zip(outcomes) {
            let answer = match outcome {
                Ok(a) => a,
                Err(msg) => {
                    degraded.push(format!("reader ({}): {msg}", ctx.article_id));
                    None
                }
            };
            candidates.push(Candidate {
                retrieval_score: ctx.fused,
                answer,
            });
        }

        let selection = match select_best(&candidates, self.settings.lambda) {
            Ok(s) => s,
            Err(Error::NoAnswer) => {
                return Ok(PipelineResponse {
                    question: question.to_owned(),
                    status: ResponseStatus::NoAnswer,
                    no_answer: true,
                    abstractive: None,
                    extractive: None,
                    spans: Vec::new(),
                    article_id: None,
                    article_title: None,
                    document_title: None,
                    scores: None,
                    generator_source: None,
                    retrieved: retrieval.ranked,
                    degraded,
                })
            }
            Err(e) => return Err(e),
        };
        let chosen = &candidates[selection.index];
        let answer: &ExtractiveAnswer = chosen.answer.as_ref().expect("selected candidate answered");
        let article = self
            .corpus
            .article(&answer.article_id)
            .expect("retrieved ids come from the corpus");

        let input = if self.settings.include_context {
            format_generator_input_with_context(question, &answer.text, &article.text, self.settings.template)
        } else {
            format_generator_input(question, &answer.text, self.settings.template)
        };
        let generated = match input {
            Ok(input) => generate_abstractive(&input, self.generator.as_deref()),
            Err(e) => {
                // Reserved markers in the answer or article; skip the model.
                let text = crate::generator::fallback_text(&answer.text);
                degraded.push(format!("generator: {e}"));
                crate::generator::GeneratorOutput {
                    text,
                    source: GeneratorSource::Fallback,
                    degradation: None,
                }
            }
        };
        degraded.extend(generated.degradation);

        Ok(PipelineResponse {
            question: question.to_owned(),
            status: if degraded.is_empty() {
                ResponseStatus::Ok
            } else {
                ResponseStatus::Degraded
            },
            no_answer: false,
            abstractive: Some(generated.text),
            extractive: Some(answer.text.clone()),
            spans: answer.spans.clone(),
            article_id: Some(answer.article_id.clone()),
            article_title: Some(article.title.clone()),
            document_title: self.corpus.document_of(&article.article_id).map(|d| d.title.clone()),
            scores: Some(StageScores {
                retrieval: chosen.retrieval_score,
                retrieval_normalized: selection.retrieval_norm,
                reader: answer.reader_score,
                final_score: selection.final_score,
            }),
            generator_source: Some(generated.source),
            retrieved: retrieval.ranked,
            degraded,
        })
    }

    /// Reads candidates in chunks of `max_in_flight` threads. Transport
    /// failures come back per candidate; anything else aborts the question.
    fn read_all(
        &self,
        question: &str,
        question_tokens: &[String],
        ranked: &[RetrievedContext],
    ) -> Result<Vec<std::result::Result<Option<ExtractiveAnswer>, String>>> {
        let read_one = |ctx: &RetrievedContext| {
            let article = self
                .corpus
                .article(&ctx.article_id)
                .expect("retrieved ids come from the corpus");
            let view = ArticleView {
                article_id: &article.article_id,
                text: &article.text,
                tokens: &article.tokens,
            };
            read_article(question, question_tokens, view, self.labeler.as_ref(), &self.settings.reader)
        };
        let mut out = Vec::with_capacity(ranked.len());
        for chunk in ranked.chunks(self.settings.max_in_flight) {
            let results: Vec<Result<Option<ExtractiveAnswer>>> = if chunk.len() == 1 {
                vec![read_one(&chunk[0])]
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = chunk.iter().map(|c| s.spawn(|| read_one(c))).collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("reader thread panicked"))
                        .collect()
                })
            };
            for r in results {
                match r {
                    Ok(a) => out.push(Ok(a)),
                    Err(Error::Transport(e)) => out.push(Err(e.to_string())),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }
}

fn check_question(question: &str) -> Result<()> {
    if question.trim().is_empty() {
        return Err(Error::invalid("question is empty"));
    }
    Ok(())
}
