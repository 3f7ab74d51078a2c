//! Builds a [`Pipeline`] and index artifacts from a [`PipelineConfig`].

use std::path::Path;
use std::time::Duration;

use regqa_core::config::{EmbedderMode, GeneratorMode, LabelerMode, PipelineConfig};
use regqa_core::corpus::{load_qa_dataset, Corpus, QaPair};
use regqa_core::dense::{EmbeddingStore, FileLookupEmbedder, HashingEmbedder, QueryEmbedder};
use regqa_core::fusion::HybridRetriever;
use regqa_core::generator::GeneratorClient;
use regqa_core::lexical::InvertedIndex;
use regqa_core::persist::{read_artifacts, write_artifacts, Manifest, MANIFEST_FILE};
use regqa_core::pipeline::{Pipeline, PipelineSettings};
use regqa_core::reader::{Labeler, OutsideLabeler, OverlapLabeler};
use regqa_core::segment::Segmenter;
use regqa_core::{Error, Result};

use crate::clients::{HttpEmbedder, HttpGenerator, HttpLabeler};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn ms(v: u64) -> Duration {
    Duration::from_millis(v)
}

pub fn make_embedder(cfg: &PipelineConfig, seg: &Segmenter) -> Result<Box<dyn QueryEmbedder>> {
    let e = &cfg.embedder;
    Ok(match e.mode {
        EmbedderMode::Hashing => Box::new(HashingEmbedder::new(e.dim, seg.clone())?),
        EmbedderMode::File => {
            let path = e.path.as_ref().expect("checked by config");
            let lookup = FileLookupEmbedder::load(path)?;
            if lookup.dim() != e.dim {
                return Err(Error::Dimension {
                    id: path.display().to_string(),
                    expected: e.dim,
                    actual: lookup.dim(),
                });
            }
            Box::new(lookup)
        }
        EmbedderMode::Remote => Box::new(HttpEmbedder::new(
            e.endpoint.as_deref().expect("checked by config"),
            e.dim,
            ms(e.timeout_ms),
        )),
    })
}

pub fn make_labeler(cfg: &PipelineConfig) -> Box<dyn Labeler> {
    match cfg.labeler.mode {
        LabelerMode::Overlap => Box::new(OverlapLabeler::default()),
        LabelerMode::Outside => Box::new(OutsideLabeler),
        LabelerMode::Remote => Box::new(HttpLabeler::new(
            cfg.labeler.endpoint.as_deref().expect("checked by config"),
            ms(cfg.labeler.timeout_ms),
        )),
    }
}

pub fn make_generator(cfg: &PipelineConfig) -> Option<Box<dyn GeneratorClient>> {
    match cfg.generator.mode {
        GeneratorMode::Fallback => None,
        GeneratorMode::Remote => Some(Box::new(HttpGenerator::new(
            cfg.generator.endpoint.as_deref().expect("checked by config"),
            ms(cfg.generator.timeout_ms),
        ))),
    }
}

pub fn settings(cfg: &PipelineConfig) -> PipelineSettings {
    PipelineSettings {
        fusion: cfg.fusion,
        reader: cfg.reader,
        lambda: cfg.lambda,
        max_in_flight: cfg.max_in_flight,
        template: cfg.generator.template,
        include_context: cfg.generator.include_context,
    }
}

/// Article vectors from `embedder.article_vectors` if set, otherwise
/// computed with the query embedder.
fn article_store(cfg: &PipelineConfig, corpus: &Corpus, embedder: &dyn QueryEmbedder) -> Result<EmbeddingStore> {
    match &cfg.embedder.article_vectors {
        Some(path) => EmbeddingStore::load(path, Some(cfg.embedder.dim)),
        None => EmbeddingStore::from_embedder(corpus, embedder),
    }
}

pub struct Loaded {
    pub pipeline: Pipeline,
    /// Present when the index came from `index.dir`.
    pub manifest: Option<Manifest>,
}

/// Loads the corpus and either the persisted index (when `index.dir` holds
/// a manifest) or an in-memory build.
pub fn load_pipeline(cfg: &PipelineConfig) -> Result<Loaded> {
    cfg.check_paths()?;
    let seg = cfg.build_segmenter()?;
    let corpus_text = read_text(&cfg.corpus_path)?;
    let corpus = Corpus::parse(&corpus_text, &seg)?;
    let embedder = make_embedder(cfg, &seg)?;
    let persisted = cfg
        .index_dir
        .as_ref()
        .filter(|dir| dir.join(MANIFEST_FILE).is_file());
    let (index, store, manifest) = match persisted {
        Some(dir) => {
            let (index, store, manifest) = read_artifacts(dir, Some(corpus_text.as_bytes()))?;
            (index, store, Some(manifest))
        }
        None => {
            let index = InvertedIndex::build(&corpus, &seg)?;
            let store = article_store(cfg, &corpus, embedder.as_ref())?;
            (index, store, None)
        }
    };
    let retriever = HybridRetriever::new(index, store)?;
    let pipeline = Pipeline::new(
        corpus,
        seg,
        retriever,
        embedder,
        make_labeler(cfg),
        make_generator(cfg),
        settings(cfg),
    )?;
    Ok(Loaded { pipeline, manifest })
}

/// Builds the index and article vectors and writes them to `index.dir`.
pub fn build_index(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.check_paths()?;
    let dir = cfg
        .index_dir
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("index.dir is required to build an index".into()))?;
    let seg = cfg.build_segmenter()?;
    let corpus_text = read_text(&cfg.corpus_path)?;
    let corpus = Corpus::parse(&corpus_text, &seg)?;
    let embedder = make_embedder(cfg, &seg)?;
    let index = InvertedIndex::build(&corpus, &seg)?;
    let store = article_store(cfg, &corpus, embedder.as_ref())?;
    let missing = store.missing(index.article_ids());
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    write_artifacts(dir, corpus_text.as_bytes(), &index, &store)
}

pub fn load_qa(cfg: &PipelineConfig, corpus: &Corpus) -> Result<Vec<QaPair>> {
    let path = cfg
        .qa_path
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("corpus.qa is required for evaluation".into()))?;
    load_qa_dataset(path, corpus)
}
