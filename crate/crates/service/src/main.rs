use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use regqa::assemble::{build_index, load_pipeline, load_qa};
use regqa_core::config::PipelineConfig;
use regqa_core::corpus::split_dataset;
use regqa_core::eval::{grid_alpha, run_eval, EvalOptions};
use regqa_core::fusion::{FusionMode, TOP_K_GRID};
use regqa_core::pipeline::{PipelineResponse, QueryOverrides};
use regqa_core::Error;

#[derive(Parser)]
#[command(name = "regqa", version, about = "Question answering over regulation documents")]
struct Cli {
    /// Configuration file (key = value under [section] headers).
    #[arg(short, long, default_value = "regqa.conf")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the lexical index and article vectors into index.dir.
    BuildIndex,
    /// Answer one question.
    Query {
        question: String,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        fusion: Option<FusionMode>,
        /// Print the full response as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API.
    Serve {
        /// Overrides service.bind.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Evaluate on the QA dataset; prints one JSON line per question and a summary line.
    Eval {
        #[arg(long, value_enum, default_value_t = Split::All)]
        split: Split,
        /// Comma-separated k values for P@k.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// P@k of weighted fusion for alpha = 0.1 .. 0.9.
    GridAlpha {
        #[arg(long, value_enum, default_value_t = Split::Dev)]
        split: Split,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    All,
    Dev,
    Test,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::load(&cli.config)?;
    match cli.command {
        Command::BuildIndex => {
            let manifest = build_index(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Query {
            question,
            top_k,
            alpha,
            fusion,
            json,
        } => {
            let loaded = load_pipeline(&cfg)?;
            let overrides = QueryOverrides { top_k, alpha, fusion };
            let resp = loaded.pipeline.answer_question(&question, &overrides)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&resp)?);
            } else {
                print_answer(&resp);
            }
        }
        Command::Serve { bind } => {
            let loaded = load_pipeline(&cfg)?;
            let bind = bind.unwrap_or_else(|| cfg.bind.clone());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(regqa::server::serve(Arc::new(loaded.pipeline), &bind))?;
        }
        Command::Eval {
            split,
            k,
            out,
            sequential,
        } => {
            let loaded = load_pipeline(&cfg)?;
            let pairs = select_split(load_qa(&cfg, loaded.pipeline.corpus())?, split, cfg.eval_seed)?;
            let opts = EvalOptions {
                ks: k.unwrap_or_else(|| TOP_K_GRID.to_vec()),
                parallel: !sequential,
            };
            let report = run_eval(&loaded.pipeline, &pairs, &opts)?;
            let text = report.to_jsonl();
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?,
                None => print!("{text}"),
            }
        }
        Command::GridAlpha { split, k } => {
            let loaded = load_pipeline(&cfg)?;
            let pairs = select_split(load_qa(&cfg, loaded.pipeline.corpus())?, split, cfg.eval_seed)?;
            let ks = k.unwrap_or_else(|| TOP_K_GRID.to_vec());
            for row in grid_alpha(&loaded.pipeline, &pairs, &ks)? {
                println!("{}", serde_json::to_string(&row)?);
            }
        }
    }
    Ok(())
}

fn select_split(
    pairs: Vec<regqa_core::corpus::QaPair>,
    split: Split,
    seed: u64,
) -> Result<Vec<regqa_core::corpus::QaPair>, Error> {
    Ok(match split {
        Split::All => pairs,
        Split::Dev => split_dataset(pairs, seed)?.dev,
        Split::Test => split_dataset(pairs, seed)?.test,
    })
}

fn print_answer(resp: &PipelineResponse) {
    if resp.no_answer {
        println!("No answer found in the retrieved articles.");
    } else {
        println!("{}", resp.abstractive.as_deref().unwrap_or_default());
        println!();
        println!("Evidence: {}", resp.extractive.as_deref().unwrap_or_default());
        println!(
            "Source:   {} / {} ({})",
            resp.document_title.as_deref().unwrap_or("?"),
            resp.article_title.as_deref().unwrap_or("?"),
            resp.article_id.as_deref().unwrap_or("?"),
        );
        if let Some(s) = resp.scores {
            println!(
                "Scores:   retrieval {:.4}  reader {:.4}  final {:.4}",
                s.retrieval, s.reader, s.final_score
            );
        }
    }
    for d in &resp.degraded {
        println!("Degraded: {d}");
    }
    let ids: Vec<&str> = resp.retrieved.iter().map(|c| c.article_id.as_str()).collect();
    println!("Retrieved: {}", ids.join(", "));
}
