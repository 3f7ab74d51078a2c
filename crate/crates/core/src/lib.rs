//! Retriever-reader-generator question answering over regulation corpora.

pub mod config;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod generator;
pub mod lexical;
pub mod metrics;
pub mod persist;
pub mod pipeline;
pub mod reader;
mod rank;
pub mod segment;
pub mod synthetic;
pub mod wire;

pub use error::{Error, Result, TransportError};
