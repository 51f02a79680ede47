//! Collaborative multi-LLM event annotation and partitioned event extraction
//! over very large event-type ontologies.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`ontology`]: event-type schema and prompt identifiers
//! - [`corpus`]: sentences, spans, events, and the line-delimited file format
//! - [`gateway`]: chat-completion backends (HTTP and scripted replay)
//! - [`annotate`]: filtering, type refinement, argument annotation, voting
//! - [`recall`]: late-interaction type recall and its margin loss
//! - [`partition`]: splitting recalled types into prompt-sized groups
//! - [`extract`]: class-style prompting for detection and argument extraction
//! - [`eval`]: TI/TC/AI/AC micro precision, recall and F1
//! - [`config`] and [`cli`]: run configuration and the `eventide` command

pub mod annotate;
pub mod batch;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod extract;
pub mod gateway;
pub mod ontology;
pub mod partition;
pub mod recall;
mod template;

pub use template::template_digest;
