//! Call graph evolution analytics.
//!
//! Given the call graphs of a chronologically ordered series of versions, this
//! crate mines
//!
//! - stable evolution rules: association rules over co-called procedures that
//!   stay interesting in enough versions ([`rules`], [`evolution`]);
//! - graphlet frequency series and motifs over 2 to 4 node induced subgraphs
//!   ([`graphlets`]);
//! - per-version and aggregated graphlet complexity ([`complexity`]).
//!
//! [`pipeline`] wires these together and writes the CSV/DOT reports.

use std::path::PathBuf;

use thiserror::Error;

pub mod complexity;
pub mod evolution;
pub mod graphlets;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod rules;
pub mod synth;

pub use model::{graph_stats, CallGraph, CallPair, Procedure, Stats, VersionSeries};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Mining(#[from] rules::MiningError),
    #[error(transparent)]
    Stability(#[from] evolution::StabilityError),
    #[error(transparent)]
    Graphlet(#[from] graphlets::GraphletError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error("{0}")]
    Config(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// 1 for bad input or configuration, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
