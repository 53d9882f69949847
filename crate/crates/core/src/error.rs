use std::io;

use thiserror::Error;

/// Errors surfaced by graph ingestion and query execution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid snapshot: {0}")]
    Snapshot(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// A path length no longer fits in the one-byte length encoding.
    #[error("search depth {depth} exceeds the maximum of {max}")]
    DepthOverflow { depth: u32, max: u32 },

    #[error("out of memory: requested {requested} bytes with {in_use} of {limit} in use")]
    OutOfMemory {
        requested: usize,
        in_use: usize,
        limit: usize,
    },

    /// Exhaustive oracles refuse inputs beyond their tractable size.
    #[error("graph too large for exhaustive enumeration: {nodes} nodes (max {max})")]
    GraphTooLarge { nodes: usize, max: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
