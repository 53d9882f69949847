//! Parallel shortest-path queries by iterative frontier extension over a CSR
//! graph, with pluggable source-morsel dispatching.

pub mod algorithms;
pub mod dispatcher;
pub mod engine;
pub mod error;
pub mod frontier;
pub mod graph;
pub mod memory;
pub mod oracle;
pub mod parents;

pub use algorithms::ReturnMode;
pub use dispatcher::{DispatchPolicy, LevelStat, MorselStats, PolicyKind};
pub use engine::{
    run_query, serial_ife_oracle, LengthRow, Path, PathRow, QueryResult, QuerySpec, QueryStats,
    Rows,
};
pub use error::{Error, Result};
pub use frontier::MorselSizes;
pub use graph::{generate_random_graph, load_edge_list, CsrGraph, EdgeId, LoadOptions, NodeId};
