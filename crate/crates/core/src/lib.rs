//! Community detection in hypergraphs with categorical node attributes.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod hypergraph;
pub mod io;
pub mod model;
pub mod represent;
pub mod synth;

pub use error::{Error, Result};
pub use hypergraph::{AttributeMatrix, EdgeFormat, Hyperedge, Hypergraph};
pub use model::{FitReport, Hyperparams, LatentParams, MembershipRule};
