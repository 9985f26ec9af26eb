//! Link prediction on sparse attributed graphs with Autocovariance.

pub mod cli;
pub mod enhancer;
pub mod error;
pub mod graph;
pub mod heuristics;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod sbm;
pub mod splits;
pub mod trainer;

pub use error::{GelatoError, Result};
pub use graph::{load_graph, AttributedGraph, Adjacency, Attributes, DegreeView, NodePair};
