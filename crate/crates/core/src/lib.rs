//! Exact neighbor-graph analysis of self-similar sets generated by three
//! half-scale maps `f(z) = (u·z + v)/2` with `u` a power of `i` and `v` a
//! Gaussian integer.
//!
//! The pipeline is: parse an [`Ifs`], build its [`NeighborGraph`], check the
//! open set condition, then derive boundary dimension, finite neighbors,
//! neighborhood states and measure moments through [`analyze`].

pub mod analysis;
pub mod graph;
pub mod lattice;
pub mod neighborhood;
pub mod render;
pub mod scc;
pub mod spectral;

pub use analysis::{analyze, Analysis, AnalysisConfig, AnalysisError, PropertyRecord};
pub use graph::{
    build_candidate_graph, build_neighbor_graph, osc_check, GraphConfig, GraphError,
    NeighborGraph, OscReport, OscVerdict,
};
pub use lattice::{fixtures, GaussInt, Ifs, IfsMap, Isometry, ParseIfsError, Unit};
pub use neighborhood::{
    build_neighborhood_graph, NeighborhoodError, NeighborhoodGraph, NeighborhoodState,
};
