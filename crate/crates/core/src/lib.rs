//! Community detection in the general stochastic block model.
//!
//! The crate covers graph generation, the CH-divergence and finest partition,
//! the spectrum of `PQ`, sphere comparison (partial recovery), degree
//! profiling (exact recovery), exact Poisson computations, and evaluation.

pub mod degree_profiling;
pub mod detector;
pub mod divergence;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod poisson;
pub mod rng;
pub mod spectral;
pub mod sphere;

pub use error::{Result, SbmError};
pub use model::{build_params, sample_graph, split_edges, Graph, ModelParams, PlantedGraph, Regime};
