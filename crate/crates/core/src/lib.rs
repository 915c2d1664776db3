//! Graph-directed contractive Markov systems: parsing, simulation and
//! Monte Carlo estimation of their invariant objects.
//!
//! A system is a finite directed multigraph whose vertices carry subsets
//! `K_i` of a metric space and whose edges carry maps `w_e : K_{i(e)} →
//! K_{t(e)}` together with place-dependent probabilities `p_e`.

pub mod analysis;
pub mod coding;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod martingale;
pub mod rng;
pub mod simulate;
pub mod space;
pub mod stats;
pub mod sysdsl;
pub mod system;

pub use error::{Error, Result};
pub use graph::{DirectedMultigraph, Edge, Word};
pub use rng::StreamRng;
pub use space::{MetricSpec, Point, SequencePoint};
pub use system::{validate, MarkovSystem, ModulusEnvelope, SystemKind, ValidationReport};
pub use stats::EstimateWithError;
