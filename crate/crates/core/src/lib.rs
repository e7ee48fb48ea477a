//! Random walks on supercritical bond-percolation clusters: travel costs,
//! Lyapunov exponents, time constants and the quenched rate function.

pub mod asymptotics;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod metrics;
pub mod percolation;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{Edge, LatticeBox, NormKind, Point};
pub use percolation::{ClusterIndex, FieldSeed, OpenConfig};
pub use solver::{Cost, CostResult};
pub use stats::Estimate;
