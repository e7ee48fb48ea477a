//! Coupled bond configurations and their finite-box cluster structure.

mod cluster;
mod environment;
mod field;

pub use cluster::{
    anchor, build_clusters, build_clusters_with_budget, cube_for, ClusterId, ClusterIndex,
    DEFAULT_MAX_BOX_SITES,
};
pub use environment::{EdgeSet, Environment, FullLattice};
pub use field::{edge_uniform, is_open, FieldSeed, OpenConfig};
