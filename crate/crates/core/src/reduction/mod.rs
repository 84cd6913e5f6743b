//! Spectral clustering on the flow-weighted Laplacian and the aggregated
//! reduced-order advection model.

mod choose;
mod cluster;
pub mod eigen;
pub mod kmeans;
mod ldl;
mod model;

pub use choose::{choose_k, Choice, Evaluation};
pub use cluster::{spectral_cluster, ClusterMeta, ClusterOptions, ClusterTable, Clustering, SpectralEmbedding};
pub use eigen::{generalized_eigs, generalized_eigs_with, EigenOptions, EigenPairs};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult, Points};
pub use model::{
    build_reducers, build_reducers_for_edges, lift_state, reduce_model, reduce_state, reduced_courant_max,
    ReducedEdge, ReducedModel, Reducers,
};

#[cfg(test)]
mod tests;
