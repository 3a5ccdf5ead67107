//! Information content of graph nodes.
//!
//! A node's IC is the surprisal of seeing it as subject or object of a
//! uniformly drawn triple, `-ln(degree(v) / |G|)`. The clustered variant
//! replaces the graph by its quotient under a k-means clustering of entity
//! embeddings, and the by-relation variant restricts both the degree and
//! the triple population to one relation. Edge IC is the mean of the two
//! endpoint scores, and path relevance the mean edge IC, both normalized to
//! `[0, 1]` by the largest attainable surprisal.

mod clustered;
mod embedding;
mod kmeans;
mod table;

use thiserror::Error;

use crate::kg::{EntityId, GraphError, RelationId};

pub use clustered::{build_clustered_graph, cluster_label, ClusterAssignment};
pub use embedding::{fallback_embeddings, parse_embeddings, read_embeddings, EmbeddingTable};
pub use kmeans::{default_cluster_count, kmeans, kmeans_cluster, KMeansOutcome};
pub use table::{
    clustered_node_ic, clustered_node_ic_by_relation, compute_ic_table, edge_ic, node_ic,
    path_relevance, IcMode, IcTable, Normalization,
};

#[derive(Debug, Error)]
pub enum IcError {
    #[error("information content undefined for entity {0}: zero degree")]
    ZeroDegree(EntityId),
    #[error("information content undefined for entity {entity} under relation {relation}: zero degree")]
    ZeroRelationDegree {
        entity: EntityId,
        relation: RelationId,
    },
    #[error("relation {0} has no triples")]
    AbsentRelation(RelationId),
    #[error("entity {0} has no cluster assignment")]
    Unassigned(EntityId),
    #[error("cluster id {cluster} out of range for k={k}")]
    ClusterOutOfRange { cluster: u32, k: usize },
    #[error("mode {0:?} needs a cluster assignment")]
    MissingClusters(IcMode),
    #[error("cannot pick {k} distinct centers: only {distinct} distinct vectors")]
    DuplicateCenters { k: usize, distinct: usize },
    #[error("invalid cluster count {k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("embedding dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("graph has no entities")]
    EmptyGraph,
    #[error("path has no edges")]
    EmptyPath,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
