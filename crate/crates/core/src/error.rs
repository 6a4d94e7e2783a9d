use thiserror::Error;

use crate::model::NodeKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("concept log contains no records")]
    EmptyInput,

    #[error("records belong to more than one user ({0} and {1})")]
    MixedUsers(String, String),

    #[error("no time-slot reached the minimum image count")]
    NoNodes,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("at least two nodes are required, got {0}")]
    TooFewNodes(usize),

    #[error("embedding dimension {dim} is outside 1..={nodes}")]
    InvalidDimension { dim: usize, nodes: usize },

    #[error("no slot column holds two available nodes")]
    NoSeed,

    #[error("cannot compute the variance of an empty point set")]
    EmptySet,

    #[error("variance trace has {0} values, at least 3 are required")]
    TraceTooShort(usize),

    #[error("silhouette needs at least two non-empty clusters")]
    SingleCluster,

    #[error("no patterns to score")]
    NoPatterns,

    #[error("node {0} carries a label missing from the vocabulary: {1}")]
    UnknownLabel(NodeKey, String),

    #[error("node {0} is not part of the grid")]
    UnknownNode(NodeKey),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}
