//! Weighted rooted trees, Newick I/O, the two-tree construction and exact
//! per-site joint laws.

pub mod newick;
pub mod paper;
pub mod site_law;
pub mod tree;

use thiserror::Error;

pub use newick::{parse_newick, parse_newick_with, to_newick, NewickError, NewickOptions};
pub use paper::{
    build_paper_trees, validate_paper_constraints, ConstraintCheck, ConstraintReport,
    PaperTreePair, PaperTreeParams, WhichTree,
};
pub use site_law::{site_column_distribution, site_column_law, SiteDistribution};
pub use tree::{Location, Node, NodeId, Tree, DIST_TOLERANCE};

#[derive(Debug, Error, PartialEq)]
pub enum PhyloError {
    #[error("no node with id {0}")]
    NoSuchNode(NodeId),
    #[error("the root has no parent edge")]
    RootHasNoEdge,
    #[error("point {point:?} at offset {offset} lies outside an edge of length {length}")]
    OffsetOutOfRange {
        point: String,
        offset: f64,
        length: f64,
    },
    #[error("labels must be non-empty")]
    EmptyLabel,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("edge {label:?} has invalid length {length}")]
    InvalidLength { label: String, length: f64 },
    #[error("flip rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("tree parameters violate {0}")]
    Constraint(String),
    #[error(transparent)]
    Newick(#[from] NewickError),
}
