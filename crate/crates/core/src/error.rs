use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance tie at anchor {anchor}: points {first} and {second} are equidistant")]
    Tie {
        anchor: usize,
        first: usize,
        second: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parse error at row {row}, column {column}: {message}")]
    ParseCell {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("index {index} out of range for {n} points")]
    Index { index: usize, n: usize },

    #[error("invalid triplet ({anchor}, {near}, {far}): indices must be pairwise distinct")]
    InvalidTriplet {
        anchor: usize,
        near: usize,
        far: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cannot embed from an empty triplet set")]
    EmptyTriplets,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("elliptical slice sampler did not find an acceptable point after {0} shrinks")]
    NonTermination(usize),

    #[error("point statistics of a bootstrap ensemble require aligned members")]
    NotAligned,

    #[error("abstention threshold must lie in (0.5, 1], got {0}")]
    Threshold(f64),

    #[error("requested {requested} comparisons but only {available} exist")]
    BatchTooLarge { requested: usize, available: usize },

    #[error("covariance rank {rank} is below the requested dimension {requested}")]
    Rank { rank: usize, requested: usize },

    #[error("Cholesky factorization failed: {0}")]
    Cholesky(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "similarity graph has {components} components, more than the {clusters} requested clusters"
    )]
    DisconnectedGraph { components: usize, clusters: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bootstrap replica {index} failed: {source}")]
    Replica {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_)
            | Error::NonTermination(_)
            | Error::Cholesky(_)
            | Error::Degenerate(_)
            | Error::DisconnectedGraph { .. } => true,
            Error::Replica { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
