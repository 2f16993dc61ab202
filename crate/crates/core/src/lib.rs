//! Ordinal embeddings from triplet comparisons, with calibrated uncertainty
//! estimates for triplet answers and point locations.
//!
//! A triplet `(i, j, l)` records the answer "`i` is closer to `j` than to `l`".
//! From a set of such answers this crate
//!
//! - fits embeddings by maximizing a triplet likelihood (STE, t-STE, Crowd
//!   Kernel) or minimizing a large-margin hinge loss ([`embedding`]),
//! - builds ensembles of comparable embeddings, either by a triplet
//!   subsampling bootstrap with Procrustes alignment or by elliptical slice
//!   sampling from a Gaussian-prior posterior ([`ensemble`]),
//! - turns an ensemble into per-triplet probabilities and per-point
//!   covariances ([`uncertainty`]),
//! - and uses those for abstaining prediction, embedding-dimension selection,
//!   a simulated psychophysics study and active query selection
//!   ([`experiments`], [`psychophysics`]).
//!
//! Every stochastic routine takes an explicit [`rng::Rng`], so results are a
//! pure function of the inputs and the seed.

pub mod datasets;
pub mod embedding;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod psychophysics;
pub mod rng;
pub mod stats;
pub mod triplets;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{DistanceMatrix, Embedding};
pub use triplets::{Comparison, Triplet, TripletSet};
