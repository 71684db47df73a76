//! Braid closures embedded near a twisted annulus, swept extended-persistence
//! vineyards of radial distance functions, and recovery of the braid word and
//! vineyard monodromy from the sweep.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`braid`] — braid words, closure invariants, and the loop augmentation
//!    that gives every closure component a strand reaching the outermost track.
//! 2. [`diagram`] — planar diagram codes and the Vogel algorithm that turns a
//!    diagram into a braid word.
//! 3. [`embed`] — geometric realisation: the layout schedule on the annulus,
//!    the twisted embedding of the closure, the observation loop, and the
//!    crossing pushes that encode crossing signs into death levels.
//! 4. [`persist`] — extended persistence of the distance-to-curve function
//!    restricted to a circle of directions.
//! 5. [`vineyard`] — sweeping the observation loop, matching consecutive
//!    diagrams, tracing vines, and the vineyard monodromy permutation.
//! 6. [`extract`] — reading the braid word back off the vineyard and checking
//!    it against the input closure.
//! 7. [`pipeline`] — end-to-end drivers and file emitters.

pub mod braid;
pub mod diagram;
pub mod embed;
pub mod extract;
pub mod geom;
pub mod persist;
pub mod pipeline;
pub mod vineyard;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed textual input (braid notation, planar diagram code, config).
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally invalid data (bad strand index, inconsistent diagram, …).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The sweep grid is too coarse to certify the diagram matching; retry
    /// with at least the suggested number of samples.
    #[error("sweep resolution too coarse: {details}; retry with --sweep {suggested}")]
    Resolution { details: String, suggested: usize },

    /// The configuration sits on a degeneracy the algorithms cannot resolve
    /// (e.g. a crossing whose death levels do not separate).
    #[error("non-generic configuration: {0}")]
    NonGeneric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
