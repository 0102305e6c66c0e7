//! Data-selective online battery parameter identification.
//!
//! A timed-regular-expression matcher detects highway/motorway transition
//! segments in EV speed data; only those segments feed a total-least-squares
//! estimator of the cell's ARX parameters. The crate also ships plain RLS and
//! fixed-interval TLS estimators, a synthetic trip generator, a cell
//! simulator, and a Monte Carlo harness comparing the three methods.

pub mod battery;
pub mod config;
pub mod drive;
pub mod estimators;
pub mod etre;
pub mod eval;
pub mod pipeline;
pub mod signal;

pub use signal::{IndexInterval, SampledSignal};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv {path}: {msg}")]
    Csv { path: String, msg: String },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("uninformative segment")]
    UninformativeSegment,
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
