//! Exact block-diagonal simulation of qubit-clock compression protocols.
//!
//! An n-copy clock state is permutation invariant, so it decomposes into
//! total-spin blocks: a weight `q_J` and a `(2J+1)x(2J+1)` Hermitian matrix
//! per total spin J, with the multiplicity register maximally mixed on both
//! sides of every comparison and therefore cancelling in trace distance.
//! Everything here works in those block coordinates; nothing ever
//! materializes a `2^n`-dimensional operator except the brute-force
//! reference implementations in [`oracle`], which exist to validate the
//! block kernels at small n.
//!
//! Module layout:
//!
//! * [`repkit`] - spin arithmetic, Clebsch-Gordan coefficients, Wigner
//!   small-d matrices, Schur-Weyl multiplicities.
//! * [`clockstate`] - clock-state blocks, weights, time evolution, trace
//!   distance.
//! * [`channels`] - spin conversion (cloner / partial trace) and the
//!   frequency projection channel, plus their analytic error bounds.
//! * [`compressor`] - known- and unknown-spectrum encoders/decoders,
//!   interval partition, error evaluation, memory accounting.
//! * [`oracle`] - full-Hilbert-space reference implementations (n <= 10).
//! * [`cli`] - experiment presets, config parsing, CSV output.

pub mod channels;
pub mod cli;
pub mod clockstate;
pub mod compressor;
pub mod linalg;
pub mod oracle;
pub mod repkit;

use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented precondition (off-grid magnetic
    /// index, parameter outside its domain, mismatched dimensions, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A run configuration is self-inconsistent or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// The request exceeds a documented size limit (brute-force oracles
    /// refuse large n rather than thrash).
    #[error("size refusal: {0}")]
    SizeRefusal(String),

    /// An internal numerical tolerance was violated.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Reading or writing experiment output failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
