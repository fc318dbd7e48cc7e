use thiserror::Error;

use crate::lattice::WaveVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or inputs supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("wavevector {0} is not in the truncated lattice K_{1}")]
    OutOfLattice(WaveVector, u32),

    #[error("Leray projection undefined for the zero wavevector")]
    ZeroWaveVector,

    /// A constant vector field (or forcing column) is not orthogonal to its mode.
    #[error("constraint violated at mode {mode}: {what} (|k.v| = {magnitude:e})")]
    Constraint { mode: WaveVector, what: String, magnitude: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Non-finite or runaway energy during time stepping.
    #[error("numerical blow-up at t = {time} in mode {mode}: energy {energy:e}")]
    BlowUp { mode: WaveVector, time: f64, energy: f64 },
}
