//! Fourier-Galerkin truncation of the 3D stochastic magnetohydrodynamics system
//! on the periodic box.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] and [`state`]: the truncated wavevector lattice, its split
//!   into representatives and their negatives, Leray projection and the
//!   complex/real coordinate maps.
//! * [`dynamics`]: drift of the truncated system, its four nonlinear pieces,
//!   the real-coordinate vector field and its second derivative.
//! * [`noise`]: degenerate divergence-free forcing and reproducible Wiener
//!   increments.
//! * [`integrator`]: fixed-step Euler-Maruyama and exponential schemes.
//! * [`hormander`]: constant-field double brackets and the span closure
//!   deciding the hypoellipticity condition for a set of forced modes.
//! * [`ergodicity`]: Monte Carlo audits of the energy balance, moment bound,
//!   hitting-time tails, recurrence and initial-condition independence.

pub mod dynamics;
pub mod ergodicity;
pub mod error;
pub mod hormander;
pub mod integrator;
pub mod lattice;
pub mod noise;
pub mod state;
pub mod vec3;

pub use error::{Error, Result};
pub use lattice::{ModeLattice, WaveVector};
pub use state::{RealState, SpectralState};
