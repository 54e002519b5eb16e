//! Construction, approximation and verification of common Lyapunov
//! functions for linear switched systems `ẋ = A(t)x`, `A(t) ∈ 𝓜`.
//!
//! The crate is organised bottom-up:
//!
//! - [`system`]: mode sets, switching laws, transition matrices, simulation.
//! - [`canonical`]: the sup-over-trajectories norm `V̂(x) = max_G ‖Gx‖` built
//!   from a pruned set of transition-matrix products.
//! - [`synth`]: polyhedral and even-power-sum candidates interpolating `V̂`.
//! - [`verify`]: subdifferential, gradient and trajectory checks.
//! - [`critical`]: the marginally stable planar pair with a four-switch
//!   periodic orbit, its shifted family and higher-dimensional embedding.
//! - [`lab`]: LP feasibility of polynomial certificates and the
//!   degree / piece-count scans near the critical system.

pub mod canonical;
pub mod critical;
pub mod error;
pub mod lab;
pub mod par;
pub mod rng;
pub mod synth;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
