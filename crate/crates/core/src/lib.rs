//! Group-sparse coordination of residential batteries for peak shaving.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: household battery dynamics, constraints, scenarios and profiles.
//! * [`problem`]: the peak-shaving objective, coupling operator and mixed norm.
//! * [`qpcore`]: dense strictly convex QPs and polytope projection.
//! * [`admm`]: consensus ADMM with local proximal steps and adaptive penalty.
//! * [`mpc`]: the receding-horizon loop, weight refresh and sparsity metrics.
//! * [`study`]: open-loop replications and κ sweeps built on the above.
//! * [`io`]: scenario JSON, profile CSV and log writers.

pub mod admm;
pub mod error;
pub mod io;
pub mod model;
pub mod mpc;
pub mod problem;
pub mod qpcore;
pub mod study;

pub use error::{Error, Result};
