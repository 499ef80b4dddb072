//! Numerical toolkit for the radial defocusing energy-critical wave equation
//! with a potential in three dimensions,
//!
//! ```text
//! u_tt − Δu − V(r) u + u⁵ = 0,   u = u(t, r),
//! ```
//!
//! covering steady states, their linearized spectra, time evolution,
//! channel-of-energy diagnostics and threshold experiments along unstable
//! manifolds.

pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod manifold;
pub mod ode;
pub mod perturb;
pub mod potentials;
pub mod spectrum;
pub mod steady;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Grid, RadialField, RadialPair};
pub use potentials::{Potential, PotentialSpec};
pub use steady::SteadyState;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
