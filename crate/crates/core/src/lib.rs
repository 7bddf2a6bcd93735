//! Accelerated first-order primal-dual methods for bilinear saddle point
//! problems
//!
//! ```text
//!     min_x max_y  L(x, y) = F(x) + <Ax, y> - G(y)
//! ```
//!
//! with `F` `mu_f`-strongly convex and `l_f`-smooth and `G` likewise.
//!
//! The crate is split into:
//!
//! - [`saddle`]: the problem abstraction, the quadratic minimax and
//!   l2-regularized least-squares families, seeded generators, exact solutions
//!   and a text serialization format.
//! - [`pdgm`]: the optimal primal-dual gradient method, its discrete Lyapunov
//!   energy, and the NAG-SC and gradient descent-ascent baselines.
//! - [`dynamics`]: the inertial primal-dual ODE (base and rescaled), explicit
//!   Runge-Kutta integrators, the continuous energy, and the discretization
//!   that maps the rescaled ODE back onto the discrete method.
//! - [`metrics`]: gaps, theoretical rates, and log-linear rate fitting.
//! - [`harness`]: configuration-driven experiments writing CSV logs.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod pdgm;
pub mod saddle;

pub(crate) mod fmt;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
