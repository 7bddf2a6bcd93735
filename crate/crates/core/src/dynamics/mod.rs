//! Inertial primal-dual dynamics, integrators, and the bridge back to the
//! discrete method.

mod bridge;
mod integrate;
mod system;

pub use bridge::{discretization_bridge, BridgeMap, BridgeReport};
pub use integrate::{
    integrate, ErrorControl, IntegratorOptions, IntegratorStats, Method, Trajectory,
    TrajectoryPoint, DEFAULT_REPORT_POINTS, MIN_STEP, TRAJECTORY_CSV_HEADER,
};
pub use system::{continuous_energy, ode_rhs, DynamicParams, OdeDerivative, OdeState};
