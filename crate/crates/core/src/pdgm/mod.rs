//! The optimal first-order primal-dual gradient method and its baselines.

mod baselines;
mod log;
mod solver;

pub use baselines::{gda, nag_sc, nag_sc_decoupled, spectral_norm, GdaConfig};
pub use log::{IterateLog, IterateRecord, ITERATE_CSV_HEADER};
pub use solver::{
    compute_theta, PdgmConfig, PdgmSolver, PdgmState, DEFAULT_GAP_FLOOR, DEFAULT_MAX_ITERS,
};
