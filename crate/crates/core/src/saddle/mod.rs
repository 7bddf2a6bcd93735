//! Bilinear saddle problems and their concrete families.

mod exact;
mod families;
mod generate;
mod objective;
mod problem;
pub mod sdl;

pub use exact::ExactSolution;
pub use families::{L2RegSaddle, ProblemFamily, QuadraticMinimax};
pub use generate::{
    gaussian_matrix, gaussian_vector, generate_l2_saddle, generate_quadratic, seeded_rng, SeededRng,
};
pub use objective::{Curvature, FnObjective, Objective, Quadratic};
pub use problem::{Constants, SaddleProblem};
