use nalgebra::DVector;

use super::problem::SaddleProblem;
use crate::error::Result;

/// The unique saddle point `(x*, y*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub x_star: DVector<f64>,
    pub y_star: DVector<f64>,
}

impl ExactSolution {
    pub fn new(x_star: DVector<f64>, y_star: DVector<f64>) -> Self {
        ExactSolution { x_star, y_star }
    }

    /// `(||grad F(x*) + A^T y*||, ||A x* - grad G(y*)||)`.
    pub fn kkt_residuals(&self, p: &SaddleProblem) -> Result<(f64, f64)> {
        let (gx, gy) = p.lagrangian_gradient(&self.x_star, &self.y_star)?;
        Ok((gx.norm(), gy.norm()))
    }
}
