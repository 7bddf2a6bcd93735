use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::objective::Objective;
use crate::error::{check_dim, Error, Result};

/// Strong-convexity and smoothness constants of both blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub mu_f: f64,
    pub l_f: f64,
    pub mu_g: f64,
    pub l_g: f64,
}

impl Constants {
    pub fn new(mu_f: f64, l_f: f64, mu_g: f64, l_g: f64) -> Result<Self> {
        let c = Constants {
            mu_f,
            l_f,
            mu_g,
            l_g,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mu, l) in [("F", self.mu_f, self.l_f), ("G", self.mu_g, self.l_g)] {
            if !(mu.is_finite() && l.is_finite() && mu > 0.0 && mu <= l) {
                return Err(Error::invalid(format!(
                    "constants of {name} must satisfy 0 < mu <= L, got mu = {mu}, L = {l}"
                )));
            }
        }
        Ok(())
    }
}

/// `L(x, y) = F(x) + <Ax, y> - G(y)` with `x` of length `n` and `y` of
/// length `m`; `A` is `m x n`.
///
/// Immutable after construction. Cloning shares the oracles.
#[derive(Clone)]
pub struct SaddleProblem {
    f: Arc<dyn Objective>,
    g: Arc<dyn Objective>,
    coupling: Arc<DMatrix<f64>>,
    constants: Constants,
}

impl fmt::Debug for SaddleProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SaddleProblem")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl SaddleProblem {
    pub fn new(
        f: Arc<dyn Objective>,
        g: Arc<dyn Objective>,
        coupling: DMatrix<f64>,
        constants: Constants,
    ) -> Result<Self> {
        constants.validate()?;
        let (m, n) = coupling.shape();
        if n == 0 || m == 0 {
            return Err(Error::invalid("problem dimensions must be positive"));
        }
        check_dim("F domain", n, f.dim())?;
        check_dim("G domain", m, g.dim())?;
        Ok(SaddleProblem {
            f,
            g,
            coupling: Arc::new(coupling),
            constants,
        })
    }

    /// Primal dimension.
    pub fn n(&self) -> usize {
        self.coupling.ncols()
    }

    /// Dual dimension.
    pub fn m(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn f(&self) -> &dyn Objective {
        self.f.as_ref()
    }

    pub fn g(&self) -> &dyn Objective {
        self.g.as_ref()
    }

    /// The same `F` and `G` with the coupling replaced by zero.
    pub fn decoupled(&self) -> SaddleProblem {
        SaddleProblem {
            f: self.f.clone(),
            g: self.g.clone(),
            coupling: Arc::new(DMatrix::zeros(self.m(), self.n())),
            constants: self.constants,
        }
    }

    pub fn check_point(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        check_dim("primal point", self.n(), x.len())?;
        check_dim("dual point", self.m(), y.len())
    }

    /// `F(x) + <Ax, y> - G(y)`.
    pub fn lagrangian(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_point(x, y)?;
        Ok(self.lagrangian_unchecked(x, y))
    }

    /// `(grad F(x) + A^T y, A x - grad G(y))`: the descent direction's negative
    /// for `x` and the ascent direction for `y`.
    pub fn lagrangian_gradient(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_point(x, y)?;
        Ok((self.grad_x(x, y), self.grad_y(x, y)))
    }

    pub(crate) fn lagrangian_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.f.value(x) + self.apply_a(x).dot(y) - self.g.value(y)
    }

    pub(crate) fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.f.gradient(x) + self.apply_at(y)
    }

    pub(crate) fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.apply_a(x) - self.g.gradient(y)
    }

    pub(crate) fn apply_a(&self, x: &DVector<f64>) -> DVector<f64> {
        self.coupling.as_ref() * x
    }

    pub(crate) fn apply_at(&self, y: &DVector<f64>) -> DVector<f64> {
        self.coupling.tr_mul(y)
    }
}
