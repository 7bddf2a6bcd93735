use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::exact::ExactSolution;
use super::objective::Quadratic;
use super::problem::{Constants, SaddleProblem};
use crate::error::{check_dim, Error, Result};

/// `L(x, y) = x^T R x + <Ax, y> - y^T S y` with `R`, `S` symmetric positive
/// definite. `F` has Hessian `2R`, so `mu_f = 2 lambda_min(R)` and
/// `l_f = 2 lambda_max(R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticMinimax {
    r_mat: DMatrix<f64>,
    s_mat: DMatrix<f64>,
    coupling: DMatrix<f64>,
    constants: Constants,
}

fn check_symmetric(name: &str, mat: &DMatrix<f64>) -> Result<()> {
    if !mat.is_square() {
        return Err(Error::invalid(format!("{name} must be square")));
    }
    let scale = mat.amax();
    let asym = (mat - mat.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::invalid(format!(
            "{name} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

fn eigen_range(mat: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(mat.clone()).eigenvalues;
    (eig.min(), eig.max())
}

impl QuadraticMinimax {
    /// Builds the problem and reads the constants off the spectra of `R` and
    /// `S`.
    pub fn new(r_mat: DMatrix<f64>, s_mat: DMatrix<f64>, coupling: DMatrix<f64>) -> Result<Self> {
        check_symmetric("R", &r_mat)?;
        check_symmetric("S", &s_mat)?;
        let (r_lo, r_hi) = eigen_range(&r_mat);
        let (s_lo, s_hi) = eigen_range(&s_mat);
        if r_lo <= 0.0 || s_lo <= 0.0 {
            return Err(Error::invalid("R and S must be positive definite"));
        }
        let constants = Constants::new(2.0 * r_lo, 2.0 * r_hi, 2.0 * s_lo, 2.0 * s_hi)?;
        Self::with_constants(r_mat, s_mat, coupling, constants)
    }

    /// Builds the problem with declared constants. The spectra of `R` and `S`
    /// must lie inside `[mu/2, L/2]` up to round-off.
    pub fn with_constants(
        r_mat: DMatrix<f64>,
        s_mat: DMatrix<f64>,
        coupling: DMatrix<f64>,
        constants: Constants,
    ) -> Result<Self> {
        constants.validate()?;
        check_symmetric("R", &r_mat)?;
        check_symmetric("S", &s_mat)?;
        check_dim("R size", coupling.ncols(), r_mat.nrows())?;
        check_dim("S size", coupling.nrows(), s_mat.nrows())?;
        for (name, mat, mu, l) in [
            ("R", &r_mat, constants.mu_f, constants.l_f),
            ("S", &s_mat, constants.mu_g, constants.l_g),
        ] {
            let (lo, hi) = eigen_range(mat);
            let slack = 1e-9 * l;
            if lo < mu / 2.0 - slack || hi > l / 2.0 + slack {
                return Err(Error::invalid(format!(
                    "spectrum of {name} [{lo}, {hi}] lies outside [{}, {}]",
                    mu / 2.0,
                    l / 2.0
                )));
            }
        }
        Ok(QuadraticMinimax {
            r_mat,
            s_mat,
            coupling,
            constants,
        })
    }

    pub fn r_mat(&self) -> &DMatrix<f64> {
        &self.r_mat
    }

    pub fn s_mat(&self) -> &DMatrix<f64> {
        &self.s_mat
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn to_problem(&self) -> SaddleProblem {
        SaddleProblem::new(
            Arc::new(Quadratic::dense(self.r_mat.clone())),
            Arc::new(Quadratic::dense(self.s_mat.clone())),
            self.coupling.clone(),
            self.constants,
        )
        .expect("validated at construction")
    }

    /// The saddle point is the origin: the KKT system
    /// `[2R, A^T; A, -2S] (x, y) = 0` is nonsingular whenever `R, S > 0`.
    pub fn exact_solution(&self) -> ExactSolution {
        ExactSolution::new(
            DVector::zeros(self.coupling.ncols()),
            DVector::zeros(self.coupling.nrows()),
        )
    }
}

/// The saddle reformulation of `min_x 1/2 ||Kx - b||^2 + mu/2 ||x||^2`:
/// `F(x) = mu/2 ||x||^2`, `G(y) = 1/2 ||y||^2 + <b, y>`, `A = K`.
#[derive(Clone, Debug, PartialEq)]
pub struct L2RegSaddle {
    k_mat: DMatrix<f64>,
    b_vec: DVector<f64>,
    mu: f64,
}

impl L2RegSaddle {
    pub fn new(k_mat: DMatrix<f64>, b_vec: DVector<f64>, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if k_mat.nrows() == 0 || k_mat.ncols() == 0 {
            return Err(Error::invalid("K must be nonempty"));
        }
        check_dim("b length", k_mat.nrows(), b_vec.len())?;
        Ok(L2RegSaddle { k_mat, b_vec, mu })
    }

    pub fn k_mat(&self) -> &DMatrix<f64> {
        &self.k_mat
    }

    pub fn b_vec(&self) -> &DVector<f64> {
        &self.b_vec
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn constants(&self) -> Constants {
        Constants {
            mu_f: self.mu,
            l_f: self.mu,
            mu_g: 1.0,
            l_g: 1.0,
        }
    }

    pub fn to_problem(&self) -> SaddleProblem {
        let (m, n) = self.k_mat.shape();
        SaddleProblem::new(
            Arc::new(Quadratic::isotropic(self.mu / 2.0, n)),
            Arc::new(Quadratic::isotropic(0.5, m).with_linear(self.b_vec.clone())),
            self.k_mat.clone(),
            self.constants(),
        )
        .expect("validated at construction")
    }

    /// Solves `(mu I + K^T K) x = K^T b` by Cholesky, then `y = K x - b`.
    pub fn exact_solution(&self) -> Result<ExactSolution> {
        let n = self.k_mat.ncols();
        let gram = self.k_mat.tr_mul(&self.k_mat) + DMatrix::identity(n, n) * self.mu;
        let chol = gram
            .cholesky()
            .ok_or(Error::Singular("mu I + K^T K is not positive definite"))?;
        let x_star = chol.solve(&self.k_mat.tr_mul(&self.b_vec));
        let y_star = &self.k_mat * &x_star - &self.b_vec;
        Ok(ExactSolution::new(x_star, y_star))
    }

    /// `1/2 ||Kx - b||^2 + mu/2 ||x||^2`.
    pub fn primal_objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.k_mat * x - &self.b_vec).norm_squared() + 0.5 * self.mu * x.norm_squared()
    }
}

/// The problem families that ship with an exact-solution oracle.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemFamily {
    Quadratic(QuadraticMinimax),
    L2(L2RegSaddle),
}

impl ProblemFamily {
    pub fn to_problem(&self) -> SaddleProblem {
        match self {
            ProblemFamily::Quadratic(q) => q.to_problem(),
            ProblemFamily::L2(l) => l.to_problem(),
        }
    }

    pub fn exact_solution(&self) -> Result<ExactSolution> {
        match self {
            ProblemFamily::Quadratic(q) => Ok(q.exact_solution()),
            ProblemFamily::L2(l) => l.exact_solution(),
        }
    }

    pub fn constants(&self) -> Constants {
        match self {
            ProblemFamily::Quadratic(q) => q.constants(),
            ProblemFamily::L2(l) => l.constants(),
        }
    }

    /// `(n, m)`.
    pub fn dims(&self) -> (usize, usize) {
        let a = match self {
            ProblemFamily::Quadratic(q) => q.coupling(),
            ProblemFamily::L2(l) => l.k_mat(),
        };
        (a.ncols(), a.nrows())
    }

    /// Same `F` and `G` with zero coupling.
    pub fn decoupled(&self) -> ProblemFamily {
        let (n, m) = self.dims();
        match self {
            ProblemFamily::Quadratic(q) => ProblemFamily::Quadratic(QuadraticMinimax {
                coupling: DMatrix::zeros(m, n),
                ..q.clone()
            }),
            ProblemFamily::L2(l) => ProblemFamily::L2(L2RegSaddle {
                k_mat: DMatrix::zeros(m, n),
                ..l.clone()
            }),
        }
    }
}

impl From<QuadraticMinimax> for ProblemFamily {
    fn from(q: QuadraticMinimax) -> Self {
        ProblemFamily::Quadratic(q)
    }
}

impl From<L2RegSaddle> for ProblemFamily {
    fn from(l: L2RegSaddle) -> Self {
        ProblemFamily::L2(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn l2_lagrangian_direct_arithmetic() {
        let p = L2RegSaddle::new(dmatrix![1.0], dvector![1.0], 2.0)
            .unwrap()
            .to_problem();
        let v = p.lagrangian(&dvector![1.0], &dvector![1.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l2_scalar_exact_solution() {
        let sol = L2RegSaddle::new(dmatrix![1.0], dvector![3.0], 2.0)
            .unwrap()
            .exact_solution()
            .unwrap();
        assert!((sol.x_star[0] - 1.0).abs() < 1e-15);
        assert!((sol.y_star[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_constants_from_spectrum() {
        let q = QuadraticMinimax::new(
            dmatrix![1.0, 0.0; 0.0, 3.0],
            dmatrix![0.5],
            dmatrix![1.0, 1.0],
        )
        .unwrap();
        let c = q.constants();
        assert!((c.mu_f - 2.0).abs() < 1e-12 && (c.l_f - 6.0).abs() < 1e-12);
        assert!((c.mu_g - 1.0).abs() < 1e-12 && (c.l_g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_rejects_asymmetric_or_indefinite() {
        assert!(QuadraticMinimax::new(
            dmatrix![1.0, 0.1; 0.0, 1.0],
            dmatrix![1.0],
            dmatrix![1.0, 1.0]
        )
        .is_err());
        assert!(QuadraticMinimax::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).is_err());
    }

    #[test]
    fn quadratic_rejects_spectrum_outside_constants() {
        let c = Constants::new(1.0, 2.0, 1.0, 2.0).unwrap();
        assert!(
            QuadraticMinimax::with_constants(dmatrix![2.0], dmatrix![0.5], dmatrix![1.0], c)
                .is_err()
        );
        assert!(
            QuadraticMinimax::with_constants(dmatrix![0.75], dmatrix![0.5], dmatrix![1.0], c)
                .is_ok()
        );
    }

    #[test]
    fn l2_rejects_nonpositive_mu() {
        assert!(L2RegSaddle::new(dmatrix![1.0], dvector![1.0], 0.0).is_err());
        assert!(L2RegSaddle::new(dmatrix![1.0], dvector![1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn decoupled_l2_solution_is_unconstrained_minimizers() {
        let fam =
            ProblemFamily::L2(L2RegSaddle::new(dmatrix![1.0, 2.0], dvector![3.0], 2.0).unwrap());
        let sol = fam.decoupled().exact_solution().unwrap();
        assert_eq!(sol.x_star, dvector![0.0, 0.0]);
        assert_eq!(sol.y_star, dvector![-3.0]);
    }
}
