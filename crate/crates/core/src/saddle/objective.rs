use std::fmt;

use nalgebra::{DMatrix, DVector};

/// A differentiable convex function given through value and gradient oracles.
///
/// Implementations must be deterministic and side-effect free.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Bregman divergence `f(x) - f(z) - <grad f(z), x - z>`.
    ///
    /// The default evaluates the definition directly, which loses relative
    /// precision once `x` and `z` are close. Implementations with a closed form
    /// should override it.
    fn bregman(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let diff = x - z;
        self.value(x) - self.value(z) - self.gradient(z).dot(&diff)
    }

    /// `grad f(z + d) - grad f(z)`, for callers that track a small offset `d`
    /// from a base point separately. The default forms `z + d` and so rounds
    /// `d` to the precision of `z`.
    fn gradient_change(&self, z: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        self.gradient(&(z + d)) - self.gradient(z)
    }

    /// `bregman(z + d, z)`; same caveat as [`gradient_change`](Self::gradient_change).
    fn bregman_change(&self, z: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.bregman(&(z + d), z)
    }
}

/// Curvature part of a quadratic: either a dense symmetric matrix or a
/// multiple of the identity.
#[derive(Clone, Debug, PartialEq)]
pub enum Curvature {
    Dense(DMatrix<f64>),
    Scaled { scale: f64, dim: usize },
}

impl Curvature {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Curvature::Dense(q) => q * x,
            Curvature::Scaled { scale, .. } => x * *scale,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Curvature::Dense(q) => q.nrows(),
            Curvature::Scaled { dim, .. } => *dim,
        }
    }
}

/// `f(x) = x^T Q x + <c, x>`, so `grad f(x) = 2 Q x + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    curvature: Curvature,
    linear: Option<DVector<f64>>,
}

impl Quadratic {
    /// `x^T Q x` with `Q` square. Symmetry is the caller's responsibility.
    pub fn dense(q: DMatrix<f64>) -> Self {
        assert!(q.is_square(), "quadratic form must be square");
        Quadratic {
            curvature: Curvature::Dense(q),
            linear: None,
        }
    }

    /// `(scale) * ||x||^2`.
    pub fn isotropic(scale: f64, dim: usize) -> Self {
        Quadratic {
            curvature: Curvature::Scaled { scale, dim },
            linear: None,
        }
    }

    pub fn with_linear(mut self, c: DVector<f64>) -> Self {
        assert_eq!(
            c.len(),
            self.curvature.dim(),
            "linear term has wrong length"
        );
        self.linear = Some(c);
        self
    }

    pub fn curvature(&self) -> &Curvature {
        &self.curvature
    }

    pub fn linear(&self) -> Option<&DVector<f64>> {
        self.linear.as_ref()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.curvature.dim()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let quad = x.dot(&self.curvature.apply(x));
        match &self.linear {
            Some(c) => quad + c.dot(x),
            None => quad,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self.curvature.apply(x) * 2.0;
        if let Some(c) = &self.linear {
            g += c;
        }
        g
    }

    fn bregman(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        self.bregman_change(z, &(x - z))
    }

    fn gradient_change(&self, _z: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        self.curvature.apply(d) * 2.0
    }

    fn bregman_change(&self, _z: &DVector<f64>, d: &DVector<f64>) -> f64 {
        d.dot(&self.curvature.apply(d))
    }
}

type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// An objective assembled from closures, for families other than the
/// built-in quadratics.
pub struct FnObjective {
    dim: usize,
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
}

impl FnObjective {
    pub fn new<V, G>(dim: usize, value: V, gradient: G) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        FnObjective {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    #[test]
    fn quadratic_value_and_gradient() {
        let q = Quadratic::dense(dmatrix![2.0, 0.5; 0.5, 1.0]).with_linear(dvector![1.0, -1.0]);
        let x = dvector![1.0, 2.0];
        // 2 + 2*0.5*2 + 4 + 1 - 2
        assert_eq!(q.value(&x), 7.0);
        assert_eq!(q.gradient(&x), dvector![2.0 * 3.0 + 1.0, 2.0 * 2.5 - 1.0]);
    }

    #[test]
    fn bregman_override_matches_default() {
        let q = Quadratic::isotropic(1.5, 3).with_linear(dvector![0.3, -0.2, 1.0]);
        let f = FnObjective::new(
            3,
            {
                let q = q.clone();
                move |x| q.value(x)
            },
            {
                let q = q.clone();
                move |x| q.gradient(x)
            },
        );
        let x = dvector![1.0, -2.0, 0.5];
        let z = dvector![0.1, 0.4, -0.7];
        assert!((q.bregman(&x, &z) - f.bregman(&x, &z)).abs() < 1e-12);
    }

    #[test]
    fn offset_forms_match_defaults() {
        let q = Quadratic::dense(dmatrix![2.0, 0.5; 0.5, 1.0]).with_linear(dvector![1.0, -1.0]);
        let f = FnObjective::new(
            2,
            {
                let q = q.clone();
                move |x| q.value(x)
            },
            {
                let q = q.clone();
                move |x| q.gradient(x)
            },
        );
        let z = dvector![0.3, -1.2];
        let d = dvector![0.25, 0.5];
        assert!((q.gradient_change(&z, &d) - f.gradient_change(&z, &d)).amax() < 1e-14);
        assert!((q.bregman_change(&z, &d) - f.bregman_change(&z, &d)).abs() < 1e-14);
        // exact even when d is far below the resolution of z
        let tiny = dvector![1e-30, -2e-30];
        let big = dvector![1e8, 1e8];
        let want = dvector![2e-30, -3e-30];
        assert!((q.gradient_change(&big, &tiny) - want).amax() < 1e-45);
    }
}
