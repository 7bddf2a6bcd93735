use nalgebra::{DMatrix, DVector};

use super::system::DynamicParams;
use crate::error::{Error, Result};
use crate::pdgm::{compute_theta, PdgmConfig, PdgmSolver, PdgmState};
use crate::saddle::SaddleProblem;

/// Semi-implicit finite-difference discretization of the rescaled dynamics
/// with step `h`.
///
/// With `gamma / sqrt(h) = 1 / theta` and `beta_i = step_i (1 + theta) / h`
/// this reproduces one iteration of the primal-dual method. The map below is
/// built only from `(h, gamma, beta1, beta2)` and solves its implicit
/// `(n + m)`-dimensional system with a plain LU, so it shares no code path
/// with the solver it is compared against.
#[derive(Clone, Debug)]
pub struct BridgeMap {
    pub h: f64,
    pub gamma: f64,
    pub theta: f64,
    pub beta1: f64,
    pub beta2: f64,
    problem: SaddleProblem,
    r: f64,
    s: f64,
}

/// Largest coordinate difference between the bridge map and the solver step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeReport {
    pub max_discrepancy: f64,
    pub states_checked: usize,
}

pub fn discretization_bridge(p: &SaddleProblem, r: f64, s: f64) -> Result<BridgeMap> {
    let c = p.constants();
    PdgmConfig {
        r,
        s,
        ..PdgmConfig::optimal(&c)
    }
    .validate(&c)
    .map_err(|e| Error::invalid(format!("inconsistent bridge parameters: {e}")))?;
    let theta = compute_theta(c.mu_f, r, c.mu_g, s)?;
    let gamma = DynamicParams::base(p).gamma;
    let h = (gamma * theta).powi(2);
    Ok(BridgeMap {
        h,
        gamma,
        theta,
        beta1: r * (1.0 + theta) / h,
        beta2: s * (1.0 + theta) / h,
        problem: p.clone(),
        r,
        s,
    })
}

impl BridgeMap {
    /// The rescaled continuous system this map discretizes.
    pub fn params(&self) -> Result<DynamicParams> {
        DynamicParams::rescaled(&self.problem, self.beta1, self.beta2)
    }

    pub fn solver(&self) -> Result<PdgmSolver> {
        let cfg = PdgmConfig {
            r: self.r,
            s: self.s,
            ..PdgmConfig::optimal(&self.problem.constants())
        };
        PdgmSolver::new(&self.problem, cfg)
    }

    /// One step of the discretized dynamics:
    ///
    /// ```text
    /// x' = x_bar - c_x (grad F(x_bar) + A^T (y + e (y' - y)))
    /// y' = y_bar - c_y (grad G(y_bar) - A (x + e (x' - x)))
    /// ```
    ///
    /// with `e = gamma / sqrt(h)`, `c_i = beta_i h / (1 + sqrt(alpha h))` and
    /// momentum `(1 - sqrt(alpha h)) / (1 + sqrt(alpha h))`, `alpha = 1/gamma^2`.
    pub fn step(&self, st: &PdgmState) -> Result<PdgmState> {
        let p = &self.problem;
        let (n, m) = (p.n(), p.m());
        p.check_point(&st.x_curr, &st.y_curr)?;
        p.check_point(&st.x_prev, &st.y_prev)?;
        let a = p.coupling();
        let damp = (self.h / (self.gamma * self.gamma)).sqrt();
        let momentum = (1.0 - damp) / (1.0 + damp);
        let e = self.gamma / self.h.sqrt();
        let cx = self.beta1 * self.h / (1.0 + damp);
        let cy = self.beta2 * self.h / (1.0 + damp);

        let x_bar = &st.x_curr + (&st.x_curr - &st.x_prev) * momentum;
        let y_bar = &st.y_curr + (&st.y_curr - &st.y_prev) * momentum;

        let mut lhs = DMatrix::<f64>::identity(n + m, n + m);
        lhs.view_mut((0, n), (n, m))
            .copy_from(&(a.transpose() * (cx * e)));
        lhs.view_mut((n, 0), (m, n)).copy_from(&(a * (-cy * e)));

        let rhs_x = &x_bar - (p.f().gradient(&x_bar) + a.tr_mul(&st.y_curr) * (1.0 - e)) * cx;
        let rhs_y = &y_bar - (p.g().gradient(&y_bar) - (a * &st.x_curr) * (1.0 - e)) * cy;
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&rhs_x);
        rhs.rows_mut(n, m).copy_from(&rhs_y);

        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular("bridge system is singular"))?;
        Ok(PdgmState {
            x_prev: st.x_curr.clone(),
            x_curr: sol.rows(0, n).into_owned(),
            y_prev: st.y_curr.clone(),
            y_curr: sol.rows(n, m).into_owned(),
            iter: st.iter + 1,
        })
    }

    /// Steps every state with both this map and `solver` and reports the
    /// largest coordinate difference.
    pub fn compare(&self, solver: &PdgmSolver, states: &[PdgmState]) -> Result<BridgeReport> {
        let mut worst = 0.0f64;
        for st in states {
            let ours = self.step(st)?;
            let theirs = solver.step(st)?;
            worst = worst
                .max((&ours.x_curr - &theirs.x_curr).amax())
                .max((&ours.y_curr - &theirs.y_curr).amax());
        }
        Ok(BridgeReport {
            max_discrepancy: worst,
            states_checked: states.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdgm::nag_sc;
    use crate::saddle::{gaussian_vector, generate_quadratic, seeded_rng, QuadraticMinimax};
    use nalgebra::dmatrix;

    fn random_states(n: usize, m: usize, count: usize, seed: u64) -> Vec<PdgmState> {
        let mut rng = seeded_rng(seed);
        (0..count)
            .map(|i| PdgmState {
                x_curr: gaussian_vector(&mut rng, n),
                x_prev: gaussian_vector(&mut rng, n),
                y_curr: gaussian_vector(&mut rng, m),
                y_prev: gaussian_vector(&mut rng, m),
                iter: i + 1,
            })
            .collect()
    }

    #[test]
    fn coefficients_recover_steps() {
        let q = generate_quadratic(4, 3, 1.0, 10.0, 2.0, 8.0, 2).unwrap();
        let p = q.to_problem();
        let c = q.constants();
        let b = discretization_bridge(&p, 1.0 / c.l_f, 1.0 / c.l_g).unwrap();
        assert!((b.beta1 * b.h / (1.0 + b.theta) - 1.0 / c.l_f).abs() <= 1e-15);
        assert!((b.beta2 * b.h / (1.0 + b.theta) - 1.0 / c.l_g).abs() <= 1e-15);
        assert!((b.gamma / b.h.sqrt() - 1.0 / b.theta).abs() < 1e-12);
    }

    #[test]
    fn matches_solver_step() {
        let q = generate_quadratic(8, 6, 1.0, 10.0, 1.0, 10.0, 4).unwrap();
        let p = q.to_problem();
        let c = q.constants();
        let b = discretization_bridge(&p, 1.0 / c.l_f, 1.0 / c.l_g).unwrap();
        let report = b
            .compare(&b.solver().unwrap(), &random_states(8, 6, 20, 11))
            .unwrap();
        assert_eq!(report.states_checked, 20);
        assert!(
            report.max_discrepancy <= 1e-10,
            "{}",
            report.max_discrepancy
        );
    }

    #[test]
    fn uncoupled_bridge_is_nag_sc() {
        let q = QuadraticMinimax::new(
            dmatrix![1.0, 0.2; 0.2, 3.0],
            dmatrix![0.5],
            nalgebra::DMatrix::zeros(1, 2),
        )
        .unwrap();
        let p = q.to_problem();
        let c = q.constants();
        let r = 1.0 / c.l_f;
        // keep theta on the F block so both momenta coincide
        let s = (c.mu_f * r / c.mu_g).min(1.0 / c.l_g);
        let b = discretization_bridge(&p, r, s).unwrap();
        assert!((b.theta - (c.mu_f * r).sqrt()).abs() < 1e-15);
        let x0 = nalgebra::dvector![1.0, -2.0];
        let xs = nag_sc(|x| p.f().gradient(x), c.mu_f, c.l_f, r, &x0, 30).unwrap();
        let mut st = PdgmState::initial(x0.clone(), nalgebra::dvector![0.0]);
        for x in xs.iter().skip(1) {
            st = b.step(&st).unwrap();
            assert!((&st.x_curr - x).amax() <= 1e-12);
        }
    }

    #[test]
    fn rejects_oversized_steps() {
        let q = generate_quadratic(3, 2, 1.0, 10.0, 1.0, 10.0, 1).unwrap();
        assert!(discretization_bridge(&q.to_problem(), 0.5, 0.1).is_err());
    }
}
