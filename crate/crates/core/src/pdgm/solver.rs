use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::log::{IterateLog, IterateRecord};
use crate::error::{check_dim, Error, Result};
use crate::metrics::{clamp_gap, raw_gap};
use crate::saddle::{Constants, ExactSolution, SaddleProblem};

pub const DEFAULT_GAP_FLOOR: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 2000;

/// `theta = min(sqrt(mu_f r), sqrt(mu_g s))`.
pub fn compute_theta(mu_f: f64, r: f64, mu_g: f64, s: f64) -> Result<f64> {
    for (name, v) in [("mu_f", mu_f), ("r", r), ("mu_g", mu_g), ("s", s)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok((mu_f * r).sqrt().min((mu_g * s).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdgmConfig {
    /// Step size of the `F` block, at most `1/l_f`.
    pub r: f64,
    /// Step size of the `G` block, at most `1/l_g`.
    pub s: f64,
    /// Number of logged iterates, counting the starting point as `k = 1`.
    pub max_iters: usize,
    /// Stop once the primal-dual gap is at or below this value.
    pub gap_floor: f64,
}

impl PdgmConfig {
    /// `r = 1/l_f`, `s = 1/l_g`.
    pub fn optimal(c: &Constants) -> Self {
        PdgmConfig {
            r: 1.0 / c.l_f,
            s: 1.0 / c.l_g,
            max_iters: DEFAULT_MAX_ITERS,
            gap_floor: DEFAULT_GAP_FLOOR,
        }
    }

    pub fn validate(&self, c: &Constants) -> Result<()> {
        // relative slack so that r = 1/l_f computed in floating point passes
        let ok = |step: f64, l: f64| step.is_finite() && step > 0.0 && step * l <= 1.0 + 1e-12;
        if !ok(self.r, c.l_f) {
            return Err(Error::invalid(format!(
                "r must satisfy 0 < r <= 1/l_f = {}, got {}",
                1.0 / c.l_f,
                self.r
            )));
        }
        if !ok(self.s, c.l_g) {
            return Err(Error::invalid(format!(
                "s must satisfy 0 < s <= 1/l_g = {}, got {}",
                1.0 / c.l_g,
                self.s
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.gap_floor.is_nan() || self.gap_floor < 0.0 {
            return Err(Error::invalid("gap_floor must be nonnegative"));
        }
        Ok(())
    }
}

/// Current and previous iterates; `iter` is the index `k` of the current one.
#[derive(Clone, Debug, PartialEq)]
pub struct PdgmState {
    pub x_curr: DVector<f64>,
    pub x_prev: DVector<f64>,
    pub y_curr: DVector<f64>,
    pub y_prev: DVector<f64>,
    pub iter: usize,
}

impl PdgmState {
    /// `x_1 = x_0`, `y_1 = y_0`.
    pub fn initial(x0: DVector<f64>, y0: DVector<f64>) -> Self {
        PdgmState {
            x_prev: x0.clone(),
            x_curr: x0,
            y_prev: y0.clone(),
            y_curr: y0,
            iter: 1,
        }
    }

    fn is_finite(&self) -> bool {
        self.x_curr
            .iter()
            .chain(self.y_curr.iter())
            .all(|v| v.is_finite())
    }
}

/// Solver for one problem and one configuration.
///
/// The implicit coupling is resolved by substituting the dual update into the
/// primal one, which leaves the SPD system `(I + (rs/theta^2) A^T A) x_{k+1} =
/// rhs`. Its Cholesky factor is computed once here.
#[derive(Clone, Debug)]
pub struct PdgmSolver {
    problem: SaddleProblem,
    cfg: PdgmConfig,
    theta: f64,
    solve_op: Cholesky<f64, Dyn>,
}

impl PdgmSolver {
    pub fn new(problem: &SaddleProblem, cfg: PdgmConfig) -> Result<Self> {
        let c = problem.constants();
        cfg.validate(&c)?;
        let theta = compute_theta(c.mu_f, cfg.r, c.mu_g, cfg.s)?;
        let a = problem.coupling();
        let n = problem.n();
        let weight = cfg.r * cfg.s / (theta * theta);
        let op = DMatrix::identity(n, n) + a.tr_mul(a) * weight;
        let solve_op = op
            .cholesky()
            .ok_or(Error::Singular("I + (rs/theta^2) A^T A failed to factor"))?;
        Ok(PdgmSolver {
            problem: problem.clone(),
            cfg,
            theta,
            solve_op,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn config(&self) -> &PdgmConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &SaddleProblem {
        &self.problem
    }

    /// Applies `(I + (rs/theta^2) A^T A)^{-1}`.
    pub fn apply_solve_op(&self, v: &DVector<f64>) -> DVector<f64> {
        self.solve_op.solve(v)
    }

    fn check_state(&self, st: &PdgmState) -> Result<()> {
        let (n, m) = (self.problem.n(), self.problem.m());
        check_dim("x_curr", n, st.x_curr.len())?;
        check_dim("x_prev", n, st.x_prev.len())?;
        check_dim("y_curr", m, st.y_curr.len())?;
        check_dim("y_prev", m, st.y_prev.len())
    }

    /// One iteration `k -> k + 1`.
    pub fn step(&self, st: &PdgmState) -> Result<PdgmState> {
        self.check_state(st)?;
        let p = &self.problem;
        let (r, s, theta) = (self.cfg.r, self.cfg.s, self.theta);
        let momentum = (1.0 - theta) / (1.0 + theta);
        let inv_theta = 1.0 / theta;

        let x_bar = &st.x_curr + (&st.x_curr - &st.x_prev) * momentum;
        let y_bar = &st.y_curr + (&st.y_curr - &st.y_prev) * momentum;

        let grad_g = p.g().gradient(&y_bar);
        let ax = p.apply_a(&st.x_curr);
        let y_hat = &y_bar - (&grad_g - &ax * (1.0 - inv_theta)) * s;

        let dual_mix = &st.y_curr * (1.0 - inv_theta) + &y_hat * inv_theta;
        let rhs = &x_bar - (p.f().gradient(&x_bar) + p.apply_at(&dual_mix)) * r;
        let x_next = self.solve_op.solve(&rhs);

        let x_extra = &st.x_curr + (&x_next - &st.x_curr) * inv_theta;
        let y_next = &y_bar - (grad_g - p.apply_a(&x_extra)) * s;

        let next = PdgmState {
            x_prev: st.x_curr.clone(),
            x_curr: x_next,
            y_prev: st.y_curr.clone(),
            y_curr: y_next,
            iter: st.iter + 1,
        };
        if !next.is_finite() {
            return Err(Error::Diverged {
                iteration: next.iter,
            });
        }
        Ok(next)
    }

    /// Residual of the implicit coupled update equations for `prev -> next`,
    /// divided by `1 + ||x_{k+1}|| + ||y_{k+1}||`.
    pub fn coupled_residual(&self, prev: &PdgmState, next: &PdgmState) -> Result<f64> {
        self.check_state(prev)?;
        self.check_state(next)?;
        let p = &self.problem;
        let (r, s, theta) = (self.cfg.r, self.cfg.s, self.theta);
        let momentum = (1.0 - theta) / (1.0 + theta);
        let x_bar = &prev.x_curr + (&prev.x_curr - &prev.x_prev) * momentum;
        let y_bar = &prev.y_curr + (&prev.y_curr - &prev.y_prev) * momentum;
        let y_extra = &prev.y_curr + (&next.y_curr - &prev.y_curr) / theta;
        let x_extra = &prev.x_curr + (&next.x_curr - &prev.x_curr) / theta;
        let res_x = &next.x_curr - (&x_bar - (p.f().gradient(&x_bar) + p.apply_at(&y_extra)) * r);
        let res_y = &next.y_curr - (&y_bar - (p.g().gradient(&y_bar) - p.apply_a(&x_extra)) * s);
        let scale = 1.0 + next.x_curr.norm() + next.y_curr.norm();
        Ok((res_x.norm_squared() + res_y.norm_squared()).sqrt() / scale)
    }

    /// `E_k = gap_k + ||u_k||^2 / (2r) + ||v_k||^2 / (2s)` with
    /// `u_k = theta (x_k - x*) + (1 - theta)(x_k - x_{k-1})` and `v_k` alike.
    pub fn discrete_energy(&self, st: &PdgmState, exact: &ExactSolution) -> Result<f64> {
        self.check_state(st)?;
        self.problem.check_point(&exact.x_star, &exact.y_star)?;
        Ok(self.record(st, exact)?.energy)
    }

    fn record(&self, st: &PdgmState, exact: &ExactSolution) -> Result<IterateRecord> {
        let theta = self.theta;
        let dx = &st.x_curr - &exact.x_star;
        let dy = &st.y_curr - &exact.y_star;
        let u = &dx * theta + (&st.x_curr - &st.x_prev) * (1.0 - theta);
        let v = &dy * theta + (&st.y_curr - &st.y_prev) * (1.0 - theta);
        let gap = clamp_gap(raw_gap(&self.problem, &st.x_curr, &st.y_curr, exact))?;
        let x_err_sq = dx.norm_squared();
        let y_err_sq = dy.norm_squared();
        Ok(IterateRecord {
            k: st.iter,
            gap,
            iterate_gap: x_err_sq + y_err_sq,
            energy: gap
                + u.norm_squared() / (2.0 * self.cfg.r)
                + v.norm_squared() / (2.0 * self.cfg.s),
            x_err_sq,
            y_err_sq,
        })
    }

    /// Runs from `x_1 = x_0`, `y_1 = y_0` and logs every iterate.
    pub fn run(
        &self,
        x0: &DVector<f64>,
        y0: &DVector<f64>,
        exact: &ExactSolution,
    ) -> Result<IterateLog> {
        self.run_observed(x0, y0, exact, |_, _| {})
    }

    /// Like [`run`](Self::run), calling `observe` with each state and its log
    /// record.
    pub fn run_observed<O>(
        &self,
        x0: &DVector<f64>,
        y0: &DVector<f64>,
        exact: &ExactSolution,
        mut observe: O,
    ) -> Result<IterateLog>
    where
        O: FnMut(&PdgmState, &IterateRecord),
    {
        self.problem.check_point(x0, y0)?;
        self.problem.check_point(&exact.x_star, &exact.y_star)?;
        let mut st = PdgmState::initial(x0.clone(), y0.clone());
        let mut log = IterateLog::default();
        loop {
            let rec = self.record(&st, exact)?;
            observe(&st, &rec);
            log.records.push(rec);
            if rec.gap <= self.cfg.gap_floor || st.iter >= self.cfg.max_iters {
                return Ok(log);
            }
            st = self.step(&st)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::{generate_quadratic, QuadraticMinimax};
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn theta_examples() {
        assert!((compute_theta(1.0, 0.1, 1.0, 0.1).unwrap() - 0.1f64.sqrt()).abs() < 1e-15);
        assert_eq!(compute_theta(1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(compute_theta(4.0, 0.25, 1.0, 0.25).unwrap(), 0.5);
        assert!(compute_theta(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(compute_theta(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let c = Constants::new(1.0, 10.0, 1.0, 4.0).unwrap();
        let cfg = PdgmConfig::optimal(&c);
        assert!(cfg.validate(&c).is_ok());
        assert!(PdgmConfig { r: 0.2, ..cfg }.validate(&c).is_err());
        assert!(PdgmConfig { s: 0.0, ..cfg }.validate(&c).is_err());
        assert!(PdgmConfig {
            max_iters: 0,
            ..cfg
        }
        .validate(&c)
        .is_err());
    }

    /// Hand-solved coupled update for scalar problems `F = a x^2`,
    /// `G = b y^2`, coupling `c`, by Cramer's rule on
    ///   x' + (r c / theta) y' = x_bar - 2 r a x_bar - r c (1 - 1/theta) y
    ///  -(s c / theta) x' + y' = y_bar - 2 s b y_bar + s c (1 - 1/theta) x
    fn scalar_coupled_oracle(
        a: f64,
        b: f64,
        c: f64,
        r: f64,
        s: f64,
        theta: f64,
        st: &PdgmState,
    ) -> (f64, f64) {
        let mom = (1.0 - theta) / (1.0 + theta);
        let (x, xp, y, yp) = (st.x_curr[0], st.x_prev[0], st.y_curr[0], st.y_prev[0]);
        let xb = x + mom * (x - xp);
        let yb = y + mom * (y - yp);
        let (a11, a12) = (1.0, r * c / theta);
        let (a21, a22) = (-s * c / theta, 1.0);
        let b1 = xb - 2.0 * r * a * xb - r * c * (1.0 - 1.0 / theta) * y;
        let b2 = yb - 2.0 * s * b * yb + s * c * (1.0 - 1.0 / theta) * x;
        let det = a11 * a22 - a12 * a21;
        ((b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det)
    }

    #[test]
    fn scalar_step_matches_coupled_oracle() {
        let q = QuadraticMinimax::new(dmatrix![0.5], dmatrix![0.5], dmatrix![1.0]).unwrap();
        let solver = PdgmSolver::new(&q.to_problem(), PdgmConfig::optimal(&q.constants())).unwrap();
        assert_eq!(solver.theta(), 1.0);
        let st = PdgmState::initial(dvector![1.0], dvector![0.0]);
        let next = solver.step(&st).unwrap();
        let (xo, yo) = scalar_coupled_oracle(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, &st);
        assert!((next.x_curr[0] - xo).abs() < 1e-12);
        assert!((next.y_curr[0] - yo).abs() < 1e-12);

        // an asymmetric case with momentum and history
        let q = QuadraticMinimax::new(dmatrix![1.5], dmatrix![0.25], dmatrix![-2.0]).unwrap();
        let cfg = PdgmConfig {
            r: 0.2,
            s: 1.5,
            ..PdgmConfig::optimal(&q.constants())
        };
        let solver = PdgmSolver::new(&q.to_problem(), cfg).unwrap();
        let st = PdgmState {
            x_curr: dvector![0.7],
            x_prev: dvector![1.1],
            y_curr: dvector![-0.3],
            y_prev: dvector![0.4],
            iter: 5,
        };
        let next = solver.step(&st).unwrap();
        let (xo, yo) = scalar_coupled_oracle(1.5, 0.25, -2.0, 0.2, 1.5, solver.theta(), &st);
        assert!((next.x_curr[0] - xo).abs() < 1e-12);
        assert!((next.y_curr[0] - yo).abs() < 1e-12);
        assert_eq!(next.iter, 6);
        assert_eq!(next.x_prev, st.x_curr);
    }

    #[test]
    fn saddle_point_is_stationary() {
        let q = generate_quadratic(6, 4, 1.0, 10.0, 1.0, 10.0, 3).unwrap();
        let solver = PdgmSolver::new(&q.to_problem(), PdgmConfig::optimal(&q.constants())).unwrap();
        let exact = q.exact_solution();
        let st = PdgmState::initial(exact.x_star.clone(), exact.y_star.clone());
        let next = solver.step(&st).unwrap();
        assert!((&next.x_curr - &exact.x_star).amax() <= 1e-12);
        assert!((&next.y_curr - &exact.y_star).amax() <= 1e-12);
    }

    #[test]
    fn solve_op_inverts_operator() {
        let q = generate_quadratic(8, 5, 1.0, 20.0, 1.0, 5.0, 4).unwrap();
        let p = q.to_problem();
        let solver = PdgmSolver::new(&p, PdgmConfig::optimal(&q.constants())).unwrap();
        let cfg = solver.config();
        let w = cfg.r * cfg.s / solver.theta().powi(2);
        let v = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin() + 0.1);
        let op_v = &v + p.coupling().tr_mul(&(p.coupling() * &v)) * w;
        let back = solver.apply_solve_op(&op_v);
        assert!((&back - &v).norm() <= 1e-10 * v.norm());
    }

    #[test]
    fn scalar_initial_energy() {
        let q = QuadraticMinimax::new(dmatrix![0.5], dmatrix![0.5], dmatrix![1.0]).unwrap();
        let solver = PdgmSolver::new(&q.to_problem(), PdgmConfig::optimal(&q.constants())).unwrap();
        let st = PdgmState::initial(dvector![1.0], dvector![0.0]);
        let e = solver.discrete_energy(&st, &q.exact_solution()).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        let at_solution = PdgmState::initial(dvector![0.0], dvector![0.0]);
        assert_eq!(
            solver
                .discrete_energy(&at_solution, &q.exact_solution())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn run_from_solution_stops_immediately() {
        let q = generate_quadratic(5, 5, 1.0, 10.0, 1.0, 10.0, 8).unwrap();
        let solver = PdgmSolver::new(&q.to_problem(), PdgmConfig::optimal(&q.constants())).unwrap();
        let exact = q.exact_solution();
        let log = solver.run(&exact.x_star, &exact.y_star, &exact).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.records[0].k, 1);
        assert!(log.records[0].gap <= 1e-12);
    }

    #[test]
    fn divergence_is_reported_with_index() {
        let q = QuadraticMinimax::new(dmatrix![0.5], dmatrix![0.5], dmatrix![1.0]).unwrap();
        let solver = PdgmSolver::new(&q.to_problem(), PdgmConfig::optimal(&q.constants())).unwrap();
        let st = PdgmState::initial(dvector![f64::INFINITY], dvector![0.0]);
        assert!(matches!(
            solver.step(&st),
            Err(Error::Diverged { iteration: 2 })
        ));
    }

    #[test]
    fn rejects_state_of_wrong_size() {
        let q = QuadraticMinimax::new(dmatrix![0.5], dmatrix![0.5], dmatrix![1.0]).unwrap();
        let solver = PdgmSolver::new(&q.to_problem(), PdgmConfig::optimal(&q.constants())).unwrap();
        let st = PdgmState::initial(dvector![1.0, 2.0], dvector![0.0]);
        assert!(matches!(
            solver.step(&st),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
