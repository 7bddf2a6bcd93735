//! Gaps, theoretical contraction factors, and empirical rate fitting.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::saddle::{ExactSolution, SaddleProblem};

/// Gaps in `[-NEGATIVE_GAP_TOLERANCE, 0)` are treated as round-off and clamped.
pub const NEGATIVE_GAP_TOLERANCE: f64 = 1e-13;

/// Default lower cutoff for rate fits.
pub const DEFAULT_FIT_FLOOR: f64 = 1e-12;

/// Minimum number of points a rate fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

pub const RATE_CSV_HEADER: &str = "rho_hat,rho_theory,window_start,window_end,residual";

/// `L(x, y*) - L(x*, y)`.
///
/// Evaluated as `D_F(x, x*) + D_G(y, y*)` plus the KKT residual terms
/// `<grad F(x*) + A^T y*, x - x*> + <grad G(y*) - A x*, y - y*>`, which equals
/// the Lagrangian difference exactly but avoids cancelling two large values
/// near the solution.
pub fn primal_dual_gap(
    p: &SaddleProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    exact: &ExactSolution,
) -> Result<f64> {
    p.check_point(x, y)?;
    p.check_point(&exact.x_star, &exact.y_star)?;
    clamp_gap(raw_gap(p, x, y, exact))
}

pub(crate) fn raw_gap(
    p: &SaddleProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    exact: &ExactSolution,
) -> f64 {
    gap_from_offset(p, exact, &(x - &exact.x_star), &(y - &exact.y_star))
}

/// The gap at `(x* + dx, y* + dy)`, without forming the point.
pub(crate) fn gap_from_offset(
    p: &SaddleProblem,
    exact: &ExactSolution,
    dx: &DVector<f64>,
    dy: &DVector<f64>,
) -> f64 {
    let (xs, ys) = (&exact.x_star, &exact.y_star);
    let (res_x, res_y) = kkt_residual_vectors(p, exact);
    p.f().bregman_change(xs, dx) + p.g().bregman_change(ys, dy) + res_x.dot(dx) + res_y.dot(dy)
}

/// `(grad F(x*) + A^T y*, grad G(y*) - A x*)`; zero for an exact solution.
pub(crate) fn kkt_residual_vectors(
    p: &SaddleProblem,
    exact: &ExactSolution,
) -> (DVector<f64>, DVector<f64>) {
    let (xs, ys) = (&exact.x_star, &exact.y_star);
    (p.grad_x(xs, ys), p.g().gradient(ys) - p.apply_a(xs))
}

pub(crate) fn clamp_gap(gap: f64) -> Result<f64> {
    if gap >= 0.0 || gap.is_nan() {
        Ok(gap)
    } else if gap >= -NEGATIVE_GAP_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::NegativeGap(gap))
    }
}

fn check_block(mu: f64, l: f64) -> Result<()> {
    if mu.is_finite() && l.is_finite() && mu > 0.0 && mu <= l {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "need 0 < mu <= L, got mu = {mu}, L = {l}"
        )))
    }
}

/// Optimal per-iteration factor `1 - min(sqrt(mu_f/l_f), sqrt(mu_g/l_g))`.
pub fn theoretical_rate(mu_f: f64, l_f: f64, mu_g: f64, l_g: f64) -> Result<f64> {
    check_block(mu_f, l_f)?;
    check_block(mu_g, l_g)?;
    Ok(1.0 - (mu_f / l_f).sqrt().min((mu_g / l_g).sqrt()))
}

/// Per-unit-time factor `exp(-min(sqrt(mu_f), sqrt(mu_g)))` of the inertial
/// dynamics.
pub fn theoretical_rate_continuous(mu_f: f64, mu_g: f64) -> Result<f64> {
    if !(mu_f > 0.0 && mu_g > 0.0) {
        return Err(Error::invalid(
            "strong convexity constants must be positive",
        ));
    }
    Ok((-mu_f.sqrt().min(mu_g.sqrt())).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateReport {
    /// Fitted contraction per iteration, or per unit time for time series.
    pub rho_hat: f64,
    /// Theoretical factor; NaN when none applies.
    pub rho_theory: f64,
    /// Inclusive indices of the first and last point used.
    pub fit_window: (usize, usize),
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
}

impl RateReport {
    pub fn with_theory(mut self, rho_theory: f64) -> Self {
        self.rho_theory = rho_theory;
        self
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            sig17(self.rho_hat),
            sig17(self.rho_theory),
            self.fit_window.0,
            self.fit_window.1,
            sig17(self.residual)
        )
    }
}

/// Fits `ln series[k] ~ a + k ln(rho)` over the iteration index.
pub fn fit_linear_rate(series: &[f64], floor: f64) -> Result<RateReport> {
    let abscissa: Vec<f64> = (0..series.len()).map(|k| k as f64).collect();
    fit_linear_rate_at(&abscissa, series, floor)
}

/// Fits `ln series[i] ~ a + t[i] ln(rho)`.
///
/// The fit uses entries in `(floor, max / 10]`, dropping the initial decade
/// and the floating-point floor. If fewer than [`MIN_FIT_POINTS`] entries fall
/// in that band (a flat series, say) all entries above `floor` are used.
pub fn fit_linear_rate_at(abscissa: &[f64], series: &[f64], floor: f64) -> Result<RateReport> {
    if abscissa.len() != series.len() {
        return Err(Error::DimensionMismatch {
            what: "rate fit abscissa",
            expected: series.len(),
            found: abscissa.len(),
        });
    }
    let above: Vec<usize> = (0..series.len())
        .filter(|&i| series[i].is_finite() && series[i] > floor)
        .collect();
    if above.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: above.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let max = above.iter().map(|&i| series[i]).fold(f64::MIN, f64::max);
    let band: Vec<usize> = above
        .iter()
        .copied()
        .filter(|&i| series[i] <= max * 0.1)
        .collect();
    let used = if band.len() >= MIN_FIT_POINTS {
        band
    } else {
        above
    };

    let count = used.len() as f64;
    let t_mean = used.iter().map(|&i| abscissa[i]).sum::<f64>() / count;
    let v_mean = used.iter().map(|&i| series[i].ln()).sum::<f64>() / count;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &used {
        let dt = abscissa[i] - t_mean;
        sxy += dt * (series[i].ln() - v_mean);
        sxx += dt * dt;
    }
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit abscissa has no spread"));
    }
    let slope = sxy / sxx;
    let intercept = v_mean - slope * t_mean;
    let sq: f64 = used
        .iter()
        .map(|&i| {
            let r = series[i].ln() - (intercept + slope * abscissa[i]);
            r * r
        })
        .sum();
    Ok(RateReport {
        rho_hat: slope.exp(),
        rho_theory: f64::NAN,
        fit_window: (used[0], used[used.len() - 1]),
        residual: (sq / count).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::QuadraticMinimax;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};

    #[test]
    fn theoretical_rate_values() {
        assert!(
            (theoretical_rate(1.0, 10.0, 1.0, 10.0).unwrap() - 0.683772233983162).abs() < 1e-12
        );
        assert_eq!(theoretical_rate(2.0, 2.0, 3.0, 3.0).unwrap(), 0.0);
        assert!((theoretical_rate(1.0, 100.0, 1.0, 25.0).unwrap() - 0.9).abs() < 1e-15);
        assert!(theoretical_rate(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(theoretical_rate(1.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn scalar_quadratic_gap() {
        let q = QuadraticMinimax::new(dmatrix![0.5], dmatrix![0.5], dmatrix![1.0]).unwrap();
        let p = q.to_problem();
        let exact = q.exact_solution();
        let gap = primal_dual_gap(&p, &dvector![1.0], &dvector![1.0], &exact).unwrap();
        assert!((gap - 1.0).abs() < 1e-15);
        assert_eq!(
            primal_dual_gap(&p, &dvector![0.0], &dvector![0.0], &exact).unwrap(),
            0.0
        );
    }

    #[test]
    fn gap_clamps_round_off_and_rejects_inconsistency() {
        assert_eq!(clamp_gap(-5e-14).unwrap(), 0.0);
        assert_eq!(clamp_gap(3.0).unwrap(), 3.0);
        assert!(matches!(clamp_gap(-1e-10), Err(Error::NegativeGap(_))));

        let q = QuadraticMinimax::new(dmatrix![0.5], dmatrix![0.5], dmatrix![1.0]).unwrap();
        let wrong = ExactSolution::new(dvector![1.0], dvector![1.0]);
        let err = primal_dual_gap(&q.to_problem(), &dvector![0.0], &dvector![0.0], &wrong);
        assert!(err.is_err());
    }

    #[test]
    fn exact_geometric_series() {
        let series: Vec<f64> = (0..100).map(|k| 3.0 * 0.9f64.powi(k)).collect();
        let rep = fit_linear_rate(&series, 1e-300).unwrap();
        assert!((rep.rho_hat - 0.9).abs() < 1e-9);
        assert!(rep.residual < 1e-12);
        // 0.9^22 is the first term at or below a tenth of the maximum
        assert_eq!(rep.fit_window, (22, 99));
    }

    #[test]
    fn constant_series_fits_unit_factor() {
        let rep = fit_linear_rate(&[4.2; 30], 1e-12).unwrap();
        assert!((rep.rho_hat - 1.0).abs() < 1e-9);
        assert_eq!(rep.fit_window, (0, 29));
    }

    #[test]
    fn noisy_geometric_series() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for &rho in &[0.5, 0.8, 0.95] {
            let series: Vec<f64> = (0..200)
                .map(|k| 10.0 * f64::powi(rho, k) * rng.random_range(0.95..=1.05))
                .collect();
            let rep = fit_linear_rate(&series, 1e-300).unwrap();
            assert!((rep.rho_hat - rho).abs() <= 0.01, "rho {rho}: {rep:?}");
        }
    }

    #[test]
    fn too_few_points() {
        let err = fit_linear_rate(&[1.0, 0.5, 0.25, 1e-20], 1e-12).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { usable: 3, .. }));
        assert!(fit_linear_rate_at(&[0.0; 3], &[1.0; 4], 0.0).is_err());
    }

    #[test]
    fn csv_row_layout() {
        let rep = RateReport {
            rho_hat: 0.5,
            rho_theory: f64::NAN,
            fit_window: (3, 40),
            residual: 0.0,
        };
        assert_eq!(
            rep.to_csv_row(),
            "5.0000000000000000e-1,NaN,3,40,0.0000000000000000e0"
        );
    }
}
