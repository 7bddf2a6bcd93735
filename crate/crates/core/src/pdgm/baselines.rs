use nalgebra::{DMatrix, DVector};

use super::log::{IterateLog, IterateRecord};
use crate::error::{Error, Result};
use crate::metrics::{clamp_gap, raw_gap};
use crate::saddle::{ExactSolution, SaddleProblem};

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Nesterov's method for `mu`-strongly convex, `l`-smooth functions:
///
/// ```text
/// x_bar_k = x_k + (1 - sqrt(mu r)) / (1 + sqrt(mu r)) (x_k - x_{k-1})
/// x_{k+1} = x_bar_k - r grad(x_bar_k)
/// ```
///
/// Starts from `x_1 = x_0` and returns `x_1, ..., x_{max_iters}`.
pub fn nag_sc<G>(
    grad: G,
    mu: f64,
    l: f64,
    r: f64,
    x0: &DVector<f64>,
    max_iters: usize,
) -> Result<Vec<DVector<f64>>>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::invalid(format!(
            "need 0 < mu <= l, got mu = {mu}, l = {l}"
        )));
    }
    if !(r > 0.0 && r * l <= 1.0 + 1e-12) {
        return Err(Error::invalid(format!("step r = {r} must lie in (0, 1/l]")));
    }
    let q = (mu * r).sqrt();
    let momentum = (1.0 - q) / (1.0 + q);
    let mut iterates = Vec::with_capacity(max_iters);
    if max_iters == 0 {
        return Ok(iterates);
    }
    let mut prev = x0.clone();
    let mut curr = x0.clone();
    iterates.push(curr.clone());
    for k in 2..=max_iters {
        let x_bar = &curr + (&curr - &prev) * momentum;
        let next = &x_bar - grad(&x_bar) * r;
        if !all_finite(&next) {
            return Err(Error::Diverged { iteration: k });
        }
        prev = std::mem::replace(&mut curr, next);
        iterates.push(curr.clone());
    }
    Ok(iterates)
}

/// `||A||_2` by power iteration on `A^T A` from the normalized all-ones vector.
pub fn spectral_norm(a: &DMatrix<f64>, iters: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..iters {
        let w = a.tr_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
    }
    (a * &v).norm()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdaConfig {
    pub step_x: f64,
    pub step_y: f64,
    pub max_iters: usize,
    pub gap_floor: f64,
}

impl GdaConfig {
    /// Steps `1/(l_f + ||A||)` and `1/(l_g + ||A||)`, with `||A||` from 100
    /// power iterations.
    pub fn default_for(p: &SaddleProblem) -> Self {
        let c = p.constants();
        let norm_a = spectral_norm(p.coupling(), 100);
        GdaConfig {
            step_x: 1.0 / (c.l_f + norm_a),
            step_y: 1.0 / (c.l_g + norm_a),
            max_iters: super::DEFAULT_MAX_ITERS,
            gap_floor: super::DEFAULT_GAP_FLOOR,
        }
    }
}

fn plain_record(
    p: &SaddleProblem,
    k: usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
    exact: &ExactSolution,
) -> Result<IterateRecord> {
    let gap = clamp_gap(raw_gap(p, x, y, exact))?;
    let x_err_sq = (x - &exact.x_star).norm_squared();
    let y_err_sq = (y - &exact.y_star).norm_squared();
    Ok(IterateRecord {
        k,
        gap,
        iterate_gap: x_err_sq + y_err_sq,
        energy: f64::NAN,
        x_err_sq,
        y_err_sq,
    })
}

/// Simultaneous gradient descent-ascent:
/// `x_{k+1} = x_k - step_x (grad F(x_k) + A^T y_k)`,
/// `y_{k+1} = y_k + step_y (A x_k - grad G(y_k))`.
pub fn gda(
    p: &SaddleProblem,
    cfg: &GdaConfig,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    exact: &ExactSolution,
) -> Result<IterateLog> {
    if !(cfg.step_x > 0.0 && cfg.step_y > 0.0) {
        return Err(Error::invalid("step sizes must be positive"));
    }
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    p.check_point(x0, y0)?;
    p.check_point(&exact.x_star, &exact.y_star)?;
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut log = IterateLog::default();
    for k in 1..=cfg.max_iters {
        let rec = plain_record(p, k, &x, &y, exact)?;
        log.records.push(rec);
        if rec.gap <= cfg.gap_floor || k == cfg.max_iters {
            break;
        }
        let gx = p.grad_x(&x, &y);
        let gy = p.grad_y(&x, &y);
        x -= gx * cfg.step_x;
        y += gy * cfg.step_y;
        if !(all_finite(&x) && all_finite(&y)) {
            return Err(Error::Diverged { iteration: k + 1 });
        }
    }
    Ok(log)
}

/// NAG-SC applied separately to `min F` (step `r`) and `min G` (step `s`),
/// ignoring the coupling. `exact` must be the saddle point of the decoupled
/// problem, i.e. the minimizers of `F` and `G`. This is the reference the
/// coupled method reduces to when `A = 0`.
#[allow(clippy::too_many_arguments)]
pub fn nag_sc_decoupled(
    p: &SaddleProblem,
    r: f64,
    s: f64,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    max_iters: usize,
    gap_floor: f64,
    exact: &ExactSolution,
) -> Result<IterateLog> {
    p.check_point(x0, y0)?;
    p.check_point(&exact.x_star, &exact.y_star)?;
    let c = p.constants();
    let xs = nag_sc(|x| p.f().gradient(x), c.mu_f, c.l_f, r, x0, max_iters)?;
    let ys = nag_sc(|y| p.g().gradient(y), c.mu_g, c.l_g, s, y0, max_iters)?;
    let decoupled = p.decoupled();
    let mut log = IterateLog::default();
    for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
        let rec = plain_record(&decoupled, i + 1, x, y, exact)?;
        log.records.push(rec);
        if rec.gap <= gap_floor {
            break;
        }
    }
    Ok(log)
}
