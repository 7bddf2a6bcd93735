use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::metrics::{clamp_gap, raw_gap};
use crate::saddle::{ExactSolution, SaddleProblem};

/// Phase-space point `(x, x', y, y')` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub x: DVector<f64>,
    pub v_x: DVector<f64>,
    pub y: DVector<f64>,
    pub v_y: DVector<f64>,
}

impl OdeState {
    /// Starts at rest.
    pub fn at_rest(t: f64, x: DVector<f64>, y: DVector<f64>) -> Self {
        let (n, m) = (x.len(), y.len());
        OdeState {
            t,
            x,
            v_x: DVector::zeros(n),
            y,
            v_y: DVector::zeros(m),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && [&self.x, &self.v_x, &self.y, &self.v_y]
                .iter()
                .all(|v| v.iter().all(|c| c.is_finite()))
    }

    pub(crate) fn check(&self, p: &SaddleProblem) -> Result<()> {
        check_dim("x", p.n(), self.x.len())?;
        check_dim("v_x", p.n(), self.v_x.len())?;
        check_dim("y", p.m(), self.y.len())?;
        check_dim("v_y", p.m(), self.v_y.len())
    }

    // flat layout [x, v_x, y, v_y] for the integrators
    pub(crate) fn pack(&self) -> DVector<f64> {
        let (n, m) = (self.x.len(), self.y.len());
        let mut z = DVector::zeros(2 * n + 2 * m);
        z.rows_mut(0, n).copy_from(&self.x);
        z.rows_mut(n, n).copy_from(&self.v_x);
        z.rows_mut(2 * n, m).copy_from(&self.y);
        z.rows_mut(2 * n + m, m).copy_from(&self.v_y);
        z
    }

    pub(crate) fn unpack(t: f64, z: &DVector<f64>, n: usize, m: usize) -> Self {
        OdeState {
            t,
            x: z.rows(0, n).into_owned(),
            v_x: z.rows(n, n).into_owned(),
            y: z.rows(2 * n, m).into_owned(),
            v_y: z.rows(2 * n + m, m).into_owned(),
        }
    }
}

/// Time derivative of an [`OdeState`].
#[derive(Clone, Debug, PartialEq)]
pub struct OdeDerivative {
    pub dx: DVector<f64>,
    pub dv_x: DVector<f64>,
    pub dy: DVector<f64>,
    pub dv_y: DVector<f64>,
}

/// Coefficients of
///
/// ```text
/// x'' + damp_x x' + beta1 (grad F(x) + A^T (y + gamma y')) = 0
/// y'' + damp_y y' + beta2 (grad G(y) - A (x + gamma x')) = 0
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicParams {
    pub gamma: f64,
    pub damp_x: f64,
    pub damp_y: f64,
    pub beta1: f64,
    pub beta2: f64,
}

fn extrapolation(p: &SaddleProblem) -> f64 {
    let c = p.constants();
    (1.0 / c.mu_f.sqrt()).max(1.0 / c.mu_g.sqrt())
}

impl DynamicParams {
    /// Damping `2 sqrt(mu)` per block, `gamma = max(1/sqrt(mu_f), 1/sqrt(mu_g))`.
    pub fn base(p: &SaddleProblem) -> Self {
        let c = p.constants();
        DynamicParams {
            gamma: extrapolation(p),
            damp_x: 2.0 * c.mu_f.sqrt(),
            damp_y: 2.0 * c.mu_g.sqrt(),
            beta1: 1.0,
            beta2: 1.0,
        }
    }

    /// Uniform damping `2 / gamma` with forces scaled by `beta1`, `beta2`.
    pub fn rescaled(p: &SaddleProblem, beta1: f64, beta2: f64) -> Result<Self> {
        let gamma = extrapolation(p);
        let params = DynamicParams {
            gamma,
            damp_x: 2.0 / gamma,
            damp_y: 2.0 / gamma,
            beta1,
            beta2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.damp_x, self.damp_y, self.beta1, self.beta2];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "dynamic parameters must be positive and finite: {self:?}"
            )))
        }
    }
}

pub fn ode_rhs(p: &SaddleProblem, params: &DynamicParams, st: &OdeState) -> Result<OdeDerivative> {
    st.check(p)?;
    let look_y = &st.y + &st.v_y * params.gamma;
    let look_x = &st.x + &st.v_x * params.gamma;
    let force_x = p.f().gradient(&st.x) + p.apply_at(&look_y);
    let force_y = p.g().gradient(&st.y) - p.apply_a(&look_x);
    Ok(OdeDerivative {
        dx: st.v_x.clone(),
        dv_x: &st.v_x * -params.damp_x - force_x * params.beta1,
        dy: st.v_y.clone(),
        dv_y: &st.v_y * -params.damp_y - force_y * params.beta2,
    })
}

// Same as `ode_rhs` on the packed layout, without dimension checks.
pub(crate) fn packed_rhs(
    p: &SaddleProblem,
    params: &DynamicParams,
    z: &DVector<f64>,
) -> DVector<f64> {
    let (n, m) = (p.n(), p.m());
    let x = z.rows(0, n).into_owned();
    let y = z.rows(2 * n, m).into_owned();
    let look_y = &y + z.rows(2 * n + m, m) * params.gamma;
    let look_x = &x + z.rows(n, n) * params.gamma;
    let force_x = p.f().gradient(&x) + p.apply_at(&look_y);
    let force_y = p.g().gradient(&y) - p.apply_a(&look_x);
    assemble(params, z, force_x, force_y, n, m)
}

/// The same field in offset coordinates `w = z - (x*, 0, y*, 0)`.
///
/// `kkt` holds `(grad F(x*) + A^T y*, grad G(y*) - A x*)`, which keeps the
/// field exact even if the supplied solution is slightly off. Gradients
/// are taken as changes from `x*`, `y*`, so small offsets keep their full
/// relative precision instead of being rounded against the solution.
pub(crate) fn packed_rhs_offset(
    p: &SaddleProblem,
    params: &DynamicParams,
    exact: &ExactSolution,
    kkt: &(DVector<f64>, DVector<f64>),
    w: &DVector<f64>,
) -> DVector<f64> {
    let (n, m) = (p.n(), p.m());
    let dx = w.rows(0, n).into_owned();
    let dy = w.rows(2 * n, m).into_owned();
    let look_y = &dy + w.rows(2 * n + m, m) * params.gamma;
    let look_x = &dx + w.rows(n, n) * params.gamma;
    let force_x = p.f().gradient_change(&exact.x_star, &dx) + &kkt.0 + p.apply_at(&look_y);
    let force_y = p.g().gradient_change(&exact.y_star, &dy) + &kkt.1 - p.apply_a(&look_x);
    assemble(params, w, force_x, force_y, n, m)
}

fn assemble(
    params: &DynamicParams,
    z: &DVector<f64>,
    force_x: DVector<f64>,
    force_y: DVector<f64>,
    n: usize,
    m: usize,
) -> DVector<f64> {
    let v_x = z.rows(n, n);
    let v_y = z.rows(2 * n + m, m);
    let mut out = DVector::zeros(z.len());
    out.rows_mut(0, n).copy_from(&v_x);
    out.rows_mut(n, n)
        .copy_from(&(v_x * -params.damp_x - force_x * params.beta1));
    out.rows_mut(2 * n, m).copy_from(&v_y);
    out.rows_mut(2 * n + m, m)
        .copy_from(&(v_y * -params.damp_y - force_y * params.beta2));
    out
}

/// `gamma^2 gap + ||u||^2 / (2 beta1) + ||v||^2 / (2 beta2)` with
/// `u = x - x* + gamma x'` and `v = y - y* + gamma y'`.
pub fn continuous_energy(
    p: &SaddleProblem,
    params: &DynamicParams,
    st: &OdeState,
    exact: &ExactSolution,
) -> Result<f64> {
    st.check(p)?;
    p.check_point(&exact.x_star, &exact.y_star)?;
    let gap = clamp_gap(raw_gap(p, &st.x, &st.y, exact))?;
    let dx = &st.x - &exact.x_star;
    let dy = &st.y - &exact.y_star;
    Ok(energy_from_offset(params, &dx, &st.v_x, &dy, &st.v_y, gap))
}

pub(crate) fn energy_from_offset(
    params: &DynamicParams,
    dx: &DVector<f64>,
    v_x: &DVector<f64>,
    dy: &DVector<f64>,
    v_y: &DVector<f64>,
    gap: f64,
) -> f64 {
    let g = params.gamma;
    let u = dx + v_x * g;
    let v = dy + v_y * g;
    g * g * gap + u.norm_squared() / (2.0 * params.beta1) + v.norm_squared() / (2.0 * params.beta2)
}
