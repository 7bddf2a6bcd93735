use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use super::system::{energy_from_offset, packed_rhs, packed_rhs_offset, DynamicParams, OdeState};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::metrics::{clamp_gap, gap_from_offset, kkt_residual_vectors};
use crate::saddle::{ExactSolution, SaddleProblem};

pub const TRAJECTORY_CSV_HEADER: &str = "t,gap,energy,x_err_sq,y_err_sq,vx_sq,vy_sq";
pub const DEFAULT_REPORT_POINTS: usize = 300;
/// Adaptive steps below this abort the integration.
pub const MIN_STEP: f64 = 1e-12;

const INITIAL_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Classical RK4 on a uniform grid; the last step is shortened to land on
    /// `t_end`.
    FixedRk4 { step: f64 },
    /// Dormand-Prince 5(4) with PI step control.
    AdaptiveRk45,
}

/// How the adaptive local error is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorControl {
    /// Per component `tol + tol * |z_i|`.
    #[default]
    Mixed,
    /// Integrate the offset `w = z - (x*, 0, y*, 0)` from the equilibrium
    /// and scale the error by `tol * max_i |w_i|`.
    ///
    /// The state decays to the equilibrium exponentially. In absolute
    /// coordinates both a fixed error floor and the rounding of `z` itself
    /// eventually swamp what is left of the offset; here the offset keeps
    /// its relative precision throughout.
    Deviation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub method: Method,
    pub tol: f64,
    pub control: ErrorControl,
    pub report_points: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            method: Method::AdaptiveRk45,
            tol: 1e-9,
            control: ErrorControl::Mixed,
            report_points: DEFAULT_REPORT_POINTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub state: OdeState,
    pub gap: f64,
    pub energy: f64,
    pub x_err_sq: f64,
    pub y_err_sq: f64,
}

impl TrajectoryPoint {
    // `offset` holds `(x - x*, v_x, y - y*, v_y)`.
    fn from_offset(
        params: &DynamicParams,
        p: &SaddleProblem,
        exact: &ExactSolution,
        t: f64,
        offset: &DVector<f64>,
    ) -> Result<Self> {
        let w = OdeState::unpack(t, offset, p.n(), p.m());
        let gap = clamp_gap(gap_from_offset(p, exact, &w.x, &w.y))?;
        let energy = energy_from_offset(params, &w.x, &w.v_x, &w.y, &w.v_y, gap);
        Ok(TrajectoryPoint {
            gap,
            energy,
            x_err_sq: w.x.norm_squared(),
            y_err_sq: w.y.norm_squared(),
            state: OdeState {
                x: &w.x + &exact.x_star,
                y: &w.y + &exact.y_star,
                ..w
            },
        })
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub final_step: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// One point per accepted step, starting with the initial state.
    pub steps: Vec<TrajectoryPoint>,
    /// Uniform report grid from `t0` to `t_end`, by cubic Hermite
    /// interpolation between accepted steps.
    pub report: Vec<TrajectoryPoint>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn report_times(&self) -> Vec<f64> {
        self.report.iter().map(|p| p.t()).collect()
    }

    pub fn report_gaps(&self) -> Vec<f64> {
        self.report.iter().map(|p| p.gap).collect()
    }

    pub fn report_energies(&self) -> Vec<f64> {
        self.report.iter().map(|p| p.energy).collect()
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.steps
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Writes the report grid.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        for pt in &self.report {
            let s = &pt.state;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                sig17(s.t),
                sig17(pt.gap),
                sig17(pt.energy),
                sig17(pt.x_err_sq),
                sig17(pt.y_err_sq),
                sig17(s.v_x.norm_squared()),
                sig17(s.v_y.norm_squared()),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

// Dormand-Prince tableau. The system is autonomous, so no stage times.
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn finite(z: &DVector<f64>) -> bool {
    z.iter().all(|v| v.is_finite())
}

// Accepted nodes with derivatives, for Hermite output.
struct Nodes {
    t: Vec<f64>,
    z: Vec<DVector<f64>>,
    f: Vec<DVector<f64>>,
}

impl Nodes {
    fn push(&mut self, t: f64, z: DVector<f64>, f: DVector<f64>) {
        self.t.push(t);
        self.z.push(z);
        self.f.push(f);
    }

    fn interpolate(&self, t: f64) -> DVector<f64> {
        let last = self.t.len() - 1;
        if last == 0 {
            return self.z[0].clone();
        }
        let i = match self.t.partition_point(|&ti| ti <= t) {
            0 => 0,
            k => (k - 1).min(last - 1),
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.z[i] * h00
            + &self.f[i] * (h10 * h)
            + &self.z[i + 1] * h01
            + &self.f[i + 1] * (h11 * h)
    }
}

/// Integrates from `init.t` to `t_end`. Gaps and energies are measured
/// against `exact`.
pub fn integrate(
    p: &SaddleProblem,
    params: &DynamicParams,
    init: &OdeState,
    t_end: f64,
    opts: &IntegratorOptions,
    exact: &ExactSolution,
) -> Result<Trajectory> {
    init.check(p)?;
    p.check_point(&exact.x_star, &exact.y_star)?;
    params.validate()?;
    let t0 = init.t;
    if !(t_end.is_finite() && t0.is_finite() && t_end > t0) {
        return Err(Error::invalid(format!(
            "need t_end > t0, got t0 = {t0}, t_end = {t_end}"
        )));
    }
    if !init.is_finite() {
        return Err(Error::IntegrationDiverged { t: t0 });
    }
    if opts.report_points < 2 {
        return Err(Error::invalid("need at least 2 report points"));
    }
    let star = OdeState::at_rest(t0, exact.x_star.clone(), exact.y_star.clone()).pack();
    let offset_frame =
        opts.control == ErrorControl::Deviation && opts.method == Method::AdaptiveRk45;
    let kkt = kkt_residual_vectors(p, exact);
    let rhs = |z: &DVector<f64>| {
        if offset_frame {
            packed_rhs_offset(p, params, exact, &kkt, z)
        } else {
            packed_rhs(p, params, z)
        }
    };

    let z0 = if offset_frame {
        init.pack() - &star
    } else {
        init.pack()
    };
    let mut nodes = Nodes {
        t: Vec::new(),
        z: Vec::new(),
        f: Vec::new(),
    };
    nodes.push(t0, z0.clone(), rhs(&z0));

    let stats = match opts.method {
        Method::FixedRk4 { step } => {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::invalid(format!(
                    "fixed step must be positive, got {step}"
                )));
            }
            fixed_rk4(&rhs, &mut nodes, t_end, step)?
        }
        Method::AdaptiveRk45 => {
            if !(opts.tol.is_finite() && opts.tol > 0.0) {
                return Err(Error::invalid(format!(
                    "tol must be positive, got {}",
                    opts.tol
                )));
            }
            dopri(&rhs, &mut nodes, t_end, opts.tol, offset_frame)?
        }
    };

    let point = |t: f64, z: &DVector<f64>| {
        let offset = if offset_frame { z.clone() } else { z - &star };
        TrajectoryPoint::from_offset(params, p, exact, t, &offset)
    };
    let steps = nodes
        .t
        .iter()
        .zip(&nodes.z)
        .map(|(&t, z)| point(t, z))
        .collect::<Result<Vec<_>>>()?;
    let last = opts.report_points - 1;
    let report = (0..opts.report_points)
        .map(|i| {
            // pin both ends exactly
            let t = if i == last {
                t_end
            } else {
                t0 + (t_end - t0) * (i as f64 / last as f64)
            };
            point(t, &nodes.interpolate(t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        steps,
        report,
        stats,
    })
}

fn fixed_rk4<F>(rhs: &F, nodes: &mut Nodes, t_end: f64, step: f64) -> Result<IntegratorStats>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let t0 = nodes.t[0];
    let count = ((t_end - t0) / step).ceil().max(1.0) as usize;
    let mut z = nodes.z[0].clone();
    let mut k1 = nodes.f[0].clone();
    let mut t = t0;
    let mut h = step;
    for i in 1..=count {
        let t_next = if i == count {
            t_end
        } else {
            t0 + i as f64 * step
        };
        h = t_next - t;
        let k2 = rhs(&(&z + &k1 * (h / 2.0)));
        let k3 = rhs(&(&z + &k2 * (h / 2.0)));
        let k4 = rhs(&(&z + &k3 * h));
        z += (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        if !finite(&z) {
            return Err(Error::IntegrationDiverged { t: t_next });
        }
        t = t_next;
        k1 = rhs(&z);
        nodes.push(t, z.clone(), k1.clone());
    }
    Ok(IntegratorStats {
        accepted: count,
        rejected: 0,
        final_step: h,
    })
}

fn dopri<F>(
    rhs: &F,
    nodes: &mut Nodes,
    t_end: f64,
    tol: f64,
    relative_to_offset: bool,
) -> Result<IntegratorStats>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let t0 = nodes.t[0];
    let h_max = (t_end - t0) / 10.0;
    let mut h = INITIAL_STEP.min(h_max);
    let mut t = t0;
    let mut z = nodes.z[0].clone();
    let mut f0 = nodes.f[0].clone();
    let mut err_old: f64 = 1e-4;
    let mut stats = IntegratorStats::default();
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);

    while t < t_end {
        // avoid a sliver of a final step
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        if h < MIN_STEP {
            return Err(Error::StepSizeUnderflow { t, step: h });
        }
        k.clear();
        k.push(f0.clone());
        for row in &A[1..7] {
            let mut stage = z.clone();
            for (j, a) in row.iter().enumerate() {
                if *a != 0.0 {
                    stage.axpy(h * a, &k[j], 1.0);
                }
            }
            k.push(rhs(&stage));
        }
        let mut z_new = z.clone();
        let mut err_vec = DVector::zeros(z.len());
        for i in 0..7 {
            if B5[i] != 0.0 {
                z_new.axpy(h * B5[i], &k[i], 1.0);
            }
            err_vec.axpy(h * (B5[i] - B4[i]), &k[i], 1.0);
        }
        if !finite(&z_new) {
            // a huge trial step can overflow; shrink and retry before giving up
            stats.rejected += 1;
            h *= 0.2;
            if h < MIN_STEP {
                return Err(Error::IntegrationDiverged { t: t + h });
            }
            continue;
        }

        let len = z.len() as f64;
        let err = if !relative_to_offset {
            let sum: f64 = err_vec
                .iter()
                .zip(z.iter().zip(z_new.iter()))
                .map(|(e, (a, b))| {
                    let sc = tol + tol * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum();
            (sum / len).sqrt()
        } else {
            let sc = tol * z.amax().max(z_new.amax()) + 1e-300;
            (err_vec.norm_squared() / len).sqrt() / sc
        };

        if err <= 1.0 {
            t += h;
            z = z_new;
            f0 = k[6].clone();
            nodes.push(t, z.clone(), f0.clone());
            stats.accepted += 1;
            stats.final_step = h;
            let fac = if err > 0.0 {
                0.9 * err.powf(-0.7 / 5.0) * err_old.powf(0.4 / 5.0)
            } else {
                5.0
            };
            err_old = err.max(1e-4);
            h = (h * fac.clamp(0.2, 5.0)).min(h_max);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    if !finite(&z) {
        return Err(Error::IntegrationDiverged { t });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::{generate_l2_saddle, Constants, Quadratic};
    use nalgebra::{dvector, DMatrix};
    use std::sync::Arc;

    fn scalar_critical() -> (SaddleProblem, ExactSolution) {
        let p = SaddleProblem::new(
            Arc::new(Quadratic::isotropic(0.5, 1)),
            Arc::new(Quadratic::isotropic(0.5, 1)),
            DMatrix::zeros(1, 1),
            Constants::new(1.0, 1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        (p, ExactSolution::new(dvector![0.0], dvector![0.0]))
    }

    #[test]
    fn critically_damped_closed_form() {
        // x'' + 2x' + x = 0, x(0) = 1, x'(0) = 0  =>  x = (1 + t) e^{-t}
        let (p, ex) = scalar_critical();
        let init = OdeState::at_rest(0.0, dvector![1.0], dvector![0.0]);
        let params = DynamicParams::base(&p);
        for method in [Method::AdaptiveRk45, Method::FixedRk4 { step: 1e-3 }] {
            let opts = IntegratorOptions {
                method,
                ..Default::default()
            };
            let tr = integrate(&p, &params, &init, 1.0, &opts, &ex).unwrap();
            let x1 = tr.last().state.x[0];
            assert!(
                (x1 - 2.0 * (-1.0f64).exp()).abs() < 1e-6,
                "{method:?}: {x1}"
            );
            for pt in &tr.report {
                let t = pt.t();
                assert!((pt.state.x[0] - (1.0 + t) * (-t).exp()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let l2 = generate_l2_saddle(6, 4, 2.0, 5).unwrap();
        let p = l2.to_problem();
        let ex = l2.exact_solution().unwrap();
        let init = OdeState::at_rest(1.0, ex.x_star.clone(), ex.y_star.clone());
        let tr = integrate(
            &p,
            &DynamicParams::base(&p),
            &init,
            5.0,
            &IntegratorOptions::default(),
            &ex,
        )
        .unwrap();
        for pt in &tr.report {
            assert!((&pt.state.x - &ex.x_star).amax() < 1e-10);
            assert!((&pt.state.y - &ex.y_star).amax() < 1e-10);
            assert!(pt.state.v_x.amax() < 1e-10 && pt.state.v_y.amax() < 1e-10);
        }
    }

    #[test]
    fn report_grid_layout() {
        let (p, ex) = scalar_critical();
        let init = OdeState::at_rest(1.0, dvector![1.0], dvector![1.0]);
        let tr = integrate(
            &p,
            &DynamicParams::base(&p),
            &init,
            4.0,
            &IntegratorOptions::default(),
            &ex,
        )
        .unwrap();
        let ts = tr.report_times();
        assert_eq!(ts.len(), DEFAULT_REPORT_POINTS);
        assert_eq!((ts[0], ts[ts.len() - 1]), (1.0, 4.0));
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.steps.windows(2).all(|w| w[1].t() > w[0].t()));
        let csv = tr.to_csv_string();
        assert_eq!(csv.lines().next(), Some(TRAJECTORY_CSV_HEADER));
        assert_eq!(csv.lines().count(), DEFAULT_REPORT_POINTS + 1);
    }

    #[test]
    fn argument_errors() {
        let (p, ex) = scalar_critical();
        let params = DynamicParams::base(&p);
        let init = OdeState::at_rest(1.0, dvector![1.0], dvector![1.0]);
        let opts = IntegratorOptions::default();
        assert!(integrate(&p, &params, &init, 1.0, &opts, &ex).is_err());
        let bad_tol = IntegratorOptions { tol: 0.0, ..opts };
        assert!(integrate(&p, &params, &init, 2.0, &bad_tol, &ex).is_err());
        let bad_step = IntegratorOptions {
            method: Method::FixedRk4 { step: -1.0 },
            ..opts
        };
        assert!(integrate(&p, &params, &init, 2.0, &bad_step, &ex).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // a wildly too large fixed step on a stiff scalar problem explodes
        let p = SaddleProblem::new(
            Arc::new(Quadratic::isotropic(1e6, 1)),
            Arc::new(Quadratic::isotropic(0.5, 1)),
            DMatrix::zeros(1, 1),
            Constants::new(2e6, 2e6, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let ex = ExactSolution::new(dvector![0.0], dvector![0.0]);
        let init = OdeState::at_rest(0.0, dvector![1.0], dvector![0.0]);
        let opts = IntegratorOptions {
            method: Method::FixedRk4 { step: 0.5 },
            ..Default::default()
        };
        let err = integrate(&p, &DynamicParams::base(&p), &init, 1000.0, &opts, &ex).unwrap_err();
        assert!(err.is_divergence(), "{err}");
    }
}
