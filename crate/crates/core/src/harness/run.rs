use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::thread;

use nalgebra::DVector;

use super::config::{
    DynamicsKind, ExperimentConfig, ExperimentKind, IntegratorChoice, MethodKind, StepChoice,
};
use crate::dynamics::{
    discretization_bridge, integrate, DynamicParams, IntegratorOptions, Method, OdeState,
};
use crate::error::{Error, Result};
use crate::metrics::{
    fit_linear_rate, fit_linear_rate_at, theoretical_rate_continuous, RateReport,
    DEFAULT_FIT_FLOOR, RATE_CSV_HEADER,
};
use crate::pdgm::{compute_theta, gda, nag_sc_decoupled, GdaConfig, PdgmConfig, PdgmSolver};
use crate::saddle::{
    gaussian_vector, generate_l2_saddle, generate_quadratic, sdl::load_sdl, seeded_rng,
    ExactSolution, ProblemFamily,
};

pub const RATES_CSV_HEADER: &str = "method,rho_hat,rho_theory,window_start,window_end,residual";

/// Result of one method or dynamic.
#[derive(Clone, Debug, PartialEq)]
pub enum MethodOutcome {
    /// `rate` is `None` when the log was too short to fit.
    Completed {
        rate: Option<RateReport>,
    },
    Diverged(String),
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// `(label, outcome)` in config order, methods first.
    pub outcomes: Vec<(String, MethodOutcome)>,
}

impl RunSummary {
    pub fn diverged(&self) -> bool {
        self.outcomes
            .iter()
            .any(|(_, o)| matches!(o, MethodOutcome::Diverged(_)))
    }

    pub fn failed(&self) -> bool {
        self.outcomes
            .iter()
            .any(|(_, o)| matches!(o, MethodOutcome::Failed(_)))
    }

    pub fn rate(&self, label: &str) -> Option<&RateReport> {
        self.outcomes
            .iter()
            .find(|(l, _)| l == label)
            .and_then(|(_, o)| match o {
                MethodOutcome::Completed { rate } => rate.as_ref(),
                _ => None,
            })
    }
}

/// Starting point `(x_0, y_0)`: standard Gaussian from stream 1 of the
/// experiment seed, so it never overlaps the draws that built the problem.
pub fn initial_point(seed: u64, n: usize, m: usize) -> (DVector<f64>, DVector<f64>) {
    let mut rng = seeded_rng(seed);
    rng.set_stream(1);
    let x = gaussian_vector(&mut rng, n);
    let y = gaussian_vector(&mut rng, m);
    (x, y)
}

fn build_family(cfg: &ExperimentConfig) -> Result<ProblemFamily> {
    Ok(match cfg.kind {
        ExperimentKind::QuadraticDiscrete => generate_quadratic(
            cfg.n,
            cfg.m,
            cfg.mu_f,
            cfg.kappa * cfg.mu_f,
            cfg.mu_g,
            cfg.kappa * cfg.mu_g,
            cfg.seed,
        )?
        .into(),
        ExperimentKind::L2Continuous => generate_l2_saddle(cfg.n, cfg.m, cfg.mu, cfg.seed)?.into(),
        ExperimentKind::Custom => {
            let path = cfg
                .problem
                .as_ref()
                .ok_or_else(|| Error::invalid("custom experiment without a problem file"))?;
            load_sdl(path)?
        }
    })
}

fn resolve(step: StepChoice, l: f64) -> f64 {
    match step {
        StepChoice::Optimal => 1.0 / l,
        StepChoice::Value(v) => v,
    }
}

// Everything a job needs, checked before any job starts.
struct Prepared {
    family: ProblemFamily,
    exact: ExactSolution,
    pdgm: PdgmConfig,
    x0: DVector<f64>,
    y0: DVector<f64>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let family = build_family(cfg)?;
    let c = family.constants();
    let pdgm = PdgmConfig {
        r: resolve(cfg.r, c.l_f),
        s: resolve(cfg.s, c.l_g),
        max_iters: cfg.max_iters,
        gap_floor: cfg.gap_floor,
    };
    pdgm.validate(&c)?;
    let exact = family.exact_solution()?;
    let (n, m) = family.dims();
    let (x0, y0) = initial_point(cfg.seed, n, m);
    Ok(Prepared {
        family,
        exact,
        pdgm,
        x0,
        y0,
    })
}

fn fit_floor(cfg: &ExperimentConfig) -> f64 {
    cfg.gap_floor.max(DEFAULT_FIT_FLOOR)
}

// A fit that fails for lack of data is not a run failure.
fn try_fit(fit: Result<RateReport>) -> Result<Option<RateReport>> {
    match fit {
        Ok(r) => Ok(Some(r)),
        Err(Error::InsufficientData { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

type JobOutput = Result<(String, Option<RateReport>)>;

fn run_method(cfg: &ExperimentConfig, prep: &Prepared, method: MethodKind) -> JobOutput {
    let p = prep.family.to_problem();
    let c = p.constants();
    let (r, s) = (prep.pdgm.r, prep.pdgm.s);
    let log = match method {
        MethodKind::Pdgm => PdgmSolver::new(&p, prep.pdgm)?.run(&prep.x0, &prep.y0, &prep.exact)?,
        MethodKind::NagScDecoupled => {
            let decoupled = prep.family.decoupled();
            let exact = decoupled.exact_solution()?;
            nag_sc_decoupled(
                &p,
                r,
                s,
                &prep.x0,
                &prep.y0,
                cfg.max_iters,
                cfg.gap_floor,
                &exact,
            )?
        }
        MethodKind::Gda => {
            let gcfg = GdaConfig {
                max_iters: cfg.max_iters,
                gap_floor: cfg.gap_floor,
                ..GdaConfig::default_for(&p)
            };
            gda(&p, &gcfg, &prep.x0, &prep.y0, &prep.exact)?
        }
    };
    let theory = match method {
        MethodKind::Gda => f64::NAN,
        _ => 1.0 - compute_theta(c.mu_f, r, c.mu_g, s)?,
    };
    let rate =
        try_fit(fit_linear_rate(&log.gaps(), fit_floor(cfg)))?.map(|rep| rep.with_theory(theory));
    Ok((log.to_csv_string(), rate))
}

fn run_dynamic(cfg: &ExperimentConfig, prep: &Prepared, kind: DynamicsKind) -> JobOutput {
    let p = prep.family.to_problem();
    let c = p.constants();
    let params = match kind {
        DynamicsKind::Base => DynamicParams::base(&p),
        DynamicsKind::Rescaled => discretization_bridge(&p, prep.pdgm.r, prep.pdgm.s)?.params()?,
    };
    let opts = IntegratorOptions {
        method: match cfg.integrator {
            IntegratorChoice::AdaptiveRk45 => Method::AdaptiveRk45,
            IntegratorChoice::FixedRk4 { step } => Method::FixedRk4 { step },
        },
        tol: cfg.tol,
        control: cfg.error_control,
        report_points: cfg.report_points,
    };
    let init = OdeState::at_rest(cfg.t0, prep.x0.clone(), prep.y0.clone());
    let traj = integrate(&p, &params, &init, cfg.t_end, &opts, &prep.exact)?;
    let theory = theoretical_rate_continuous(c.mu_f, c.mu_g)?;
    let fit = fit_linear_rate_at(&traj.report_times(), &traj.report_gaps(), fit_floor(cfg));
    let rate = try_fit(fit)?.map(|rep| rep.with_theory(theory));
    Ok((traj.to_csv_string(), rate))
}

fn outcome(res: &JobOutput) -> MethodOutcome {
    match res {
        Ok((_, rate)) => MethodOutcome::Completed { rate: *rate },
        Err(e) if e.is_divergence() => MethodOutcome::Diverged(e.to_string()),
        Err(e) => MethodOutcome::Failed(e.to_string()),
    }
}

fn manifest(cfg: &ExperimentConfig, outcomes: &[(String, MethodOutcome)]) -> String {
    let status = if outcomes
        .iter()
        .any(|(_, o)| matches!(o, MethodOutcome::Diverged(_)))
    {
        "diverged"
    } else if outcomes
        .iter()
        .any(|(_, o)| matches!(o, MethodOutcome::Failed(_)))
    {
        "failed"
    } else {
        "ok"
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# pdsaddle {} experiment manifest",
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(out, "# seed: {}", cfg.seed);
    let _ = writeln!(out, "# status: {status}");
    for (label, o) in outcomes {
        let line = match o {
            MethodOutcome::Completed { rate: Some(r) } => format!("ok, rho_hat = {}", r.rho_hat),
            MethodOutcome::Completed { rate: None } => {
                "ok, too few points above the floor to fit a rate".into()
            }
            MethodOutcome::Diverged(msg) => format!("diverged: {msg}"),
            MethodOutcome::Failed(msg) => format!("failed: {msg}"),
        };
        let _ = writeln!(out, "# {label}: {line}");
    }
    out.push_str(
        "# the lines below are the normalized config; rerun with `pdsaddle run <this file>`\n",
    );
    out.push_str(&cfg.serialize());
    out
}

fn rates_csv(outcomes: &[(String, MethodOutcome)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RATES_CSV_HEADER}");
    debug_assert!(RATES_CSV_HEADER.ends_with(RATE_CSV_HEADER));
    for (label, o) in outcomes {
        if let MethodOutcome::Completed { rate: Some(r) } = o {
            let _ = writeln!(out, "{label},{}", r.to_csv_row());
        }
    }
    out
}

fn write(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

/// Runs every selected method and dynamic of `cfg` concurrently and writes
/// the outputs into `cfg.out_dir`.
///
/// Problem construction and step-size validation happen before anything
/// runs; those errors are returned directly. Failures of individual jobs,
/// including divergence, are recorded in the summary and the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let prep = prepare(cfg)?;
    let prep = &prep;

    let (method_results, dynamic_results) = thread::scope(|scope| {
        let methods: Vec<_> = cfg
            .methods
            .iter()
            .map(|&mk| (mk, scope.spawn(move || run_method(cfg, prep, mk))))
            .collect();
        let dynamics: Vec<_> = cfg
            .dynamics
            .iter()
            .map(|&dk| (dk, scope.spawn(move || run_dynamic(cfg, prep, dk))))
            .collect();
        let join = |h: thread::ScopedJoinHandle<'_, JobOutput>| {
            h.join()
                .unwrap_or_else(|_| Err(Error::invalid("worker thread panicked")))
        };
        (
            methods
                .into_iter()
                .map(|(k, h)| (k.name().to_string(), join(h)))
                .collect::<Vec<_>>(),
            dynamics
                .into_iter()
                .map(|(k, h)| (k.label(), join(h)))
                .collect::<Vec<_>>(),
        )
    });

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut files = Vec::new();
    let mut outcomes = Vec::new();
    for (label, res) in method_results.iter().chain(&dynamic_results) {
        if let Ok((csv, _)) = res {
            write(&cfg.out_dir, &format!("{label}.csv"), csv, &mut files)?;
        }
        outcomes.push((label.clone(), outcome(res)));
    }
    write(&cfg.out_dir, "rates.csv", &rates_csv(&outcomes), &mut files)?;
    write(
        &cfg.out_dir,
        "manifest.txt",
        &manifest(cfg, &outcomes),
        &mut files,
    )?;
    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        files,
        outcomes,
    })
}
