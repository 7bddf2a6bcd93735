use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::ErrorControl;
use crate::pdgm::{DEFAULT_GAP_FLOOR, DEFAULT_MAX_ITERS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Random quadratic minimax with prescribed spectra, `L = kappa mu`.
    QuadraticDiscrete,
    /// Random l2-regularized least-squares saddle.
    L2Continuous,
    /// Problem read from an `.sdl` file.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodKind {
    Pdgm,
    NagScDecoupled,
    Gda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DynamicsKind {
    Base,
    Rescaled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepChoice {
    /// `1 / L` of the block.
    Optimal,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegratorChoice {
    AdaptiveRk45,
    FixedRk4 { step: f64 },
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(format!(
                        "expected one of {}",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

keyword_enum!(ExperimentKind {
    QuadraticDiscrete => "quadratic-discrete",
    L2Continuous => "l2-continuous",
    Custom => "custom",
});

keyword_enum!(MethodKind {
    Pdgm => "pdgm",
    NagScDecoupled => "nag-sc-decoupled",
    Gda => "gda",
});

keyword_enum!(DynamicsKind {
    Base => "base",
    Rescaled => "rescaled",
});

impl DynamicsKind {
    /// Output file stem, e.g. `dynamic-base`.
    pub fn label(self) -> String {
        format!("dynamic-{}", self.name())
    }
}

impl fmt::Display for StepChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepChoice::Optimal => f.write_str("optimal"),
            StepChoice::Value(v) => write!(f, "{v:?}"),
        }
    }
}

/// A fully validated experiment description. Fields that do not apply to
/// `kind` keep their defaults and are not serialized.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// `(n, m)`. For `custom` these come from the problem file.
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub kappa: f64,
    pub mu_f: f64,
    pub mu_g: f64,
    pub mu: f64,
    pub problem: Option<PathBuf>,
    pub methods: Vec<MethodKind>,
    pub dynamics: Vec<DynamicsKind>,
    pub r: StepChoice,
    pub s: StepChoice,
    pub max_iters: usize,
    pub gap_floor: f64,
    pub t0: f64,
    pub t_end: f64,
    pub tol: f64,
    pub integrator: IntegratorChoice,
    pub error_control: ErrorControl,
    pub report_points: usize,
    pub out_dir: PathBuf,
}

/// One problem with one key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub line: Option<usize>,
    pub reason: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.reason),
            None => write!(f, "{}: {}", self.key, self.reason),
        }
    }
}

/// Every violation found in a config, in line order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    pub fn issues(&self) -> &[ConfigIssue] {
        &self.0
    }

    pub fn mentions(&self, key: &str) -> bool {
        self.0.iter().any(|i| i.key == key)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const ALL_KEYS: &[&str] = &[
    "kind",
    "n",
    "m",
    "seed",
    "kappa",
    "mu_f",
    "mu_g",
    "mu",
    "problem",
    "methods",
    "dynamics",
    "r",
    "s",
    "max_iters",
    "gap_floor",
    "t0",
    "t_end",
    "tol",
    "integrator",
    "rk4_step",
    "error_control",
    "report_points",
    "out_dir",
];

fn applies(kind: ExperimentKind, key: &str) -> bool {
    use ExperimentKind::*;
    match key {
        "kappa" | "mu_f" | "mu_g" => kind == QuadraticDiscrete,
        "mu" => kind == L2Continuous,
        "problem" => kind == Custom,
        "n" | "m" => kind != Custom,
        _ => true,
    }
}

fn required(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::QuadraticDiscrete => &["n", "m", "seed", "kappa"],
        ExperimentKind::L2Continuous => &["n", "m", "seed", "mu"],
        ExperimentKind::Custom => &["seed", "problem"],
    }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

struct Parser<'a> {
    entries: BTreeMap<&'a str, Entry<'a>>,
    issues: Vec<ConfigIssue>,
}

impl<'a> Parser<'a> {
    fn issue(&mut self, key: &str, line: Option<usize>, reason: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.to_string(),
            line,
            reason: reason.into(),
        });
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    /// Parses `key` if present; records a violation and returns `None` on
    /// failure.
    fn get<T, F>(&mut self, key: &str, parse: F) -> Option<T>
    where
        F: FnOnce(&str) -> Result<T, String>,
    {
        let (line, value) = {
            let e = self.entries.get(key)?;
            (e.line, e.value)
        };
        match parse(value) {
            Ok(v) => Some(v),
            Err(reason) => {
                self.issue(key, Some(line), format!("{reason} (got `{value}`)"));
                None
            }
        }
    }

    fn check<T: Copy>(&mut self, key: &str, value: T, ok: bool, reason: &str) -> T {
        if !ok {
            let line = self.line_of(key);
            self.issue(key, line, reason);
        }
        value
    }
}

fn parse_float(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err("expected a finite number".into()),
    }
}

fn parse_uint<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse::<T>()
        .map_err(|_| "expected a nonnegative integer".into())
}

fn parse_step(s: &str) -> Result<StepChoice, String> {
    if s == "optimal" {
        return Ok(StepChoice::Optimal);
    }
    match parse_float(s) {
        Ok(v) if v > 0.0 => Ok(StepChoice::Value(v)),
        _ => Err("expected `optimal` or a positive number".into()),
    }
}

fn parse_list<T: FromStr<Err = String> + Ord>(s: &str) -> Result<Vec<T>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v = item.parse::<T>().map_err(|e| format!("`{item}`: {e}"))?;
        if out.contains(&v) {
            return Err(format!("`{item}` listed twice"));
        }
        out.push(v);
    }
    Ok(out)
}

fn parse_control(s: &str) -> Result<ErrorControl, String> {
    match s {
        "mixed" => Ok(ErrorControl::Mixed),
        "deviation" => Ok(ErrorControl::Deviation),
        _ => Err("expected one of mixed, deviation".into()),
    }
}

fn control_name(c: ErrorControl) -> &'static str {
    match c {
        ErrorControl::Mixed => "mixed",
        ErrorControl::Deviation => "deviation",
    }
}

/// Parses and validates a config.
///
/// Required keys: `kind`, `seed`, plus `n`, `m` and `kappa`
/// (quadratic-discrete), `n`, `m` and `mu` (l2-continuous), or `problem`
/// (custom). Everything else has a default. All violations are collected
/// rather than stopping at the first one.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut p = Parser {
        entries: BTreeMap::new(),
        issues: Vec::new(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            p.issue(content, Some(line), "expected `key = value`");
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !ALL_KEYS.contains(&key) {
            p.issue(key, Some(line), "unknown key");
        } else if let Some(prev) = p.entries.get(key) {
            let first = prev.line;
            p.issue(
                key,
                Some(line),
                format!("duplicate key (first set on line {first})"),
            );
        } else {
            p.entries.insert(key, Entry { line, value });
        }
    }

    let kind = if p.entries.contains_key("kind") {
        p.get("kind", |s| s.parse::<ExperimentKind>())
    } else {
        p.issue("kind", None, "missing required key");
        None
    };
    let Some(kind) = kind else {
        return Err(ConfigErrors(sorted(p.issues)));
    };

    for &key in required(kind) {
        if !p.entries.contains_key(key) {
            p.issue(key, None, format!("missing required key for kind {kind}"));
        }
    }
    let present: Vec<(&str, usize)> = p.entries.iter().map(|(k, e)| (*k, e.line)).collect();
    for (key, line) in present {
        if !applies(kind, key) {
            p.issue(key, Some(line), format!("not applicable to kind {kind}"));
        }
    }

    let n = p.get("n", parse_uint::<usize>).unwrap_or(0);
    let m = p.get("m", parse_uint::<usize>).unwrap_or(0);
    if kind != ExperimentKind::Custom {
        if p.entries.contains_key("n") {
            p.check("n", n, n >= 1, "must be at least 1");
        }
        if p.entries.contains_key("m") {
            p.check("m", m, m >= 1, "must be at least 1");
        }
    }
    let seed = p.get("seed", parse_uint::<u64>).unwrap_or(0);

    let kappa = p.get("kappa", parse_float).unwrap_or(1.0);
    p.check("kappa", kappa, kappa >= 1.0, "must satisfy kappa >= 1");
    let mu_f = p.get("mu_f", parse_float).unwrap_or(1.0);
    p.check("mu_f", mu_f, mu_f > 0.0, "must be positive");
    let mu_g = p.get("mu_g", parse_float).unwrap_or(1.0);
    p.check("mu_g", mu_g, mu_g > 0.0, "must be positive");
    let mu = p.get("mu", parse_float).unwrap_or(1.0);
    p.check("mu", mu, mu > 0.0, "must be positive");
    if kind == ExperimentKind::QuadraticDiscrete && n == 1 && kappa > 1.0 {
        p.issue("kappa", p.line_of("kappa"), "n = 1 admits only kappa = 1");
    }

    let problem = p.entries.get("problem").map(|e| PathBuf::from(e.value));
    if let Some(path) = &problem {
        if path.as_os_str().is_empty() {
            p.issue("problem", p.line_of("problem"), "path is empty");
        }
    }

    let default_methods = match kind {
        ExperimentKind::L2Continuous => vec![],
        _ => vec![MethodKind::Pdgm],
    };
    let default_dynamics = match kind {
        ExperimentKind::L2Continuous => vec![DynamicsKind::Base],
        _ => vec![],
    };
    let methods = p
        .get("methods", parse_list::<MethodKind>)
        .unwrap_or(default_methods);
    let dynamics = p
        .get("dynamics", parse_list::<DynamicsKind>)
        .unwrap_or(default_dynamics);
    if methods.is_empty() && dynamics.is_empty() {
        p.issue(
            "methods",
            p.line_of("methods"),
            "nothing to run: methods and dynamics are both empty",
        );
    }

    let r = p.get("r", parse_step).unwrap_or(StepChoice::Optimal);
    let s = p.get("s", parse_step).unwrap_or(StepChoice::Optimal);

    let max_iters = p
        .get("max_iters", parse_uint::<usize>)
        .unwrap_or(DEFAULT_MAX_ITERS);
    p.check("max_iters", max_iters, max_iters >= 1, "must be at least 1");
    let gap_floor = p.get("gap_floor", parse_float).unwrap_or(DEFAULT_GAP_FLOOR);
    p.check(
        "gap_floor",
        gap_floor,
        gap_floor >= 0.0,
        "must be nonnegative",
    );

    let t0 = p.get("t0", parse_float).unwrap_or(1.0);
    let t_end = p.get("t_end", parse_float).unwrap_or(30.0);
    p.check("t_end", t_end, t_end > t0, "must exceed t0");
    let tol = p.get("tol", parse_float).unwrap_or(1e-9);
    p.check("tol", tol, tol > 0.0, "must be positive");

    let integrator = match p.get("integrator", |s| match s {
        "adaptive-rk45" => Ok(false),
        "fixed-rk4" => Ok(true),
        _ => Err("expected one of adaptive-rk45, fixed-rk4".to_string()),
    }) {
        Some(true) => {
            let step = p.get("rk4_step", parse_float).unwrap_or(0.01);
            p.check("rk4_step", step, step > 0.0, "must be positive");
            IntegratorChoice::FixedRk4 { step }
        }
        _ => {
            if p.entries.contains_key("rk4_step") {
                p.issue(
                    "rk4_step",
                    p.line_of("rk4_step"),
                    "only used with integrator = fixed-rk4",
                );
            }
            IntegratorChoice::AdaptiveRk45
        }
    };
    let error_control = p
        .get("error_control", parse_control)
        .unwrap_or(ErrorControl::Deviation);
    let report_points = p.get("report_points", parse_uint::<usize>).unwrap_or(300);
    p.check(
        "report_points",
        report_points,
        report_points >= 2,
        "must be at least 2",
    );
    let out_dir = p
        .entries
        .get("out_dir")
        .map(|e| PathBuf::from(e.value))
        .unwrap_or_else(|| PathBuf::from("out"));

    if !p.issues.is_empty() {
        return Err(ConfigErrors(sorted(p.issues)));
    }
    Ok(ExperimentConfig {
        kind,
        n,
        m,
        seed,
        kappa,
        mu_f,
        mu_g,
        mu,
        problem,
        methods,
        dynamics,
        r,
        s,
        max_iters,
        gap_floor,
        t0,
        t_end,
        tol,
        integrator,
        error_control,
        report_points,
        out_dir,
    })
}

fn sorted(mut issues: Vec<ConfigIssue>) -> Vec<ConfigIssue> {
    // missing keys (no line) go last
    issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
    issues
}

/// Reads and parses a config file. I/O failures are reported under the
/// pseudo-key `file`.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigErrors> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![ConfigIssue {
            key: "file".into(),
            line: None,
            reason: format!("{}: {e}", path.display()),
        }])
    })?;
    parse_config(&text)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl ExperimentConfig {
    /// Normalized text form with every applicable key spelled out. Floats use
    /// the shortest representation that parses back to the same value.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("kind", self.kind.to_string());
        match self.kind {
            ExperimentKind::QuadraticDiscrete => {
                put("n", self.n.to_string());
                put("m", self.m.to_string());
                put("kappa", format!("{:?}", self.kappa));
                put("mu_f", format!("{:?}", self.mu_f));
                put("mu_g", format!("{:?}", self.mu_g));
            }
            ExperimentKind::L2Continuous => {
                put("n", self.n.to_string());
                put("m", self.m.to_string());
                put("mu", format!("{:?}", self.mu));
            }
            ExperimentKind::Custom => {
                let path = self.problem.as_deref().unwrap_or(Path::new(""));
                put("problem", path.display().to_string());
            }
        }
        put("seed", self.seed.to_string());
        put("methods", join(&self.methods));
        put("dynamics", join(&self.dynamics));
        put("r", self.r.to_string());
        put("s", self.s.to_string());
        put("max_iters", self.max_iters.to_string());
        put("gap_floor", format!("{:?}", self.gap_floor));
        put("t0", format!("{:?}", self.t0));
        put("t_end", format!("{:?}", self.t_end));
        put("tol", format!("{:?}", self.tol));
        match self.integrator {
            IntegratorChoice::AdaptiveRk45 => put("integrator", "adaptive-rk45".into()),
            IntegratorChoice::FixedRk4 { step } => {
                put("integrator", "fixed-rk4".into());
                put("rk4_step", format!("{step:?}"));
            }
        }
        put("error_control", control_name(self.error_control).into());
        put("report_points", self.report_points.to_string());
        put("out_dir", self.out_dir.display().to_string());
        out
    }
}
