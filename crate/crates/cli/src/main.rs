//! `pdsaddle` command line: run, validate and summarize experiments.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical
//! divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pdsaddle::harness::{load_config, run_experiment, Demo, MethodOutcome, RunSummary};
use pdsaddle::metrics::{fit_linear_rate, fit_linear_rate_at, DEFAULT_FIT_FLOOR};

const EXIT_INPUT: u8 = 1;
const EXIT_DIVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pdsaddle",
    version,
    about = "Accelerated primal-dual saddle point experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file and print it in normalized form.
    Validate { config: PathBuf },
    /// Fit a linear convergence rate to the `gap` column of a log CSV.
    Rates {
        csv: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FIT_FLOOR)]
        floor: f64,
    },
    /// Run one of the canned experiments.
    Demo {
        #[arg(value_enum)]
        which: DemoArg,
        #[arg(long)]
        out: PathBuf,
        /// Use the large dimensions (n = 500, m = 600 for fig1).
        #[arg(long)]
        full_scale: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoArg {
    Fig1,
    Fig2,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match load_config(&config) {
            Ok(cfg) => report_run(run_experiment(&cfg)),
            Err(errs) => {
                eprintln!("{}: invalid config", config.display());
                eprintln!("{errs}");
                ExitCode::from(EXIT_INPUT)
            }
        },
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                print!("{}", cfg.serialize());
                ExitCode::SUCCESS
            }
            Err(errs) => {
                eprintln!("{}: invalid config", config.display());
                eprintln!("{errs}");
                ExitCode::from(EXIT_INPUT)
            }
        },
        Command::Rates { csv, floor } => rates(&csv, floor),
        Command::Demo {
            which,
            out,
            full_scale,
        } => {
            let demo = match which {
                DemoArg::Fig1 => Demo::Fig1,
                DemoArg::Fig2 => Demo::Fig2,
            };
            report_run(run_experiment(&demo.config(full_scale, &out)))
        }
    }
}

fn report_run(res: pdsaddle::Result<RunSummary>) -> ExitCode {
    let summary = match res {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_divergence() {
                EXIT_DIVERGED
            } else {
                EXIT_INPUT
            };
            return ExitCode::from(code);
        }
    };
    for (label, outcome) in &summary.outcomes {
        match outcome {
            MethodOutcome::Completed { rate: Some(r) } => {
                println!(
                    "{label}: rho_hat = {:.6} (theory {:.6})",
                    r.rho_hat, r.rho_theory
                )
            }
            MethodOutcome::Completed { rate: None } => {
                println!("{label}: done, too few points to fit a rate")
            }
            MethodOutcome::Diverged(msg) => eprintln!("{label}: diverged: {msg}"),
            MethodOutcome::Failed(msg) => eprintln!("{label}: failed: {msg}"),
        }
    }
    println!(
        "wrote {} files to {}",
        summary.files.len(),
        summary.out_dir.display()
    );
    if summary.diverged() {
        ExitCode::from(EXIT_DIVERGED)
    } else if summary.failed() {
        ExitCode::from(EXIT_INPUT)
    } else {
        ExitCode::SUCCESS
    }
}

// Reads the `gap` column, and `t` if present for continuous logs.
fn read_gap_columns(path: &Path) -> Result<(Option<Vec<f64>>, Vec<f64>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(str::trim)
        .collect();
    let gap_col = header
        .iter()
        .position(|&h| h == "gap")
        .ok_or("no `gap` column")?;
    let t_col = header.iter().position(|&h| h == "t");
    let (mut ts, mut gaps) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let field = |c: usize| -> Result<f64, String> {
            fields
                .get(c)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    format!(
                        "line {}: bad or missing value in column {}",
                        i + 2,
                        header[c]
                    )
                })
        };
        gaps.push(field(gap_col)?);
        if let Some(c) = t_col {
            ts.push(field(c)?);
        }
    }
    Ok((t_col.map(|_| ts), gaps))
}

fn rates(csv: &Path, floor: f64) -> ExitCode {
    let (ts, gaps) = match read_gap_columns(csv) {
        Ok(cols) => cols,
        Err(msg) => {
            eprintln!("{}: {msg}", csv.display());
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let fit = match &ts {
        Some(ts) => fit_linear_rate_at(ts, &gaps, floor),
        None => fit_linear_rate(&gaps, floor),
    };
    match fit {
        Ok(report) => {
            println!("{}", report.to_csv_row());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: {e}", csv.display());
            ExitCode::from(EXIT_INPUT)
        }
    }
}
