use std::fs;
use std::process::{Command, Output};

fn pdsaddle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdsaddle"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_prints_normalized_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("good.cfg");
    fs::write(
        &cfg,
        "# desk run\nkind = quadratic-discrete\nn = 50\nm = 60\nkappa = 10\nseed = 1\n",
    )
    .unwrap();
    let out = pdsaddle(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("kappa = 10.0"));
    assert!(text.contains("max_iters = 2000"));
    assert!(text.contains("r = optimal"));
}

#[test]
fn bad_config_exits_one_and_names_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        "kind = quadratic-discrete\nn = 5\nm = 4\nkappa = 0\nseed = 1\nfoo = 2\n",
    )
    .unwrap();
    for cmd in ["validate", "run"] {
        let out = pdsaddle(&[cmd, cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1));
        let err = stderr(&out);
        assert!(err.contains("kappa") && err.contains("kappa >= 1"), "{err}");
        assert!(err.contains("foo"), "{err}");
    }
    let missing = pdsaddle(&["validate", dir.path().join("nope.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn demo_fig1_then_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = pdsaddle(&["demo", "fig1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in ["pdgm.csv", "gda.csv", "rates.csv", "manifest.txt"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let rates = pdsaddle(&[
        "rates",
        out_dir.join("pdgm.csv").to_str().unwrap(),
        "--floor",
        "1e-12",
    ]);
    assert_eq!(rates.status.code(), Some(0));
    let row = stdout(&rates);
    let fields: Vec<&str> = row.trim().split(',').collect();
    assert_eq!(fields.len(), 5);
    let rho: f64 = fields[0].parse().unwrap();
    assert!(rho > 0.0 && rho <= 1.0 - 0.1f64.sqrt() + 0.02);

    // the manifest is a runnable config
    let rerun = pdsaddle(&["validate", out_dir.join("manifest.txt").to_str().unwrap()]);
    assert_eq!(rerun.status.code(), Some(0));
}

#[test]
fn demo_fig2_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdsaddle(&["demo", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("dynamic-base.csv").is_file());
    let rates = pdsaddle(&[
        "rates",
        dir.path().join("dynamic-base.csv").to_str().unwrap(),
    ]);
    assert_eq!(rates.status.code(), Some(0));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.cfg");
    fs::write(
        &cfg,
        format!(
            "kind = l2-continuous\nn = 8\nm = 6\nmu = 2\nseed = 1\nintegrator = fixed-rk4\nrk4_step = 5\nt_end = 1000\nout_dir = {}\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = pdsaddle(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn rates_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("short.csv");
    fs::write(&csv, "k,gap\n1,1.0\n2,0.5\n").unwrap();
    assert_eq!(
        pdsaddle(&["rates", csv.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let nogap = dir.path().join("nogap.csv");
    fs::write(&nogap, "k,value\n1,1.0\n").unwrap();
    assert_eq!(
        pdsaddle(&["rates", nogap.to_str().unwrap()]).status.code(),
        Some(1)
    );
}
