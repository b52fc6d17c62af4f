use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nonlocal-heat"));
    c.env_remove("NONLOCAL_HEAT_OUT");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const LINE_1D: &str = r#"
[domain]
dimension = 1
lower = [0.0]
upper = [1.0]
n = [64]

[potential]
kind = "square"
coeff = 1.0

[weight]
kind = "exponential"
rate = 1.0

[initial]
kind = "sine"
amplitude = 2.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_resolvent_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("solve", &scenario("resolvent_exp_weight"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "ubar.csv",
        "trajectory.csv",
        "history.csv",
        "bounds.csv",
        "report.txt",
        "manifest.toml",
    ] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let hist = read_csv(&tmp.path().join("history.csv"));
    assert_eq!(hist[0], ["iter", "residual", "omega", "accepted"]);
    let last: f64 = hist.last().unwrap()[1].parse().unwrap();
    assert!(last <= 1e-8);
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("verdict: converged"));
    assert!(report.contains("bounds_ok: true"));
    let ubar = read_csv(&tmp.path().join("ubar.csv"));
    assert_eq!(ubar[0], ["x", "ubar"]);
    assert_eq!(ubar.len(), 65);
}

#[test]
fn zero_weight_gives_zero_in_one_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("solve", &scenario("zero_weight"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let hist = read_csv(&tmp.path().join("history.csv"));
    assert_eq!(hist.len(), 2);
    let ubar = read_csv(&tmp.path().join("ubar.csv"));
    assert!(ubar[1..]
        .iter()
        .all(|r| r[1].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn negative_diffusivity_is_rejected_with_key_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{LINE_1D}\n[diffusion]\nkind = \"constant\"\nvalue = -1.0\n");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let o = run("solve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("diffusion.value"), "{err}");
    assert!(
        err.contains(&format!("bad.toml:{}", text.lines().count())),
        "{err}"
    );
}

#[test]
fn unknown_keys_and_bad_syntax_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "typo.toml",
        &format!("{LINE_1D}\n[solver]\ntolerance = 1e-6\n"),
    );
    let o = run("solve", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tolerance"));

    let cfg = write_config(tmp.path(), "syntax.toml", "[domain\n");
    let o = run("solve", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("syntax.toml:1"), "{}", stderr(&o));

    let o = run("solve", &tmp.path().join("missing.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        "solve",
        &scenario("resolvent_exp_weight"),
        tmp.path(),
        &["--max-iter", "2", "--tol", "1e-14"],
    );
    assert_eq!(o.status.code(), Some(2));
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("verdict: max_iter"));
}

#[test]
fn anderson_override_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        "solve",
        &scenario("resolvent_exp_weight"),
        tmp.path(),
        &["--accelerator", "anderson"],
    );
    assert_eq!(o.status.code(), Some(0));
    let manifest = fs::read_to_string(tmp.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("accelerator = \"anderson\""));
    let o = run(
        "solve",
        &scenario("resolvent_exp_weight"),
        tmp.path(),
        &["--accelerator", "newton"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn env_var_overrides_out() {
    let tmp = tempfile::tempdir().unwrap();
    let flagged = tmp.path().join("flag");
    let env = tmp.path().join("env");
    let o = bin()
        .args(["solve", "--config"])
        .arg(scenario("zero_weight"))
        .arg("--out")
        .arg(&flagged)
        .env("NONLOCAL_HEAT_OUT", &env)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env.join("ubar.csv").exists());
    assert!(!flagged.exists());
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    assert_eq!(
        run("solve", &scenario("indicator_forcing"), &first, &[])
            .status
            .code(),
        Some(0)
    );
    let o = run("solve", &first.join("manifest.toml"), &second, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["ubar.csv", "trajectory.csv", "history.csv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tabulated_initial_from_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let values: Vec<String> = (1..=8)
        .map(|i| format!("{}", (i as f64 / 9.0) * (1.0 - i as f64 / 9.0)))
        .collect();
    fs::write(
        tmp.path().join("u0.csv"),
        format!("u0\n{}\n", values.join("\n")),
    )
    .unwrap();
    let text = LINE_1D.replace("n = [64]", "n = [8]").replace(
        "kind = \"sine\"\namplitude = 2.0",
        "kind = \"tabulated\"\nfile = \"u0.csv\"",
    );
    let cfg = write_config(tmp.path(), "tab.toml", &text);
    let o = run("solve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let wrong = text.replace("n = [8]", "n = [9]");
    let cfg = write_config(tmp.path(), "wrong.toml", &wrong);
    let o = run("solve", &cfg, &tmp.path().join("out2"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("initial.file"), "{}", stderr(&o));
}

#[test]
fn trajectory_columns_follow_probe_points() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("solve", &scenario("linear_sine"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let traj = read_csv(&tmp.path().join("trajectory.csv"));
    assert_eq!(traj[0].len(), 4);
    assert_eq!(traj[0][0], "t");
    assert_eq!(traj[0][2], "u(x=0.5)");
    let t0: f64 = traj[1][0].parse().unwrap();
    let u_mid: f64 = traj[1][2].parse().unwrap();
    assert_eq!(t0, 0.0);
    assert_eq!(u_mid, 1.0);
}

#[test]
fn verify_default_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "line.toml", LINE_1D);
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for name in [
        "contraction",
        "smoothing",
        "difference",
        "increment",
        "compactness",
    ] {
        assert!(summary.contains(&format!("PASS {name}")), "{summary}");
    }
    for f in [
        "contraction.csv",
        "smoothing.csv",
        "difference.csv",
        "increment.csv",
        "compactness.csv",
    ] {
        let rows = read_csv(&out.join(f));
        assert!(rows.len() > 5, "{f}");
    }
}

#[test]
fn verify_near_upper_theta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "theta.toml",
        &format!("{LINE_1D}\n[probes]\ntheta = 0.99\nensemble = 20\n"),
    );
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("PASS smoothing"), "{summary}");
    assert_eq!(o.status.code(), Some(0), "{summary}");
}

#[test]
fn verify_refuses_huge_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "huge.toml",
        &LINE_1D.replace("n = [64]", "n = [8192]"),
    );
    let o = run("verify", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("eigen_exact size limit"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn sweep_over_initial_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["sweep", "--config"])
        .arg(scenario("small_data_quadratic"))
        .arg("--out")
        .arg(tmp.path())
        .args(["--param", "u0_scale", "--values", "1,10,100,1000"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&tmp.path().join("sweep.csv"));
    assert_eq!(rows[0][0], "u0_scale");
    assert_eq!(rows.len(), 5);
    let r0: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(r0.windows(2).all(|w| w[1] > w[0]));
    assert!(rows[1..].iter().all(|r| r[4] == "1"));
}

#[test]
fn tau_sweep_differences_shrink_linearly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["sweep", "--config"])
        .arg(scenario("indicator_forcing"))
        .arg("--out")
        .arg(tmp.path())
        .args(["--param", "tau", "--values", "4e-3,2e-3,1e-3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&tmp.path().join("sweep.csv"));
    let d1: f64 = rows[2][8].parse().unwrap();
    let d2: f64 = rows[3][8].parse().unwrap();
    assert!((d1 / d2 - 2.0).abs() < 0.4, "{d1} {d2}");
}

#[test]
fn sweep_rejects_bad_requests() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        ["--param", "u0_scale", "--values", ""],
        ["--param", "viscosity", "--values", "1,2"],
        ["--param", "n", "--values", "3.5"],
    ] {
        let o = bin()
            .args(["sweep", "--config"])
            .arg(scenario("zero_weight"))
            .arg("--out")
            .arg(tmp.path())
            .args(args)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}
