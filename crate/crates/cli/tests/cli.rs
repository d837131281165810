use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selfdual"))
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

const TRIVIAL: &str = r#"
[problem]
n = 1
horizon = 0.2
hamiltonian = "0.1*sq(pq)"
[boundary]
mode = "connecting"
psi1 = "sq(x)"
psi2 = "sq(x)"
[growth]
alpha = 0.0
beta = 0.1
gamma = 0.0
[solver]
m = 20
"#;

#[test]
fn check_passes_on_a_trivial_problem() {
    let dir = TempDir::new().unwrap();
    let (code, out, _) = run(bin().arg("check").arg(write(&dir, "c.toml", TRIVIAL)));
    assert_eq!(code, 0);
    assert!(out.contains("passed = true"));
}

#[test]
fn check_rejects_beta_above_threshold() {
    // threshold 1/(2·2T²) = 0.25 at T = 1
    let text = TRIVIAL
        .replace("horizon = 0.2", "horizon = 1.0")
        .replace("beta = 0.1", "beta = 0.3");
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(bin().arg("check").arg(write(&dir, "c.toml", &text)));
    assert_eq!(code, 2, "{out}{err}");
    assert!(out.contains("passed = false"));
    assert!(err.contains("failed:"));
}

#[test]
fn schema_faults_exit_with_their_location() {
    let dir = TempDir::new().unwrap();
    let no_psi2 = TRIVIAL.replace("psi2 = \"sq(x)\"\n", "");
    let (code, _, err) = run(bin().arg("check").arg(write(&dir, "a.toml", &no_psi2)));
    assert_eq!(code, 1);
    assert!(err.contains("boundary.psi2"), "{err}");

    let (code, _, err) =
        run(bin()
            .arg("check")
            .arg(write(&dir, "b.toml", "[problem]\nn = \"one\"\n")));
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");

    let (code, _, _) = run(bin().arg("check").arg(dir.path().join("missing.toml")));
    assert_eq!(code, 1);
    // usage errors must not collide with the hypothesis exit code
    let (code, _, _) = run(bin().arg("solve"));
    assert_eq!(code, 1);
}

#[test]
fn corrupted_grid_file_is_a_config_fault() {
    let dir = TempDir::new().unwrap();
    write(&dir, "psi.csv", "x,value\n0.0,0.0\n1.0,not-a-number\n");
    let text = TRIVIAL.replace("psi2 = \"sq(x)\"", "psi2 = \"grid(\\\"psi.csv\\\")\"");
    let (code, _, err) = run(bin()
        .arg("solve")
        .arg(write(&dir, "c.toml", &text))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("boundary.psi2"), "{err}");
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn harmonic_solve_echoes_the_initial_condition() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(bin()
        .arg("solve")
        .arg(sample("harmonic.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 0, "{out}{err}");
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,p_1,q_1"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(first, vec![0.0, 1.0, 0.0]);
    assert_eq!(traj.lines().count(), 202);
    let residuals = fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 201);
}

#[test]
fn connecting_solve_reports_a_vanishing_action() {
    let dir = TempDir::new().unwrap();
    let (code, _, err) = run(bin()
        .arg("solve")
        .arg(sample("connecting.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let report: toml::Table = fs::read_to_string(dir.path().join("report.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(report["status"].as_str(), Some("Converged"));
    let cert = report["certificate"].as_table().unwrap();
    assert!(cert["action_value"].as_float().unwrap() <= 1e-6);
    assert_eq!(cert["passed"].as_bool(), Some(true));
    assert!(report["hypotheses"]["checks"].as_array().unwrap().len() >= 4);
    assert!(report["stages"].as_array().unwrap().len() >= 2);
}

#[test]
fn stall_exits_3_and_still_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let text = TRIVIAL.replace("psi1 = \"sq(x)\"", "psi1 = \"sq(x, [1.0])\"")
        + "max_iters = 1\neps_schedule = [0.1]\npolish = false\n";
    let (code, out, _) = run(bin()
        .arg("solve")
        .arg(write(&dir, "c.toml", &text))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 3, "{out}");
    for f in ["trajectory.csv", "report.toml", "residuals.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report = fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert!(report.contains("status = \"StalledAboveTol\""));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        &TRIVIAL.replace("psi1 = \"sq(x)\"", "psi1 = \"sq(x, [1.0])\""),
    );
    let mut outputs = Vec::new();
    for (sub, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let out = dir.path().join(sub);
        let (code, _, _) = run(bin()
            .arg("solve")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .arg("--seed")
            .arg(seed));
        assert_eq!(code, 0);
        outputs.push(["trajectory.csv", "residuals.csv"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let report = fs::read_to_string(dir.path().join("c").join("report.toml")).unwrap();
    assert!(report.contains("seed = 6"));
}

#[test]
fn output_dir_defaults_to_the_config_location() {
    let dir = TempDir::new().unwrap();
    let text = TRIVIAL.to_string() + "[output]\ndir = \"results\"\nresiduals = false\n";
    let (code, _, _) = run(bin()
        .arg("solve")
        .arg(write(&dir, "c.toml", &text))
        .current_dir("/"));
    assert_eq!(code, 0);
    assert!(dir.path().join("results/trajectory.csv").exists());
    assert!(!dir.path().join("results/residuals.csv").exists());
}

fn sweep_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn lambda_sweep_reports_shrinking_prox_displacement() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(sample("quartic.toml"))
        .unwrap()
        .replace("[solver]\nm = 50\n", "[solver]\nm = 50\npolish = false\n");
    assert!(text.contains("polish = false"));
    let cfg = write(
        &dir,
        "q.toml",
        &text.replace("dir = \"out/quartic\"", "dir = \"sw\""),
    );
    let (code, out, err) = run(bin().env("SELFDUAL_WORKERS", "2").args([
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "lambda",
        "--values",
        "0.4, 0.2, 0.1",
    ]));
    assert_eq!(code, 0, "{err}");
    let file = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(out, file);
    assert!(file.starts_with("lambda,status,action,max_interior_residual,max_prox_displacement"));
    let rows = sweep_rows(&file);
    assert_eq!(rows.len(), 3);
    let disp: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(disp[0] > disp[1] && disp[1] > disp[2], "{disp:?}");
    let deriv: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    let (lo, hi) = deriv
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
    assert!(hi <= 2.0 * lo, "{deriv:?}");
}

#[test]
fn grid_sweep_is_deterministic_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        &TRIVIAL.replace("psi1 = \"sq(x)\"", "psi1 = \"sq(x, [1.0])\""),
    );
    let mut tables = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(workers);
        let (code, _, err) = run(bin().env("SELFDUAL_WORKERS", workers).args([
            "sweep",
            cfg.to_str().unwrap(),
            "--param",
            "M",
            "--values",
            "10,20,40",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 0, "{err}");
        tables.push(fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let rows = sweep_rows(std::str::from_utf8(&tables[0]).unwrap());
    assert!(rows.iter().all(|r| r[1] == "Converged"));
}

#[test]
fn sweep_argument_faults() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", TRIVIAL);
    let cfg = cfg.to_str().unwrap();
    for (param, values) in [
        ("lambda", ""),
        ("lambda", " , "),
        ("gamma", "0.1"),
        ("M", "2.5"),
        ("T", "-1"),
        ("eps", "x"),
    ] {
        let (code, _, err) = run(bin().args(["sweep", cfg, "--param", param, "--values", values]));
        assert_eq!(code, 1, "{param}={values:?}: {err}");
    }
    let (code, _, err) = run(bin()
        .env("SELFDUAL_WORKERS", "0")
        .args(["sweep", cfg, "--param", "lambda", "--values", "0.1"]));
    assert_eq!(code, 1);
    assert!(err.contains("SELFDUAL_WORKERS"));
}
