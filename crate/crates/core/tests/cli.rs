use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qvortex::cli::{TABLE1_HEADER, TABLE2_HEADER};

fn qvortex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qvortex")).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

/// Data lines of a CSV after the `#` header block, header row first.
fn csv_body(text: &str) -> Vec<&str> {
    text.lines().skip_while(|l| l.starts_with('#')).collect()
}

#[test]
fn solve_writes_profile_solution_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = qvortex(&["solve", "--q0", "100", "--n", "1", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("# qvortex "));
    let body = csv_body(&profile);
    assert_eq!(body[0], "rho,phi,phi_rho,phi_rhorho");
    assert_eq!(body.len(), 1 + 2001);
    let last: Vec<f64> = body[2001].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 20.0);
    assert!(last[1].abs() < 1e-12);

    let sol: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    let w = sol["omega_sq"].as_f64().unwrap();
    assert!((w - 0.4287).abs() < 0.02 * 0.4287, "{w}");
    assert_eq!(sol["converged"], true);
    assert_eq!(sol["config"]["basis_size"], 60);
    assert_eq!(sol["config"]["q0"], 100.0);
    for key in ["phi_max", "residual_error", "iterations"] {
        assert!(!sol[key].is_null(), "missing {key}");
    }

    let bounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["bounds"]["omega_sq_max"], 2.2);
    assert_eq!(bounds["all_pass"], true);
    for key in ["necessary_frequency", "amplitude_bound", "decay_bound", "norm_threshold"] {
        assert_eq!(bounds["checks"][key], true, "{key}");
    }
}

#[test]
fn table1_schema_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = qvortex(&["table1", "--seed", "3", "--out", &out_arg(d.path())]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = fs::read(a.path().join("table1.csv")).unwrap();
    let tb = fs::read(b.path().join("table1.csv")).unwrap();
    assert_eq!(ta, tb);

    let text = String::from_utf8(ta).unwrap();
    assert!(text.contains("# rng_seed=3\n"));
    let body = csv_body(&text);
    assert_eq!(body[0], "q0,omega_sq,phi_max,residual_error,iterations,converged");
    assert_eq!(body[0], TABLE1_HEADER);
    let q0s: Vec<f64> = body[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(q0s, vec![10.0, 50.0, 100.0, 200.0, 500.0, 1000.0]);
    for line in &body[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        assert_eq!(cols[5], "true");
        // 17 significant digits in scientific form.
        assert_eq!(cols[1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{}", cols[1]);
    }
}

#[test]
fn table2_rows_and_rejection_of_zero_winding() {
    let dir = tempfile::tempdir().unwrap();
    let o = qvortex(&["table2", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    let body = csv_body(&text);
    assert_eq!(body[0], TABLE2_HEADER);
    let omegas: Vec<f64> = body[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(omegas.len(), 5);
    assert!(omegas.windows(2).all(|w| w[0] < w[1]));

    let o = qvortex(&["table2", "--ns", "1,0", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = qvortex(&["table2", "--n", "0", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dispersion_endpoints_match_solve() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        qvortex(&["dispersion", "--q0-min", "10", "--q0-max", "1000", "--points", "5", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("dispersion.csv")).unwrap();
    let body = csv_body(&text);
    assert_eq!(body[0], "kind,q0,omega_sq,phi_max,residual_error,iterations,converged");
    let sols: Vec<(f64, f64)> = body
        .iter()
        .filter(|l| l.starts_with("solution,"))
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[1].parse().unwrap(), c[2].parse().unwrap())
        })
        .collect();
    assert_eq!(sols.len(), 5);
    assert!(sols.windows(2).all(|w| w[0].1 > w[1].1 && w[0].0 < w[1].0));
    assert!(sols.iter().all(|s| s.1 > 0.2));
    assert_eq!(body.iter().filter(|l| l.starts_with("omega_sq_min,")).count(), 2);
    assert_eq!(body.iter().filter(|l| l.starts_with("omega_sq_max,")).count(), 2);

    for (q0, w) in [sols[0], sols[4]] {
        let sd = tempfile::tempdir().unwrap();
        let o = qvortex(&["solve", "--q0", &q0.to_string(), "--out", &out_arg(sd.path())]);
        assert!(o.status.success());
        let sol: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sd.path().join("solution.json")).unwrap()).unwrap();
        assert!((sol["omega_sq"].as_f64().unwrap() - w).abs() < 1e-6);
    }
}

#[test]
fn invalid_configs_exit_nonzero_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = qvortex(&["solve", "--q0", "0", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error [config]"));

    let o = qvortex(&["solve", "--set", "b=0.9", "--set", "a_pot=2", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b > a²/4 violated"));

    let o = qvortex(&["solve", "--set", "nonsense=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("solution.json").exists());
}

#[test]
fn non_convergence_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = qvortex(&["solve", "--set", "max_iter=3", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error [solve]"));
    let sol: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(sol["converged"], false);
}

#[test]
fn config_file_is_applied_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# three-quantum vortex\nn = 3\nq0 = 100\nrestarts = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = qvortex(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let profile = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(profile.contains("# n=3\n") && profile.contains("# restarts=1\n"));
    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    assert!((sol["omega_sq"].as_f64().unwrap() - 0.6657).abs() < 0.02 * 0.6657);
}

#[test]
fn verify_passes_by_default_and_names_coarse_grid_failure() {
    let o = qvortex(&["verify"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("PASS oracle_cross_check"));

    let o = qvortex(&["verify", "--set", "quad_panels=2"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout.contains("FAIL orthonormality"), "{stdout}");

    let o = qvortex(&["verify", "--set", "decay_p0_fraction=0.9"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS decay_bound: P0=18"));
}

#[test]
fn oracle_compare_single_case() {
    let dir = tempfile::tempdir().unwrap();
    let o = qvortex(&["oracle-compare", "--n", "2", "--q0", "50", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = fs::read_to_string(dir.path().join("oracle_compare.csv")).unwrap();
    let body = csv_body(&text);
    assert_eq!(body.len(), 2);
    assert!(body[1].starts_with("2,5.0000000000000000e1,"));
}
