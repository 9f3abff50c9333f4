use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn geomvi(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomvi"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("GEOMVI_TOL")
        .env_remove("GEOMVI_MAX_ITERS")
        .env_remove("GEOMVI_RETRACTION")
        .env_remove("GEOMVI_OUT_DIR")
        .output()
        .expect("run geomvi")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn diagnostics(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("diagnostics.json")).unwrap()).unwrap()
}

fn with_edit(name: &str, from: &str, to: &str, dir: &Path) -> PathBuf {
    let body = fs::read_to_string(fixture(name)).unwrap();
    assert!(body.contains(from), "{from} not in {name}");
    let path = dir.join(name);
    fs::write(&path, body.replacen(from, to, 1)).unwrap();
    path
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .filter_map(|rec| rec.unwrap().get(i).unwrap().parse().ok())
        .collect()
}

#[test]
fn steady_spin_converges_immediately_with_constant_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let o = geomvi(&["solve", fixture("free_rigid_body_spin.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let d = diagnostics(dir.path());
    assert!(d["iterations"].as_u64().unwrap() <= 3);
    let csv_text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    for c in ["mu1", "mu2", "mu3"] {
        let mu = column(&csv_text, c);
        assert_eq!(mu.len(), 20);
        assert!(mu.iter().all(|m| (m - mu[0]).abs() <= 1e-12), "{c} varies: {mu:?}");
    }
}

#[test]
fn se2_fixture_solves_to_tight_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = geomvi(&["solve", fixture("se2_vehicle.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let d = diagnostics(dir.path());
    assert!(d["residual_inf"].as_f64().unwrap() <= 1e-10);
    assert_eq!(d["counts"]["unknowns"], d["counts"]["equations"]);
    assert_eq!(d["counts"]["unknowns"].as_u64().unwrap(), 37 + 3 * 38 + 2 * 39);
    let header = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,q1,xi1,xi2,xi3,lambda1,lambda2,mu1,mu2,mu3,g11,"));
}

#[test]
fn trajectory_output_is_bit_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = geomvi(&["solve", fixture("ball_plate.toml").to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    }
    for f in ["trajectory.csv", "diagnostics.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_step_size_is_a_config_error_naming_h() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_edit("free_particle.toml", "h = 0.0625\n", "", dir.path());
    let o = geomvi(&["solve", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("`h`"), "{}", text(&o.stderr));
}

#[test]
fn bad_fields_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("N = 16", "N = 3", "`N`"),
        ("retraction = \"cayley\"", "retraction = \"rk4\"", "`retraction`"),
        ("qT = [1.5, 1.0]", "qT = [1.5]", "`boundary.qT`"),
    ];
    for (from, to, field) in cases {
        let cfg = with_edit("free_particle.toml", from, to, dir.path());
        let o = geomvi(&["solve", cfg.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(1), "{to}");
        assert!(text(&o.stderr).contains(field), "{to}: {}", text(&o.stderr));
    }
}

#[test]
fn no_convergence_exits_2_and_still_writes_the_best_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_edit("se2_vehicle.toml", "sequence = [10, 20]", "", dir.path());
    let o = geomvi(&["solve", cfg.to_str().unwrap(), "--max-iters", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
    let d = diagnostics(dir.path());
    assert_eq!(d["converged"], false);
    assert_eq!(d["iterations"], 2);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn environment_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geomvi"))
        .args(["solve", fixture("free_rigid_body_spin.toml").to_str().unwrap()])
        .env("GEOMVI_OUT_DIR", dir.path())
        .env("GEOMVI_RETRACTION", "exp4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert_eq!(diagnostics(dir.path())["retraction"], "exp4");

    let o = Command::new(env!("CARGO_BIN_EXE_geomvi"))
        .args(["solve", fixture("free_rigid_body_spin.toml").to_str().unwrap()])
        .env("GEOMVI_OUT_DIR", dir.path())
        .env("GEOMVI_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("solver.tol"));
}

#[test]
fn oracle_passes_for_both_models_and_is_deterministic() {
    for name in ["se2_vehicle.toml", "ball_plate.toml"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let o = geomvi(&["oracle", fixture(name).to_str().unwrap(), "--seed", "42", "--steps", "7"], dir.path());
            assert_eq!(o.status.code(), Some(0), "{name}: {}", text(&o.stdout));
            assert!(text(&o.stdout).starts_with("PASS"));
        }
        assert_eq!(
            fs::read(a.path().join("oracle.json")).unwrap(),
            fs::read(b.path().join("oracle.json")).unwrap()
        );
    }
}

#[test]
fn flipped_block_fails_the_oracle_and_is_named() {
    let dir = tempfile::tempdir().unwrap();
    for (block, shown) in [("group", "group"), ("configuration", "configuration"), ("constraint", "constraint")] {
        let o = geomvi(
            &["oracle", fixture("se2_vehicle.toml").to_str().unwrap(), "--steps", "7", "--flip-sign", block],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(2));
        let out = text(&o.stdout);
        assert!(out.starts_with("FAIL") && out.contains(shown), "{out}");
    }
}

#[test]
fn convergence_requires_a_geometric_h_list() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("free_particle.toml");
    for list in ["0.125,0.0625", "0.125,0.0625,0.05"] {
        let o = geomvi(&["convergence", f.to_str().unwrap(), "--h-list", list], dir.path());
        assert_eq!(o.status.code(), Some(1), "{list}");
        assert!(text(&o.stderr).contains("h_list"));
    }
    let o = geomvi(&["convergence", f.to_str().unwrap(), "--h-list", "0.3,0.15,0.075"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("h = 0.3"), "{}", text(&o.stderr));
}

#[test]
fn free_particle_errors_are_at_round_off() {
    let dir = tempfile::tempdir().unwrap();
    let o = geomvi(&["convergence", fixture("free_particle.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let table = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let e = column(&table, "error");
    assert_eq!(e.len(), 3);
    assert!(e.iter().all(|e| *e <= 1e-12), "{e:?}");
}
