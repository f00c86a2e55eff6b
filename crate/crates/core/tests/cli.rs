use std::fs;
use std::path::Path;
use std::process::Command;

fn roughflow() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_roughflow"));
    c.env("ROUGHFLOW_WORKERS", "2");
    c
}

#[test]
fn flat_smoke_passes_and_writes_zero_defects() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let st = roughflow().args(["run", "flat-smoke", "--no-plots", "--out"]).arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    for f in ["n32/rigidity_defect.csv", "n32/ricci_residual_residual.csv"] {
        let mut rd = csv::Reader::from_path(out.join(f)).unwrap();
        for rec in rd.records() {
            for v in rec.unwrap().iter().skip(1) {
                let v: f64 = v.parse().unwrap();
                assert!(v.is_nan() || v.abs() <= 1e-12, "{f}: {v}");
            }
        }
    }
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("trajectory_id = \"traj-n32\""));
    assert!(manifest.contains("source = \"traj-n32\""));
    assert!(!out.join("plots").exists());
}

#[test]
fn max_principle_kappa_margin_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mp");
    let st = roughflow().args(["run", "max-principle-kappa", "--no-plots", "--out"]).arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(out.join("n64/max_principle_bounds.csv")).unwrap();
    let col = rd.headers().unwrap().iter().position(|h| h == "kappa_margin").unwrap();
    for rec in rd.records() {
        let v: f64 = rec.unwrap()[col].parse().unwrap();
        assert!(v >= -1e-3, "{v}");
    }
}

#[test]
fn missing_beta_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "schema_version = 1\nname = \"bad\"\nresolutions = [16]\n[[analysis]]\nkind = \"beta_weak\"\nc_list = [1.0]\n",
    )
    .unwrap();
    let st = roughflow().arg("run").arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&st.stderr).contains("beta"));
}

#[test]
fn unconverged_picard_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("abort.toml");
    fs::write(
        &cfg,
        "schema_version = 1\nname = \"abort\"\nresolutions = [16]\n[rough]\namplitude = 0.04\nalpha = 0.1\n\
         [flow]\nsolver = \"picard\"\nmax_iterations = 1\noutput_steps = 8\n[[analysis]]\nkind = \"max_principle\"\n",
    )
    .unwrap();
    let st = roughflow().arg("run").arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(st.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&st.stderr).contains("scenario `abort` at resolution 16"));
}

#[test]
fn failing_gate_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("gate.toml");
    fs::write(
        &cfg,
        "schema_version = 1\nname = \"gate\"\nresolutions = [32]\n[rough]\nkind = \"smooth_fourier\"\namplitude = 0.02\n\
         [flow]\noutput_steps = 8\n[[analysis]]\nkind = \"max_principle\"\nbound = { kind = \"smooth\", kappa = 5.0 }\n",
    )
    .unwrap();
    let st = roughflow().arg("run").arg(&cfg).arg("--no-plots").arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stdout).contains("FAIL"));
}

#[test]
fn report_on_truncated_manifest_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("manifest.toml"), "schema_version = 1\nscenario = \"x").unwrap();
    let st = roughflow().arg("report").arg(tmp.path()).output().unwrap();
    assert_ne!(st.status.code(), Some(0));
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("manifest") && err.contains(&tmp.path().display().to_string()), "{err}");
}

#[test]
fn kernel_check_passes() {
    let st = roughflow().arg("kernel-check").output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&st.stdout).matches("pass").count(), 4);
}

#[test]
fn norms_of_saved_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let st = roughflow()
        .args(["run", "rough-max-principle", "--resolution", "16", "--no-plots", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    let st = roughflow().arg("norms").arg(out.join("n16/trajectory.bin")).arg("--out").arg(tmp.path().join("norms")).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("aggregate"));
    assert!(Path::new(&tmp.path().join("norms/x_norm_balls.csv")).exists());
}

#[test]
fn invalid_worker_count_is_rejected() {
    let st = Command::new(env!("CARGO_BIN_EXE_roughflow"))
        .env("ROUGHFLOW_WORKERS", "many")
        .args(["run", "flat-smoke", "--no-plots", "--out"])
        .arg(tempfile::tempdir().unwrap().path().join("o"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(3));
}
