use std::fs;
use std::path::Path;
use std::process::Command;

fn lyapctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lyapctl"))
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

#[test]
fn explicit_solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = lyapctl()
        .args(["solve", &config("explicit_3cell.json"), "--log-level", "warn", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["feasibility.txt", "lp_log.txt", "lp.mps", "policy.csv", "measure.csv", "certificate.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let policy = fs::read_to_string(out.join("policy.csv")).unwrap();
    assert!(policy.starts_with("cell_index,action_index,control,V,mu\n"));
    assert_eq!(policy.lines().count(), 4);
    let cert = fs::read_to_string(out.join("certificate.txt")).unwrap();
    assert!(cert.starts_with("status = valid"));

    // a second run refuses to overwrite, --force allows it
    let again = lyapctl()
        .args(["solve", &config("explicit_3cell.json"), "--log-level", "off", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert_ne!(again.code(), Some(0));
    let forced = lyapctl()
        .args(["solve", &config("explicit_3cell.json"), "--log-level", "off", "--force", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(forced.code(), Some(0));
    assert_eq!(fs::read_to_string(out.join("policy.csv")).unwrap(), policy);
}

#[test]
fn gamma_at_one_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("explicit_3cell.json")).unwrap().replace("1.1", "1.0");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let status = lyapctl()
        .arg("solve")
        .arg(&path)
        .args(["--log-level", "off", "--out-dir"])
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn non_stabilizable_explicit_system_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trap.json");
    fs::write(
        &path,
        r#"{"system": {"name": "explicit", "matrices": [[[1, 0], [0, 1]]]},
            "lp": {"gamma": 1.5, "cost": {"kind": "tabulated", "values": [[1]]}}}"#,
    )
    .unwrap();
    let status = lyapctl()
        .arg("solve")
        .arg(&path)
        .args(["--log-level", "off", "--out-dir"])
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}
