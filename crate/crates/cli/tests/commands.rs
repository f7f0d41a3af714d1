use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("commands");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(config: &str, name: &str, args: &[&str]) -> Output {
    let path = scratch(&format!("{name}.json"));
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_steklov")).arg("--config").arg(&path).args(args).output().unwrap()
}

#[test]
fn sweep_csv_has_the_documented_header() {
    let out = run(r#"{"h": 0.1, "samples": 3, "finite_differences": false}"#, "sweep", &["sweep", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,sigma,sigma_prime,sigma_second,fd_first,fd_second,lower_bound,upper_bound,h,sigma2_gap"
    );
    assert_eq!(lines.count(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("verdict: PASS"));
}

#[test]
fn single_sample_sweep_passes() {
    let out = run(r#"{"h": 0.1, "samples": 1}"#, "single", &["sweep"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn json_echoes_the_configuration() {
    let out = run(r#"{"h": 0.2, "hole_radius": 0.4}"#, "bounds", &["bounds"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["command"], "bounds");
    assert_eq!(json["seedless"], true);
    assert_eq!(json["config"]["hole_radius"], 0.4);
    assert_eq!(json["config"]["h"], 0.2);
    assert_eq!(json["config"]["workers"], 4);
    assert!(json["result"]["upper"].as_f64().unwrap() > json["result"]["lower"].as_f64().unwrap());
}

#[test]
fn failed_verdict_exits_with_two() {
    // The boundary formula for σ″ disagrees with finite differences.
    let out = run(r#"{"h": 0.1, "instances": [{"offset": 0.75}]}"#, "deriv", &["deriv-check", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verdict: FAIL"));
}

#[test]
fn invalid_configuration_exits_with_one() {
    let out = run(r#"{"radius": 2.0}"#, "unknown", &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(r#"{"hole_radius": 1.99}"#, "large", &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run("{}", "workers", &["solve", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convergence_output_is_bitwise_reproducible() {
    let config = r#"{"hole_radius": 1.0, "h0": 0.4, "levels": 3}"#;
    let first = run(config, "converge-a", &["converge", "--format", "csv", "--workers", "1"]);
    let second = run(config, "converge-b", &["converge", "--format", "csv", "--workers", "3"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let path = scratch("converge.csv");
    let third = run(config, "converge-c", &["converge", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(third.stdout.is_empty() && third.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), first.stdout);
}
