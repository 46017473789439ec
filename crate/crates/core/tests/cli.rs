use std::path::Path;
use std::process::{Command, Output};

fn bnpclaims(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnpclaims")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_config_key_exits_2() {
    let out = bnpclaims(&["fit-freq", "--set", "iteratoins=10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("iteratoins"));
}

#[test]
fn missing_input_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnpclaims(&["fit-freq", "--freq", s(&dir.path().join("none.csv")), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn predict_at_point() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let conf = sim.join("run.conf");
    assert!(bnpclaims(&["simulate", "--out", s(&sim), "--n", "120", "--seed", "2"]).status.success());
    assert!(bnpclaims(&["fit-freq", "-c", s(&conf), "--iterations", "200"]).status.success());
    let out = bnpclaims(&["predict", "-c", s(&conf), "--at", "0.5", "--exposure", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let masses: f64 = text.lines().skip(1).filter(|l| !l.starts_with('#')).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!(masses > 0.99 && masses <= 1.0 + 1e-9, "{masses}");
    let mean: f64 = text.lines().last().unwrap().trim_start_matches("# mean = ").parse().unwrap();
    assert!(mean > 0.0);

    let wrong = bnpclaims(&["predict", "-c", s(&conf), "--at", "0.5,1.0"]);
    assert_eq!(wrong.status.code(), Some(2));
}
