use std::path::PathBuf;
use std::process::{Command, Output};

fn nestnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestnet")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nestnet-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exhaustive_bits_report() {
    let o = nestnet(&["verify", "bits", "--n", "3", "--s", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("5120/5120 exact"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(nestnet(&["construct", "floor"]).status.code(), Some(2));
    assert_eq!(nestnet(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        nestnet(&["construct", "step", "--n", "2", "--r", "1", "--delta", "1/8", "--J", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn construct_then_verify_and_export() {
    let net = scratch("floor.json");
    let o =
        nestnet(&["construct", "floor", "--n", "2", "--r", "2", "--delta", "1/128", "--out", net.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = nestnet(&[
        "verify",
        "bounds",
        "--net",
        net.to_str().unwrap(),
        "--bound",
        "floor_nested",
        "--n",
        "2",
        "--s",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let flat = scratch("flat.json");
    let o = nestnet(&["export", "--in", net.to_str().unwrap(), "--out", flat.to_str().unwrap(), "--expand"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&flat).unwrap().contains("\"rational\""));
}

#[test]
fn scale_writes_bound_column() {
    let csv = scratch("scale.csv");
    let o = nestnet(&[
        "scale",
        "--d",
        "1",
        "--s",
        "2",
        "--p",
        "inf",
        "--target",
        "abs-shift:1/3",
        "--n",
        "2,3",
        "--points",
        "201",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "experiment,n,s,d,K,delta,params,bound,sup_err,l1_err,l2_err,seed,wall_ms");
    for (line, n) in lines.zip([2.0f64, 3.0]) {
        let bound: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!((bound - 7.0 / n.powi(3)).abs() < 1e-12, "{line}");
    }
}
