use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omnisurface"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
problem = "power-min"
trials = 2
schemes = ["ued", "eed", "irs"]

[sweep]
axis = "sinr_target"
values = [0.0, 5.0]

[base]
n_tx = 4
n_elements = 4
k_r = 1
k_t = 1
"#;

#[test]
fn sweep_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = run(&["sweep", "--config", arg(&cfg), "--out", arg(&out), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.starts_with("# omnisurface-results v1"));
    // header comment, column names, 2 points x 3 schemes x 2 trials
    assert_eq!(results.lines().count(), 2 + 12);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# omnisurface-summary v1"));
}

#[test]
fn scheme_flag_restricts_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"problem":"sum-rate","trials":1,"sweep":{"axis":"power_budget","values":[0.0]},"base":{"n_tx":2,"n_elements":4,"k_r":1,"k_t":1}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["sweep", "--config", arg(&cfg), "--out", arg(&out), "--scheme", "ued", "--scheme", "td"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2 + 2);
    assert!(results.contains(",ued,") && results.contains(",td,"));
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert!(!run(&["sweep", "--config", arg(&missing), "--out", arg(dir.path())]).status.success());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "trials = 1\nbogus_key = 3\n").unwrap();
    let o = run(&["sweep", "--config", arg(&bad), "--out", arg(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let zero = dir.path().join("zero.json");
    fs::write(&zero, r#"{"trials": 0}"#).unwrap();
    assert!(!run(&["sweep", "--config", arg(&zero), "--out", arg(dir.path())]).status.success());

    assert!(!run(&["sweep", "--profile", "laptop"]).status.success());
    assert!(!run(&["trace", "--scheme", "nonsense"]).status.success());
}

#[test]
fn io_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    // a regular file where a directory is needed
    let o = run(&["channels", "--out", arg(&file.join("ch.json"))]);
    assert!(!o.status.success());
}

#[test]
fn trace_and_channel_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, SMALL).unwrap();
    let trace = dir.path().join("trace.csv");
    let o = run(&["trace", "--config", arg(&cfg), "--out", arg(&trace), "--scheme", "sd", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("# omnisurface-trace v1"));
    assert!(text.lines().nth(1).unwrap().starts_with("iteration,objective"));

    let json = dir.path().join("ch.json");
    let bin = dir.path().join("ch.bin");
    for (path, format) in [(&json, "json"), (&bin, "bin")] {
        let o = run(&["channels", "--config", arg(&cfg), "--seed", "11", "--out", arg(path), "--format", format]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (hj, a) = omnisurface::channel::read_json(fs::File::open(&json).unwrap()).unwrap();
    let (hb, b) = omnisurface::channel::read_binary(fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(hj, hb);
    assert_eq!(hj.seed, 11);
    assert_eq!((a.n_tx(), a.n_elements(), a.k_r(), a.k_t()), (4, 4, 1, 1));
}

#[test]
fn oracle_writes_one_row_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle.csv");
    let o = run(&["oracle", "--instances", "1", "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# omnisurface-oracle v1"));
    assert_eq!(lines.len(), 3);
    let v: Vec<f64> = lines[2].split(',').skip(2).map(|x| x.parse().unwrap()).collect();
    assert!(v[0] <= v[1] * 1.05 && v[2] >= v[3] * 0.98, "{v:?}");
}
