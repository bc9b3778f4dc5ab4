use std::path::Path;
use std::process::{Command, Output};

const LINE: &str = r#"
scenario = "line"
support = { kind = "half_space", dim = 1, normal = [0.0, 1.0] }
reaction = "kpp_logistic"
grid = { mode = "line", range = [-20.0, 120.0], h = 0.2 }
time = { t_final = 40.0, snapshots = 20 }
boundary = { sentinel = ["top"] }

[[diagnostics]]
kind = "speed"
angles = [0.0]
"#;

const PLANE: &str = r#"
scenario = "disc"
support = { kind = "ball_union", dim = 2, centers = [[0.0, 0.0]], radii = [3.0] }
reaction = "kpp_logistic"
grid = { mode = "plane", x = [-12.0, 12.0], y = [-12.0, 12.0], h = 0.5 }
time = { t_final = 2.0, snapshots = 2 }
"#;

fn rdspread(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rdspread"));
    cmd.args(args).env_remove("RDSPREAD_THREADS").env_remove("RDSPREAD_DETERMINISTIC");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn speed_of_the_bistable_cubic() {
    let o = rdspread(&["speed", "--reaction", "{ kind = \"bistable\", alpha = 0.25 }"], &[]);
    assert!(o.status.success());
    let c: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("c*: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((c - 0.5 / 2f64.sqrt()).abs() < 1e-3, "{c}");
}

#[test]
fn simulate_writes_manifest_and_lag_reads_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "line.toml", LINE);
    let out = tmp.path().join("run");
    let o = rdspread(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    let mut lines = manifest.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "time,file,contaminated,boundary_deviation");
    assert_eq!(lines.count(), 20);
    let f = rdspread_core::solver::read_snapshot(&out.join("snap_0019.rdf")).unwrap();
    assert!((f.t - 40.0).abs() < 0.01, "{}", f.t);
    let o = rdspread(&["lag", "--dir", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("predicted 3"));
}

#[test]
fn snapshots_do_not_depend_on_the_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "disc.toml", PLANE);
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = rdspread(
            &["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--preview"],
            &[("RDSPREAD_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let pgm = std::fs::read(out.join("snap_0001.pgm")).unwrap();
        assert!(pgm.starts_with(b"P5\n48 48\n255\n"));
        bytes.push((std::fs::read(out.join("snap_0001.rdf")).unwrap(), std::fs::read(out.join("manifest.csv")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "line.toml", LINE);
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("r{k}"));
        let o = rdspread(
            &["verify", "--config", &cfg, "--out", out.to_str().unwrap()],
            &[("RDSPREAD_DETERMINISTIC", "1")],
        );
        assert!(o.status.success(), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(out.join("line/report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn typos_are_fatal_with_a_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &LINE.replace("reaction =", "reactoin ="));
    let o = rdspread(&["verify", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("reaction"), "{err}");
}

#[test]
fn verify_suite_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("reports");
    let o = rdspread(&["verify", "--suite", "c01_bistable_speed", "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = rdspread(&["report", "--dir", out.to_str().unwrap()], &[]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1/1 scenarios passed"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# suite_hash="));
}

#[test]
fn report_refuses_mixed_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "line.toml", LINE);
    let out = tmp.path().join("reports");
    assert!(rdspread(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()], &[]).status.success());
    assert!(rdspread(&["verify", "--suite", "c01_bistable_speed", "--out", out.to_str().unwrap()], &[])
        .status
        .success());
    let o = rdspread(&["report", "--dir", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different suite"));
}

#[test]
fn failing_criteria_give_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "line.toml", &format!("{LINE}expected = 3.0\n"));
    let o = rdspread(&["verify", "--config", &cfg, "--out", tmp.path().join("r").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn geometry_of_the_cone() {
    let o = rdspread(
        &[
            "geometry",
            "--support",
            "{ kind = \"subgraph\", dim = 2, gamma = { shape = \"linear_cone\", alpha = 1.0 } }",
            "--directions",
            "4",
        ],
        &[],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("hypothesis on U holds: true"));
    let w: f64 = text
        .lines()
        .find(|l| l.starts_with("0.000000,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((w - 2.0 * 2f64.sqrt()).abs() < 1e-3, "{w}");
}
