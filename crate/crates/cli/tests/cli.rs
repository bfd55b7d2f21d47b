use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid]
n = 20

[barrier]
vertices = [[0.0, 0.3], [1.0, 0.653]]
beta = 1.5

[initial]
steady = 1.2
dam_jump = 0.8
dam_axis = "y"
dam_side = "below"
dam_position = 0.2

[boundary]
top = "extrapolation"

[output]
gauges = [[0.5, 0.8], [0.5, 0.39]]
end_time = 0.2
snapshot_times = [0.1]
"#;

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swe-barrier"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = cli(&["run", &config], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["gauge_1.csv", "gauge_2.csv", "snapshot_000.csv", "stats.csv"]);
    let gauge = fs::read_to_string(out.join("gauge_1.csv")).unwrap();
    assert!(gauge.starts_with("t,h,hu,hv\n0,1.2,0,0\n"), "{gauge}");
    let snap = fs::read_to_string(out.join("snapshot_000.csv")).unwrap();
    assert!(snap.starts_with("# t=0.1 nx=20 ny=20"));
    assert_eq!(snap.lines().count(), 21);
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(cli(&["run", &config], &a).status.success());
    assert!(cli(&["run", &config], &b).status.success());
    for name in ["gauge_1.csv", "gauge_2.csv", "snapshot_000.csv", "stats.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn geometry_lists_both_sides_of_each_cut_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert!(cli(&["geometry", &config], &out).status.success());
    let text = fs::read_to_string(out.join("geometry.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty() && rows.len() % 2 == 0);
    for pair in rows.chunks(2) {
        let frac: f64 = pair.iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
        assert!((frac - 1.0).abs() < 1e-12, "{pair:?}");
    }
}

#[test]
fn unknown_key_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("beta = 1.5", "beta = 1.5\nheight = 2.0"));
    let o = cli(&["run", &config], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 8") && err.contains("height"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "does-not-exist.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn converge_needs_sample_times() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let o = cli(&["converge", &config, "--grids", "10,20", "--ref", "40"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sample_times"));
}

#[test]
fn converge_reports_each_grid_and_gauge() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL}sample_times = [0.0, 0.1, 0.2]\n"));
    let out = dir.path().join("out");
    let o = cli(&["converge", &config, "--grids", "10,20", "--ref", "40"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "grid,dx,gauge,l1_error,ratio,order");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("10,0.1,1,") && lines[1].ends_with(",,"));
    assert!(lines[2].starts_with("20,0.05,1,"));
}
