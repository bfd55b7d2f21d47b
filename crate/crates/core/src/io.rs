//! CSV renderers for run artifacts and atomic file output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::driver::{GaugeSeries, RunOutput, Snapshot, StepStats};
use crate::error::Result;
use crate::geometry::{CutCellTable, Side};
use crate::study::{ConvergenceReport, Effectiveness};

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn gauge_csv(g: &GaugeSeries) -> String {
    let mut s = String::from("t,h,hu,hv\n");
    for (t, q) in &g.samples {
        writeln!(s, "{t},{},{},{}", q.h, q.hu, q.hv).unwrap();
    }
    s
}

pub fn snapshot_csv(snap: &Snapshot) -> String {
    let mut s = format!("# t={} nx={} ny={} dx={}\n", snap.t, snap.nx, snap.ny, snap.dx);
    for row in snap.h.chunks(snap.nx) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn stats_csv(st: &StepStats) -> String {
    format!("steps,min_dt,mean_dt\n{},{},{}\n", st.steps, st.min_dt, st.mean_dt)
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("grid,dx,gauge,l1_error,ratio,order\n");
    for r in &report.rows {
        writeln!(s, "{},{},{},{},{},{}", r.grid, r.dx, r.gauge + 1, r.l1_error, opt(r.ratio), opt(r.order)).unwrap();
    }
    s
}

pub fn effectiveness_csv(e: &Effectiveness) -> String {
    let mut s = String::from("barrier,peak,reduction_percent\n");
    writeln!(s, "none,{},0", e.no_barrier_peak).unwrap();
    writeln!(s, "linear,{},{}", e.linear_peak, e.reduction(e.linear_peak)).unwrap();
    writeln!(s, "v,{},{}", e.v_peak, e.reduction(e.v_peak)).unwrap();
    s
}

/// One row per side of every cut cell.
pub fn geometry_csv(table: &CutCellTable) -> String {
    let mut s = String::from("i,j,side,area,area_fraction,centroid_x,centroid_y,barrier_length,merge_i,merge_j\n");
    let cell = table.grid.cell_area();
    for c in &table.cells {
        let length: f64 = c.segments.iter().map(|seg| seg.length).sum();
        for side in Side::BOTH {
            let sub = c.side(side);
            let (mi, mj) = match sub.merge_target {
                Some((i, j)) => (i.to_string(), j.to_string()),
                None => (String::new(), String::new()),
            };
            let name = match side {
                Side::Lower => "lower",
                Side::Upper => "upper",
            };
            writeln!(
                s,
                "{},{},{name},{},{},{},{},{length},{mi},{mj}",
                c.i,
                c.j,
                sub.area,
                sub.area / cell,
                sub.centroid[0],
                sub.centroid[1]
            )
            .unwrap();
        }
    }
    s
}

/// Writes gauges, snapshots and step statistics of a run into `dir`;
/// returns the files written.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for (k, g) in out.gauges.iter().enumerate() {
        files.push((dir.join(format!("gauge_{}.csv", k + 1)), gauge_csv(g)));
    }
    for (k, snap) in out.snapshots.iter().enumerate() {
        files.push((dir.join(format!("snapshot_{k:03}.csv")), snapshot_csv(snap)));
    }
    files.push((dir.join("stats.csv"), stats_csv(&out.stats)));
    for (path, contents) in &files {
        write_atomic(path, contents)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::ConservedState;

    #[test]
    fn gauge_rows_round_trip() {
        let g = GaugeSeries {
            point: [0.5, 0.5],
            side: None,
            samples: vec![(0.0, ConservedState::new(1.2, 0.0, 0.0)), (0.1, ConservedState::new(1.0 / 3.0, -0.25, 1e-17))],
        };
        let text = gauge_csv(&g);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,h,hu,hv"));
        lines.next();
        let v: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v, vec![0.1, 1.0 / 3.0, -0.25, 1e-17]);
    }

    #[test]
    fn snapshot_layout() {
        let snap = Snapshot { t: 0.5, nx: 2, ny: 3, dx: 0.5, h: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] };
        assert_eq!(snapshot_csv(&snap), "# t=0.5 nx=2 ny=3 dx=0.5\n1,2\n3,4\n5,6\n");
    }

    #[test]
    fn stats_layout() {
        let st = StepStats { steps: 3, min_dt: 0.01, mean_dt: 0.02 };
        assert_eq!(stats_csv(&st), "steps,min_dt,mean_dt\n3,0.01,0.02\n");
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out").join("a.csv");
        write_atomic(&path, "one\n").unwrap();
        write_atomic(&path, "two\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two\n");
        let entries: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
