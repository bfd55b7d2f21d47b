//! Grid convergence against a mapped-grid reference and barrier
//! effectiveness comparisons.

use crate::driver::{run, Discretization, RunOutput, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::BarrierGeometry;

/// Mean absolute difference of two equally long series.
pub fn l1_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Observed order between a coarse and a fine grid.
pub fn observed_order(e_coarse: f64, e_fine: f64, dx_coarse: f64, dx_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (dx_coarse / dx_fine).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub grid: usize,
    pub dx: f64,
    /// Gauge index in the scenario.
    pub gauge: usize,
    pub l1_error: f64,
    /// Error of the previous (coarser) grid over this one.
    pub ratio: Option<f64>,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub reference_n: usize,
    pub sample_times: Vec<f64>,
}

impl ConvergenceReport {
    pub fn gauge_rows(&self, gauge: usize) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.gauge == gauge).collect()
    }

    /// Order over the whole sweep (coarsest against finest grid).
    pub fn sweep_order(&self, gauge: usize) -> Option<f64> {
        let rows = self.gauge_rows(gauge);
        let (first, last) = (rows.first()?, rows.last()?);
        (rows.len() > 1).then(|| observed_order(first.l1_error, last.l1_error, first.dx, last.dx))
    }
}

fn depth_series(out: &RunOutput, gauge: usize, times: &[f64]) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            out.gauges[gauge].at(t).map(|q| q.h).ok_or_else(|| Error::Validation("times".into()))
        })
        .collect()
}

/// Runs the mapped reference once and the cut-cell solver on each grid
/// (in parallel), comparing gauge depths at `sample_times`.
pub fn convergence_study(
    scenario: &ScenarioConfig,
    grids: &[usize],
    reference_n: usize,
    sample_times: &[f64],
) -> Result<ConvergenceReport> {
    if grids.is_empty() || grids.iter().any(|&n| n >= reference_n) || grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("grids".into()));
    }
    let mut base = scenario.clone();
    base.sample_times = sample_times.to_vec();
    base.snapshot_times.clear();
    if let Some(last) = sample_times.iter().copied().reduce(f64::max) {
        base.end_time = last;
    }
    let reference = ScenarioConfig { n: reference_n, discretization: Discretization::Mapped, ..base.clone() };
    let configs: Vec<ScenarioConfig> = std::iter::once(reference)
        .chain(grids.iter().map(|&n| ScenarioConfig { n, discretization: Discretization::CutCell, ..base.clone() }))
        .collect();
    let outputs: Vec<Result<RunOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run(c))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let reference = outputs.next().expect("reference run");
    let runs: Vec<RunOutput> = outputs.collect();

    let mut rows = Vec::new();
    for gauge in 0..base.gauges.len() {
        let exact = depth_series(&reference, gauge, sample_times)?;
        let mut prev: Option<(f64, f64)> = None;
        for (&n, out) in grids.iter().zip(&runs) {
            let dx = 1.0 / n as f64;
            let e = l1_error(&depth_series(out, gauge, sample_times)?, &exact);
            let (ratio, order) = match prev {
                Some((pe, pdx)) => (Some(pe / e), Some(observed_order(pe, e, pdx, dx))),
                None => (None, None),
            };
            rows.push(ConvergenceRow { grid: n, dx, gauge, l1_error: e, ratio, order });
            prev = Some((e, dx));
        }
    }
    Ok(ConvergenceReport { rows, reference_n, sample_times: sample_times.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effectiveness {
    pub no_barrier_peak: f64,
    pub linear_peak: f64,
    pub v_peak: f64,
}

impl Effectiveness {
    /// Percent of the unprotected peak removed by a barrier.
    pub fn reduction(&self, peak: f64) -> f64 {
        100.0 * (1.0 - peak / self.no_barrier_peak)
    }
}

/// V barrier made of two copies of the upper half of a straight barrier
/// spanning the domain, bent at `x = 0.5`.
pub fn folded_v(linear: &BarrierGeometry) -> Result<BarrierGeometry> {
    if linear.vertices.len() != 2 {
        return Err(Error::Validation("barrier".into()));
    }
    let [a, b] = [linear.vertices[0], linear.vertices[1]];
    let at = |x: f64| a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0]);
    let (mid, high) = (at(0.5), at(0.0).max(at(1.0)));
    Ok(BarrierGeometry { vertices: vec![[0.0, high], [0.5, mid], [1.0, high]], beta: linear.beta })
}

/// Peak gauge depth (first gauge) without a barrier, with the scenario's
/// straight barrier and with the folded V barrier.
pub fn compare_effectiveness(scenario: &ScenarioConfig) -> Result<Effectiveness> {
    let linear = scenario.barrier.clone().ok_or_else(|| Error::Validation("barrier".into()))?;
    let v = folded_v(&linear)?;
    if scenario.gauges.is_empty() {
        return Err(Error::Validation("gauge".into()));
    }
    let configs = [None, Some(linear), Some(v)].map(|barrier| ScenarioConfig { barrier, ..scenario.clone() });
    let peaks: Vec<Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            configs.iter().map(|c| s.spawn(move || run(c).map(|o| o.gauges[0].peak_depth()))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let peaks = peaks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Effectiveness { no_barrier_peak: peaks[0], linear_peak: peaks[1], v_peak: peaks[2] })
}
