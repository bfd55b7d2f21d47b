//! Scenario assembly and the time loop: initial state, bathymetry, CFL
//! control with exact output times, gauges, snapshots and step statistics.

use crate::error::{Error, Result};
use crate::geometry::{intersect_barrier, BarrierGeometry, CutCellTable, Grid, Point, Side};
use crate::mapped::{build_mapped_grid, MappedKind};
use crate::mesh::Mesh;
use crate::riemann::Axis;
use crate::solver::{BoundaryConditions, Solver, StepOutcome};
use crate::state::{ConservedState, SolverParams};

/// Time tolerance when matching output times.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bathymetry {
    Flat,
    /// Radial cone `peak · max(0, 1 − r/radius)`.
    Island { center: Point, radius: f64, peak: f64 },
}

impl Bathymetry {
    pub fn at(&self, p: Point) -> f64 {
        match *self {
            Bathymetry::Flat => 0.0,
            Bathymetry::Island { center, radius, peak } => {
                let r = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                peak * (1.0 - r / radius).max(0.0)
            }
        }
    }
}

/// Axis-aligned half plane holding the raised water of the dam break.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamRegion {
    pub axis: Axis,
    /// `true`: coordinate ≤ position; `false`: coordinate ≥ position.
    pub below: bool,
    pub position: f64,
}

impl DamRegion {
    pub fn contains(&self, p: Point) -> bool {
        let c = match self.axis {
            Axis::X => p[0],
            Axis::Y => p[1],
        };
        if self.below {
            c <= self.position
        } else {
            c >= self.position
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    /// Still-water surface level.
    pub steady: f64,
    /// Surface level inside the dam region.
    pub dam_height: f64,
    pub dam: Option<DamRegion>,
}

impl InitialCondition {
    pub fn surface(&self, p: Point) -> f64 {
        match self.dam {
            Some(d) if d.contains(p) => self.dam_height,
            _ => self.steady,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    #[default]
    CutCell,
    Mapped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Cells per direction.
    pub n: usize,
    pub barrier: Option<BarrierGeometry>,
    pub initial: InitialCondition,
    pub bathymetry: Bathymetry,
    pub boundary: BoundaryConditions,
    pub params: SolverParams,
    pub discretization: Discretization,
    pub gauges: Vec<Point>,
    pub end_time: f64,
    pub snapshot_times: Vec<f64>,
    /// Times the step size is truncated to hit exactly (gauge samples exist
    /// at these times).
    pub sample_times: Vec<f64>,
}

impl ScenarioConfig {
    /// Dam break against the straight model barrier: raised water below
    /// `y = 0.2`, extrapolation at the top.
    pub fn linear_dam_break(n: usize, beta: f64) -> Self {
        Self {
            n,
            barrier: Some(BarrierGeometry::linear_model(beta)),
            initial: InitialCondition {
                steady: 1.2,
                dam_height: 2.0,
                dam: Some(DamRegion { axis: Axis::Y, below: true, position: 0.2 }),
            },
            bathymetry: Bathymetry::Flat,
            boundary: BoundaryConditions { top: crate::solver::BoundaryKind::Extrapolation, ..Default::default() },
            params: SolverParams::default(),
            discretization: Discretization::CutCell,
            gauges: vec![[0.5, 0.8], [0.5, 0.39]],
            end_time: 1.4,
            snapshot_times: Vec::new(),
            sample_times: (0..=14).map(|k| k as f64 / 10.0).collect(),
        }
    }

    /// Dam break from the top against the V barrier, extrapolation at the
    /// bottom.
    pub fn v_dam_break(n: usize, beta: f64) -> Self {
        Self {
            barrier: Some(BarrierGeometry::v_model(beta)),
            initial: InitialCondition {
                steady: 1.2,
                dam_height: 2.0,
                dam: Some(DamRegion { axis: Axis::Y, below: false, position: 0.8 }),
            },
            boundary: BoundaryConditions { bottom: crate::solver::BoundaryKind::Extrapolation, ..Default::default() },
            gauges: vec![[0.25, 0.6], [0.75, 0.6], [0.25, 0.3], [0.75, 0.3]],
            ..Self::linear_dam_break(n, beta)
        }
    }

    /// Island protected by the straight barrier: the wave comes from the
    /// top, the island sits near the bottom (extrapolation) boundary.
    pub fn island(n: usize) -> Self {
        Self {
            barrier: Some(BarrierGeometry::linear_model(1.3)),
            initial: InitialCondition {
                steady: 1.2,
                dam_height: 1.5,
                dam: Some(DamRegion { axis: Axis::Y, below: false, position: 0.8 }),
            },
            bathymetry: Bathymetry::Island { center: [0.5, 0.2], radius: 0.15, peak: 1.3 },
            boundary: BoundaryConditions { bottom: crate::solver::BoundaryKind::Extrapolation, ..Default::default() },
            gauges: vec![[0.5, 0.2]],
            end_time: 2.0,
            sample_times: Vec::new(),
            ..Self::linear_dam_break(n, 1.3)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 2 {
            return Err(Error::Validation("grid".into()));
        }
        if let Some(b) = &self.barrier {
            b.validate()?;
        }
        let inside = |p: &Point| (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]);
        if !self.gauges.iter().all(inside) {
            return Err(Error::Validation("gauge".into()));
        }
        if !(self.initial.steady >= 0.0) {
            return Err(Error::Validation("steady".into()));
        }
        if self.initial.dam.is_some() && !(self.initial.dam_height >= self.initial.steady) {
            return Err(Error::Validation("dam_height".into()));
        }
        if !(self.end_time > 0.0) {
            return Err(Error::Validation("end_time".into()));
        }
        if self.snapshot_times.iter().chain(&self.sample_times).any(|t| !(*t >= 0.0)) {
            return Err(Error::Validation("times".into()));
        }
        if let Bathymetry::Island { radius, .. } = self.bathymetry {
            if !(radius > 0.0) {
                return Err(Error::Validation("radius".into()));
            }
        }
        Ok(())
    }

    /// Builds the mesh for the configured discretization.
    pub fn build_mesh(&self) -> Result<Mesh> {
        match (self.discretization, &self.barrier) {
            (Discretization::CutCell, Some(b)) => Mesh::cartesian(&intersect_barrier(Grid::square(self.n), b)?),
            (Discretization::CutCell, None) => Mesh::cartesian(&CutCellTable::empty(Grid::square(self.n))),
            (Discretization::Mapped, Some(b)) => build_mapped_grid(MappedKind::for_barrier(b), b, self.n),
            (Discretization::Mapped, None) => {
                let flat = BarrierGeometry { vertices: vec![[0.0, 0.5], [1.0, 0.5]], beta: 1.0 };
                let mut mesh = build_mapped_grid(MappedKind::Linear, &flat, self.n)?;
                mesh.dissolve_barrier();
                Ok(mesh)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSeries {
    pub point: Point,
    /// Side of the barrier holding the gauge (`None` without a barrier).
    pub side: Option<Side>,
    pub samples: Vec<(f64, ConservedState)>,
}

impl GaugeSeries {
    /// Sample recorded at time `t` (output times are hit exactly).
    pub fn at(&self, t: f64) -> Option<ConservedState> {
        self.samples.iter().find(|(s, _)| (s - t).abs() <= 1e-9).map(|(_, q)| *q)
    }

    pub fn peak_depth(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, (_, q)| m.max(q.h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub steps: usize,
    pub min_dt: f64,
    pub mean_dt: f64,
}

/// Depth field on the grid; cut cells hold the area-weighted mean of their
/// two sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    /// Row-major, `j` increasing upward.
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub gauges: Vec<GaugeSeries>,
    pub snapshots: Vec<Snapshot>,
    pub stats: StepStats,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Mass added by the drying fix over the run.
    pub drywet_mass: f64,
}

/// A scenario being integrated.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub solver: Solver,
    pub q: Vec<ConservedState>,
    pub t: f64,
    pub steps: usize,
    /// Volumes averaged by each gauge (several when it sits on an edge).
    gauge_volumes: Vec<Vec<usize>>,
    dt_sum: f64,
    dt_min: f64,
    /// Mass added by the drying fix so far.
    pub drywet_mass: f64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mesh = config.build_mesh()?;
        Self::with_mesh(config, mesh)
    }

    pub fn with_mesh(config: ScenarioConfig, mesh: Mesh) -> Result<Self> {
        let bed_at = |i: usize, j: usize, centroid: Point| -> f64 {
            match mesh.layout {
                // one bed value per grid cell, shared by both sides
                crate::mesh::Layout::Cartesian { grid, .. } => config.bathymetry.at(grid.cell_center(i, j)),
                crate::mesh::Layout::Mapped { .. } => config.bathymetry.at(centroid),
            }
        };
        let mut bed = Vec::with_capacity(mesh.n_interior);
        let mut init = Vec::with_capacity(mesh.n_interior);
        for v in &mesh.volumes[..mesh.n_interior] {
            let b = bed_at(v.cell.0, v.cell.1, v.centroid);
            let eta = config.initial.surface(v.centroid);
            bed.push(b);
            init.push(ConservedState::new((eta - b).max(0.0), 0.0, 0.0));
        }
        let gauge_volumes = config.gauges.iter().map(|&p| mesh.locate_all(p)).collect();
        let solver = Solver::new(mesh, config.params, config.boundary, bed)?;
        let q = solver.state_from(&init);
        Ok(Self {
            config,
            solver,
            q,
            t: 0.0,
            steps: 0,
            gauge_volumes,
            dt_sum: 0.0,
            dt_min: f64::INFINITY,
            drywet_mass: 0.0,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.solver.mesh
    }

    pub fn compute_dt(&self) -> Result<f64> {
        self.solver.compute_dt(&self.q)
    }

    /// One step of size `dt`; `cfl_dt` is the unconstrained step recorded in
    /// the statistics.
    pub fn step_with(&mut self, dt: f64, cfl_dt: f64) -> Result<StepOutcome> {
        let out = self.solver.step(&mut self.q, dt).map_err(|e| Error::Step {
            step: self.steps + 1,
            time: self.t,
            source: Box::new(e),
        })?;
        self.t += dt;
        self.steps += 1;
        self.dt_sum += cfl_dt;
        self.dt_min = self.dt_min.min(cfl_dt);
        self.drywet_mass += out.drywet_mass;
        Ok(out)
    }

    /// One CFL-limited step.
    pub fn step(&mut self) -> Result<f64> {
        let dt = self.compute_dt().map_err(|e| Error::Step { step: self.steps + 1, time: self.t, source: Box::new(e) })?;
        self.step_with(dt, dt)?;
        Ok(dt)
    }

    pub fn total_mass(&self) -> f64 {
        self.solver.total_mass(&self.q)
    }

    pub fn gauge_values(&self) -> Vec<ConservedState> {
        self.gauge_volumes
            .iter()
            .map(|vs| {
                let sum = vs.iter().fold(ConservedState::ZERO, |acc, &v| acc + self.q[v]);
                (1.0 / vs.len() as f64) * sum
            })
            .collect()
    }

    /// State of the volume containing `p`.
    pub fn value_at(&self, p: Point) -> ConservedState {
        self.q[self.mesh().locate(p)]
    }

    pub fn stats(&self) -> StepStats {
        StepStats {
            steps: self.steps,
            min_dt: if self.steps > 0 { self.dt_min } else { 0.0 },
            mean_dt: if self.steps > 0 { self.dt_sum / self.steps as f64 } else { 0.0 },
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let m = self.mesh();
        let mut h = Vec::with_capacity(m.nx * m.ny);
        for cv in &m.cell_volumes {
            let (mut mass, mut area) = (0.0, 0.0);
            for v in cv.iter().flatten() {
                mass += self.q[*v].h * m.volumes[*v].area;
                area += m.volumes[*v].area;
            }
            h.push(mass / area);
        }
        Snapshot { t: self.t, nx: m.nx, ny: m.ny, dx: 1.0 / m.nx as f64, h }
    }
}

/// Runs a scenario to its end time.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(config.clone())?;
    let barrier = config.barrier.clone();
    let mut gauges: Vec<GaugeSeries> = config
        .gauges
        .iter()
        .map(|&p| GaugeSeries { point: p, side: barrier.as_ref().map(|b| b.side_of(p)), samples: Vec::new() })
        .collect();
    let record = |sim: &Simulation, gauges: &mut Vec<GaugeSeries>| {
        for (g, q) in gauges.iter_mut().zip(sim.gauge_values()) {
            g.samples.push((sim.t, q));
        }
    };
    let mut targets: Vec<f64> =
        config.snapshot_times.iter().chain(&config.sample_times).copied().filter(|&t| t > 0.0 && t < config.end_time).collect();
    targets.push(config.end_time);
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);

    let mut snapshots = Vec::new();
    let wants_snapshot = |t: f64| config.snapshot_times.iter().any(|s| (s - t).abs() <= TIME_EPS);
    let initial_mass = sim.total_mass();
    record(&sim, &mut gauges);
    if wants_snapshot(0.0) {
        snapshots.push(sim.snapshot());
    }
    for &target in &targets {
        while sim.t < target - TIME_EPS {
            let cfl_dt = sim
                .compute_dt()
                .map_err(|e| Error::Step { step: sim.steps + 1, time: sim.t, source: Box::new(e) })?;
            let remaining = target - sim.t;
            let dt = if cfl_dt >= remaining - TIME_EPS { remaining } else { cfl_dt };
            sim.step_with(dt, cfl_dt)?;
            if (sim.t - target).abs() <= TIME_EPS {
                sim.t = target;
            }
            record(&sim, &mut gauges);
        }
        if wants_snapshot(target) {
            snapshots.push(sim.snapshot());
        }
    }
    Ok(RunOutput {
        gauges,
        snapshots,
        stats: sim.stats(),
        initial_mass,
        final_mass: sim.total_mass(),
        drywet_mass: sim.drywet_mass,
    })
}
