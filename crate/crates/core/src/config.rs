//! Scenario files: TOML with one section per concern.
//!
//! ```toml
//! [grid]
//! n = 100
//! discretization = "cutcell"   # or "mapped"
//!
//! [barrier]                    # omit for no barrier
//! vertices = [[0.0, 0.3], [1.0, 0.653]]
//! beta = 1.5
//!
//! [initial]
//! steady = 1.2
//! dam_jump = 0.8
//! dam_axis = "y"
//! dam_side = "below"           # raised water where y <= dam_position
//! dam_position = 0.2
//!
//! [bathymetry]                 # omit for a flat bed
//! kind = "island"
//! center = [0.5, 0.2]
//! radius = 0.15
//! peak = 1.3
//!
//! [boundary]                   # each side "wall" (default) or "extrapolation"
//! top = "extrapolation"
//!
//! [solver]
//! order = 2
//! cfl = 0.45
//! gravity = 9.81
//! average = "roe"              # or "einfeldt"
//!
//! [output]
//! gauges = [[0.5, 0.8], [0.5, 0.39]]
//! end_time = 1.4
//! snapshot_times = [0.3, 0.7]
//! sample_times = [0.0, 0.1]
//! ```

use serde::Deserialize;

use crate::driver::{Bathymetry, DamRegion, Discretization, InitialCondition, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{BarrierGeometry, Point};
use crate::riemann::Axis;
use crate::solver::{BoundaryConditions, BoundaryKind};
use crate::state::{AverageKind, Order, SolverParams};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    grid: GridSection,
    barrier: Option<BarrierSection>,
    initial: InitialSection,
    bathymetry: Option<BathymetrySection>,
    #[serde(default)]
    boundary: BoundarySection,
    #[serde(default)]
    solver: SolverSection,
    output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n: usize,
    #[serde(default)]
    discretization: DiscretizationName,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DiscretizationName {
    #[default]
    Cutcell,
    Mapped,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarrierSection {
    vertices: Vec<Point>,
    beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AxisName {
    X,
    Y,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DamSide {
    Below,
    Above,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    steady: f64,
    #[serde(default)]
    dam_jump: f64,
    dam_axis: Option<AxisName>,
    dam_side: Option<DamSide>,
    dam_position: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BathymetryKind {
    Flat,
    Island,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BathymetrySection {
    kind: BathymetryKind,
    center: Option<Point>,
    radius: Option<f64>,
    peak: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BoundaryName {
    #[default]
    Wall,
    Extrapolation,
}

impl From<BoundaryName> for BoundaryKind {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Wall => BoundaryKind::Wall,
            BoundaryName::Extrapolation => BoundaryKind::Extrapolation,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundarySection {
    #[serde(default)]
    left: BoundaryName,
    #[serde(default)]
    right: BoundaryName,
    #[serde(default)]
    bottom: BoundaryName,
    #[serde(default)]
    top: BoundaryName,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AverageName {
    Roe,
    Einfeldt,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    order: Option<u32>,
    cfl: Option<f64>,
    gravity: Option<f64>,
    average: Option<AverageName>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    gauges: Vec<Point>,
    end_time: f64,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    #[serde(default)]
    sample_times: Vec<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario file's contents.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let file: File = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let barrier = match file.barrier {
        Some(b) => Some(BarrierGeometry {
            vertices: b.vertices,
            beta: b.beta.ok_or_else(|| Error::Validation("beta".into()))?,
        }),
        None => None,
    };
    let init = file.initial;
    let dam = match (init.dam_axis, init.dam_side, init.dam_position) {
        (None, None, None) => None,
        (Some(axis), Some(side), Some(position)) => Some(DamRegion {
            axis: match axis {
                AxisName::X => Axis::X,
                AxisName::Y => Axis::Y,
            },
            below: matches!(side, DamSide::Below),
            position,
        }),
        _ => return Err(Error::Validation("dam".into())),
    };
    let bathymetry = match file.bathymetry {
        None | Some(BathymetrySection { kind: BathymetryKind::Flat, .. }) => Bathymetry::Flat,
        Some(b) => Bathymetry::Island {
            center: b.center.ok_or_else(|| Error::Validation("center".into()))?,
            radius: b.radius.ok_or_else(|| Error::Validation("radius".into()))?,
            peak: b.peak.ok_or_else(|| Error::Validation("peak".into()))?,
        },
    };
    let defaults = SolverParams::default();
    let s = file.solver;
    let params = SolverParams {
        gravity: s.gravity.unwrap_or(defaults.gravity),
        cfl_target: s.cfl.unwrap_or(defaults.cfl_target),
        order: match s.order {
            Some(k) => Order::from_int(k)?,
            None => defaults.order,
        },
        average_kind: match s.average {
            Some(AverageName::Roe) => AverageKind::Roe,
            Some(AverageName::Einfeldt) => AverageKind::Einfeldt,
            None => defaults.average_kind,
        },
    };
    let bc = file.boundary;
    let config = ScenarioConfig {
        n: file.grid.n,
        barrier,
        initial: InitialCondition { steady: init.steady, dam_height: init.steady + init.dam_jump, dam },
        bathymetry,
        boundary: BoundaryConditions {
            left: bc.left.into(),
            right: bc.right.into(),
            bottom: bc.bottom.into(),
            top: bc.top.into(),
        },
        params,
        discretization: match file.grid.discretization {
            DiscretizationName::Cutcell => Discretization::CutCell,
            DiscretizationName::Mapped => Discretization::Mapped,
        },
        gauges: file.output.gauges,
        end_time: file.output.end_time,
        snapshot_times: file.output.snapshot_times,
        sample_times: file.output.sample_times,
    };
    config.validate()?;
    Ok(config)
}

/// Reads and parses a scenario file.
pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
