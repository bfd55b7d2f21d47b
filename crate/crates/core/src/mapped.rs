//! Body-fitted reference grids: the uniform computational grid is mapped
//! column by column so that the line `η = y*` follows the barrier.

use crate::error::{Error, Result};
use crate::geometry::BarrierGeometry;
use crate::mesh::{Mapping, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappedKind {
    /// Skewed grid for a straight barrier.
    Linear,
    /// Chevron grid for a V barrier with its tip at `x = 0.5`.
    Chevron,
}

impl MappedKind {
    pub fn for_barrier(barrier: &BarrierGeometry) -> Self {
        if barrier.vertices.len() == 3 {
            MappedKind::Chevron
        } else {
            MappedKind::Linear
        }
    }
}

/// Computational row carrying the barrier: the midpoint of the vertex
/// ordinates, moved to the nearest grid line.
pub fn barrier_row(barrier: &BarrierGeometry, n: usize) -> usize {
    let (lo, hi) = barrier
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    ((0.5 * (lo + hi) * n as f64).round() as usize).clamp(1, n - 1)
}

/// Builds the `n × n` mapped mesh with the barrier on computational row
/// `barrier_row`.
pub fn build_mapped_grid(kind: MappedKind, barrier: &BarrierGeometry, n: usize) -> Result<Mesh> {
    barrier.validate()?;
    if n < 2 {
        return Err(Error::Validation("grid".into()));
    }
    match kind {
        MappedKind::Linear if barrier.vertices.len() != 2 => {
            return Err(Error::UnsupportedMapping("skewed grid needs a straight barrier".into()))
        }
        MappedKind::Chevron => {
            if barrier.vertices.len() != 3 || barrier.vertices[1][0] != 0.5 {
                return Err(Error::UnsupportedMapping("chevron grid needs a V barrier with its tip at x = 0.5".into()));
            }
            if n % 2 == 1 {
                return Err(Error::OddResolutionForChevron(n));
            }
        }
        _ => {}
    }
    if barrier.vertices.iter().any(|p| p[1] <= 0.0 || p[1] >= 1.0) {
        return Err(Error::UnsupportedMapping("barrier touches the top or bottom boundary".into()));
    }
    let row = barrier_row(barrier, n);
    let mapping = Mapping { barrier: barrier.clone(), ystar: row as f64 / n as f64 };
    Mesh::mapped(n, mapping, Some(row), barrier.beta)
}
