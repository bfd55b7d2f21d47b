//! Wave redistribution across the zero-width barrier.
//!
//! States on both sides of a barrier edge are rotated into the barrier frame
//! (normal pointing from the lower to the upper side), two ghost Riemann
//! problems are solved against a state sitting on the barrier crest, and the
//! combined f-waves are re-expressed in a single merged eigensystem.

use crate::error::{Error, Result};
use crate::riemann::{solve_edge, Axis, EdgeFluctuations};
use crate::state::{physical_flux_x, AverageKind, ConservedState};

/// Unit normal/tangent pair of a barrier edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

impl Frame {
    /// Frame with the given unit normal and the tangent rotated +90° from it.
    pub fn from_normal(normal: [f64; 2]) -> Self {
        Self { normal, tangent: [-normal[1], normal[0]] }
    }
}

/// State expressed in the barrier frame: `[h, h·u_n, h·u_t]`.
pub type RotatedState = ConservedState;

pub fn rotate(q: ConservedState, frame: &Frame) -> RotatedState {
    let [n1, n2] = frame.normal;
    let [t1, t2] = frame.tangent;
    ConservedState::new(q.h, n1 * q.hu + n2 * q.hv, t1 * q.hu + t2 * q.hv)
}

/// Applies `Rᵀ` to a rotated-frame vector.
pub fn rotate_back(f: [f64; 3], frame: &Frame) -> [f64; 3] {
    let [n1, n2] = frame.normal;
    let [t1, t2] = frame.tangent;
    [f[0], n1 * f[1] + t1 * f[2], n2 * f[1] + t2 * f[2]]
}

/// Ghost state sitting on the barrier crest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostState {
    pub state: ConservedState,
    /// Bed level of the ghost cell: local bathymetry plus barrier height.
    pub bstar: f64,
    /// Both free surfaces are below the crest.
    pub blocking: bool,
}

/// The smaller-magnitude of two momenta, keeping its sign.
fn min_magnitude(a: f64, b: f64) -> f64 {
    if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

/// Builds the crest ghost state from the two rotated side states.
pub fn ghost_state(q_lower: RotatedState, q_upper: RotatedState, beta: f64, bathymetry: f64) -> GhostState {
    let bstar = bathymetry + beta;
    if q_lower.h.max(q_upper.h) < beta {
        return GhostState { state: ConservedState::ZERO, bstar, blocking: true };
    }
    let h = (q_lower.h.min(q_upper.h) - beta).max(0.0);
    let state = if h > 0.0 {
        ConservedState::new(h, min_magnitude(q_lower.hu, q_upper.hu), min_magnitude(q_lower.hv, q_upper.hv))
    } else {
        ConservedState::ZERO
    };
    GhostState { state, bstar, blocking: false }
}

/// Result of the merged redistribution solve, in the barrier frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedistributedWaves {
    pub speeds: [f64; 3],
    pub vectors: [[f64; 3]; 3],
    pub coefficients: [f64; 3],
    pub plus: [f64; 3],
    pub minus: [f64; 3],
}

impl RedistributedWaves {
    pub fn waves(&self) -> [[f64; 3]; 3] {
        let mut w = [[0.0; 3]; 3];
        for p in 0..3 {
            for k in 0..3 {
                w[p][k] = self.coefficients[p] * self.vectors[p][k];
            }
        }
        w
    }
}

/// Roe-type decomposition of one ghost Riemann problem, dry sides allowed.
fn ghost_problem(ql: ConservedState, qr: ConservedState, bl: f64, br: f64, g: f64) -> Result<EdgeFluctuations> {
    if ql.is_dry() && qr.is_dry() {
        return Ok(EdgeFluctuations::default());
    }
    let wl = if ql.is_dry() { 0.0 } else { ql.h.sqrt() };
    let wr = if qr.is_dry() { 0.0 } else { qr.h.sqrt() };
    let avg = crate::riemann::Averages {
        hstar: 0.5 * (ql.h + qr.h),
        ustar: (wl * ql.u() + wr * qr.u()) / (wl + wr),
        vstar: (wl * ql.v() + wr * qr.v()) / (wl + wr),
    };
    let basis = crate::riemann::eigen_basis(avg, Axis::X, g);
    crate::riemann::fwave_decompose(ql, qr, bl, br, &basis, g)
}

/// Redistributes the waves of the two ghost problems `Q_L | Q*` and `Q* | Q_U`.
///
/// Returns `plus + minus = f(Q_U) − f(Q_L) − Ψ_L − Ψ_U`, the total f-wave
/// content of both ghost problems.
pub fn redistribute(
    q_lower: RotatedState,
    q_upper: RotatedState,
    ghost: &GhostState,
    b_lower: f64,
    b_upper: f64,
    g: f64,
) -> Result<RedistributedWaves> {
    let lower = ghost_problem(q_lower, ghost.state, b_lower, ghost.bstar, g)?;
    let upper = ghost_problem(ghost.state, q_upper, ghost.bstar, b_upper, g)?;
    // Summing the ghost fluctuations loses digits when the ghost is nearly dry.
    let total = redistribution_target(q_lower, q_upper, ghost, b_lower, b_upper, g);
    let speeds = [
        0.5 * (upper.speeds[0] + lower.speeds[0]),
        0.5 * (upper.speeds[1] + lower.speeds[1]),
        0.5 * (upper.speeds[2] + lower.speeds[2]),
    ];
    let vbar = 0.5 * (q_lower.v() + q_upper.v());
    let vectors = [[1.0, speeds[0], vbar], [0.0, 0.0, 1.0], [1.0, speeds[2], vbar]];
    let den = speeds[2] - speeds[0];
    if !(den.abs() > 1e-12) || !den.is_finite() {
        return Err(Error::SingularRedistribution);
    }
    let e1 = (speeds[2] * total[0] - total[1]) / den;
    let e3 = (total[1] - speeds[0] * total[0]) / den;
    let e2 = total[2] - vbar * total[0];
    let coefficients = [e1, e2, e3];
    let mut waves = [[0.0; 3]; 3];
    for p in 0..3 {
        for k in 0..3 {
            waves[p][k] = coefficients[p] * vectors[p][k];
        }
    }
    let split = EdgeFluctuations::from_waves(waves, speeds, coefficients);
    Ok(RedistributedWaves { speeds, vectors, coefficients, plus: split.plus, minus: split.minus })
}

/// Fluctuations of one barrier edge in the x-y frame, plus the waves used by
/// the blocked-edge limiter correction (barrier frame).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BarrierFluxes {
    /// Applied to the lower side (left in the barrier frame).
    pub minus: [f64; 3],
    /// Applied to the upper side.
    pub plus: [f64; 3],
    pub waves: [[f64; 3]; 3],
    pub speeds: [f64; 3],
    pub max_speed: f64,
}

/// Each side reflects off a solid wall; nothing is transmitted.
fn wall_fluxes(q_lower: RotatedState, q_upper: RotatedState, bathymetry: f64, g: f64) -> Result<BarrierFluxes> {
    let lower = solve_edge(q_lower, Axis::X.mirror(q_lower), bathymetry, bathymetry, Axis::X, AverageKind::Roe, g)?;
    let upper = solve_edge(Axis::X.mirror(q_upper), q_upper, bathymetry, bathymetry, Axis::X, AverageKind::Roe, g)?;
    let mut waves = [lower.waves[0], [0.0; 3], upper.waves[2]];
    for k in 0..3 {
        waves[1][k] = 0.5 * (lower.waves[1][k] + upper.waves[1][k]);
    }
    Ok(BarrierFluxes {
        minus: lower.minus,
        plus: upper.plus,
        waves,
        speeds: [lower.speeds[0], 0.5 * (lower.speeds[1] + upper.speeds[1]), upper.speeds[2]],
        max_speed: lower.max_speed().max(upper.max_speed()),
    })
}

/// Barrier-edge fluctuations from the two side states (x-y frame in and out).
///
/// Blocking configurations (both surfaces below the crest) reflect each side
/// off a wall; otherwise the ghost problems are redistributed. A singular
/// redistribution falls back to wall reflection.
pub fn barrier_edge_fluctuations(
    q_lower: ConservedState,
    q_upper: ConservedState,
    frame: &Frame,
    beta: f64,
    bathymetry: f64,
    g: f64,
) -> Result<BarrierFluxes> {
    let ql = rotate(q_lower, frame);
    let qu = rotate(q_upper, frame);
    let ghost = ghost_state(ql, qu, beta, bathymetry);
    let rotated = if ghost.blocking {
        wall_fluxes(ql, qu, bathymetry, g)?
    } else {
        match redistribute(ql, qu, &ghost, bathymetry, bathymetry, g) {
            Ok(r) => BarrierFluxes {
                minus: r.minus,
                plus: r.plus,
                waves: r.waves(),
                speeds: r.speeds,
                max_speed: r.speeds.iter().fold(0.0f64, |m, s| m.max(s.abs())),
            },
            Err(Error::SingularRedistribution) => wall_fluxes(ql, qu, bathymetry, g)?,
            Err(e) => return Err(e),
        }
    };
    Ok(BarrierFluxes {
        minus: rotate_back(rotated.minus, frame),
        plus: rotate_back(rotated.plus, frame),
        ..rotated
    })
}

/// Total flux jump `f(Q_U) − f(Q_L) − Ψ_L − Ψ_U` in the barrier frame.
pub fn redistribution_target(
    q_lower: RotatedState,
    q_upper: RotatedState,
    ghost: &GhostState,
    b_lower: f64,
    b_upper: f64,
    g: f64,
) -> [f64; 3] {
    let fl = physical_flux_x(q_lower, g);
    let fu = physical_flux_x(q_upper, g);
    let hbar_l = 0.5 * (q_lower.h + ghost.state.h);
    let hbar_u = 0.5 * (q_upper.h + ghost.state.h);
    let psi_l = g * hbar_l * (b_lower - ghost.bstar);
    let psi_u = g * hbar_u * (ghost.bstar - b_upper);
    [fu[0] - fl[0], fu[1] - fl[1] - psi_l - psi_u, fu[2] - fl[2]]
}
