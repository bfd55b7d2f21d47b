//! Edge kernels of the f-wave propagation method: special averages,
//! eigenbasis, flux-difference splitting, wave limiting and the second-order
//! correction flux.
//!
//! Fluctuations are expressed as f-waves `Z_p = γ_p r_p` where `γ` solves
//! `R γ = Δf − Ψ`. The left-going fluctuation is the sum of the f-waves with
//! negative speed and the right-going one the sum of those with positive
//! speed; a wave with exactly zero speed is split evenly between the two so
//! that `minus + plus = Δf − Ψ` holds to rounding.

use crate::error::{Error, Result};
use crate::state::{physical_flux_x, physical_flux_y, AverageKind, ConservedState};

/// Coordinate direction of a Cartesian edge normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// Index of the momentum component normal to an edge with this axis.
    pub fn normal_index(self) -> usize {
        match self {
            Axis::X => 1,
            Axis::Y => 2,
        }
    }

    pub fn tangential_index(self) -> usize {
        match self {
            Axis::X => 2,
            Axis::Y => 1,
        }
    }

    pub fn flux(self, q: ConservedState, g: f64) -> [f64; 3] {
        match self {
            Axis::X => physical_flux_x(q, g),
            Axis::Y => physical_flux_y(q, g),
        }
    }

    fn normal_velocity(self, q: &ConservedState) -> f64 {
        match self {
            Axis::X => q.u(),
            Axis::Y => q.v(),
        }
    }

    /// Reflects `q` across an edge with this normal (negates normal momentum).
    pub fn mirror(self, q: ConservedState) -> ConservedState {
        match self {
            Axis::X => ConservedState::new(q.h, -q.hu, q.hv),
            Axis::Y => ConservedState::new(q.h, q.hu, -q.hv),
        }
    }
}

/// Averaged state `(H*, U*, V*)` used to build an edge eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub hstar: f64,
    pub ustar: f64,
    pub vstar: f64,
}

/// Roe-type average. Both sides must be wet; `kind` only matters once the
/// eigenbasis is built (Einfeldt widens the extreme speeds).
pub fn special_average(
    q_left: ConservedState,
    q_right: ConservedState,
    _kind: AverageKind,
    _g: f64,
) -> Result<Averages> {
    if q_left.is_dry() || q_right.is_dry() {
        return Err(Error::DryInput);
    }
    Ok(sqrt_weighted_average(q_left, q_right))
}

/// Roe average that tolerates one dry side (its weight is zero).
fn sqrt_weighted_average(ql: ConservedState, qr: ConservedState) -> Averages {
    let wl = if ql.is_dry() { 0.0 } else { ql.h.sqrt() };
    let wr = if qr.is_dry() { 0.0 } else { qr.h.sqrt() };
    let denom = wl + wr;
    let (ustar, vstar) = if denom > 0.0 {
        ((wl * ql.u() + wr * qr.u()) / denom, (wl * ql.v() + wr * qr.v()) / denom)
    } else {
        (0.0, 0.0)
    };
    Averages { hstar: 0.5 * (ql.h + qr.h), ustar, vstar }
}

/// Eigen-decomposition of the averaged flux Jacobian for one direction.
///
/// `vectors[p]` is the p-th column of the decomposition matrix: for x,
/// `[1, U*∓c, V*]` and `[0, 0, 1]`; for y, `[1, U*, V*∓c]` and `[0, 1, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenBasis {
    pub direction: Axis,
    pub hstar: f64,
    pub ustar: f64,
    pub vstar: f64,
    pub speeds: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

pub fn eigen_basis(avg: Averages, direction: Axis, g: f64) -> EigenBasis {
    let c = (g * avg.hstar).sqrt();
    let (un, ut) = match direction {
        Axis::X => (avg.ustar, avg.vstar),
        Axis::Y => (avg.vstar, avg.ustar),
    };
    let n = direction.normal_index();
    let t = direction.tangential_index();
    let mut r1 = [1.0, 0.0, 0.0];
    r1[n] = un - c;
    r1[t] = ut;
    let mut r2 = [0.0; 3];
    r2[t] = 1.0;
    let mut r3 = [1.0, 0.0, 0.0];
    r3[n] = un + c;
    r3[t] = ut;
    EigenBasis {
        direction,
        hstar: avg.hstar,
        ustar: avg.ustar,
        vstar: avg.vstar,
        speeds: [un - c, un, un + c],
        vectors: [r1, r2, r3],
    }
}

impl EigenBasis {
    /// Widens the acoustic speeds with the single-state characteristic
    /// speeds (HLLE bounds). Eigenvectors stay Roe-based.
    pub fn widen_einfeldt(mut self, ql: ConservedState, qr: ConservedState, g: f64) -> Self {
        let d = self.direction;
        let cl = (g * ql.h.max(0.0)).sqrt();
        let cr = (g * qr.h.max(0.0)).sqrt();
        let left = if ql.is_dry() { d.normal_velocity(&qr) - 2.0 * cr } else { d.normal_velocity(&ql) - cl };
        let right = if qr.is_dry() { d.normal_velocity(&ql) + 2.0 * cl } else { d.normal_velocity(&qr) + cr };
        self.speeds[0] = self.speeds[0].min(left);
        self.speeds[2] = self.speeds[2].max(right);
        self
    }

    /// Applies the basis matrix to a coefficient vector.
    pub fn apply(&self, coeffs: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (p, v) in self.vectors.iter().enumerate() {
            for k in 0..3 {
                out[k] += coeffs[p] * v[k];
            }
        }
        out
    }

    /// Solves `R γ = rhs` exploiting the block structure of the basis.
    pub fn solve(&self, rhs: &[f64; 3]) -> Result<[f64; 3]> {
        let n = self.direction.normal_index();
        let t = self.direction.tangential_index();
        let s1 = self.vectors[0][n];
        let s3 = self.vectors[2][n];
        let ut = self.vectors[0][t];
        let den = s3 - s1;
        if !(den.abs() > 1e-14) || !den.is_finite() {
            return Err(Error::SingularBasis);
        }
        let g1 = (s3 * rhs[0] - rhs[n]) / den;
        let g3 = (rhs[n] - s1 * rhs[0]) / den;
        let g2 = rhs[t] - ut * rhs[0];
        Ok([g1, g2, g3])
    }
}

/// Left/right-going fluctuations of one edge and the f-waves they came from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeFluctuations {
    pub minus: [f64; 3],
    pub plus: [f64; 3],
    pub waves: [[f64; 3]; 3],
    pub speeds: [f64; 3],
    pub coefficients: [f64; 3],
}

impl EdgeFluctuations {
    /// Splits f-waves by the sign of their speeds.
    pub fn from_waves(waves: [[f64; 3]; 3], speeds: [f64; 3], coefficients: [f64; 3]) -> Self {
        let mut minus = [0.0; 3];
        let mut plus = [0.0; 3];
        for p in 0..3 {
            let s = speeds[p];
            for k in 0..3 {
                let z = waves[p][k];
                if s < 0.0 {
                    minus[k] += z;
                } else if s > 0.0 {
                    plus[k] += z;
                } else {
                    minus[k] += 0.5 * z;
                    plus[k] += 0.5 * z;
                }
            }
        }
        Self { minus, plus, waves, speeds, coefficients }
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

/// Source term of the f-wave splitting: only the normal momentum component
/// is nonzero, `g·H̄·(b_left − b_right)` with `H̄ = ½(H_l + H_r)`.
pub fn bathymetry_source(
    q_left: ConservedState,
    q_right: ConservedState,
    b_left: f64,
    b_right: f64,
    direction: Axis,
    g: f64,
) -> [f64; 3] {
    let mut psi = [0.0; 3];
    psi[direction.normal_index()] = g * 0.5 * (q_left.h + q_right.h) * (b_left - b_right);
    psi
}

/// Decomposes `Δf − Ψ` across an edge into f-waves of `basis`.
pub fn fwave_decompose(
    q_left: ConservedState,
    q_right: ConservedState,
    b_left: f64,
    b_right: f64,
    basis: &EigenBasis,
    g: f64,
) -> Result<EdgeFluctuations> {
    let d = basis.direction;
    let fl = d.flux(q_left, g);
    let fr = d.flux(q_right, g);
    let psi = bathymetry_source(q_left, q_right, b_left, b_right, d, g);
    let rhs = [fr[0] - fl[0] - psi[0], fr[1] - fl[1] - psi[1], fr[2] - fl[2] - psi[2]];
    let gamma = basis.solve(&rhs)?;
    let mut waves = [[0.0; 3]; 3];
    for p in 0..3 {
        for k in 0..3 {
            waves[p][k] = gamma[p] * basis.vectors[p][k];
        }
    }
    Ok(EdgeFluctuations::from_waves(waves, basis.speeds, gamma))
}

/// Full edge solve including dry-state handling.
///
/// * both sides dry: no waves;
/// * one side dry with its bed above the wet free surface: the dry side acts
///   as a wall (mirror of the wet state on the wet bed);
/// * otherwise a Roe basis is built with zero weight on a dry side.
pub fn solve_edge(
    q_left: ConservedState,
    q_right: ConservedState,
    b_left: f64,
    b_right: f64,
    direction: Axis,
    kind: AverageKind,
    g: f64,
) -> Result<EdgeFluctuations> {
    let (mut ql, mut qr, mut bl, mut br) = (q_left, q_right, b_left, b_right);
    match (ql.is_dry(), qr.is_dry()) {
        (true, true) => return Ok(EdgeFluctuations::default()),
        (true, false) if bl > qr.h + br => {
            ql = direction.mirror(qr);
            bl = br;
        }
        (false, true) if br > ql.h + bl => {
            qr = direction.mirror(ql);
            br = bl;
        }
        _ => {}
    }
    let avg = sqrt_weighted_average(ql, qr);
    let mut basis = eigen_basis(avg, direction, g);
    if kind == AverageKind::Einfeldt {
        basis = basis.widen_einfeldt(ql, qr, g);
    }
    fwave_decompose(ql, qr, bl, br, &basis, g)
}

/// Minmod wave limiter `max(0, min(1, θ))`.
pub fn minmod(theta: f64) -> f64 {
    theta.min(1.0).max(0.0)
}

/// Ratio `θ = (W_upwind · W) / ‖W‖²`; a null local wave gives `θ = 1`.
pub fn wave_ratio(upwind: &[f64; 3], local: &[f64; 3]) -> f64 {
    let norm2 = local[0] * local[0] + local[1] * local[1] + local[2] * local[2];
    if norm2 < 1e-28 {
        return 1.0;
    }
    (upwind[0] * local[0] + upwind[1] * local[1] + upwind[2] * local[2]) / norm2
}

/// Limited f-waves `φ(θ_p) Z_p`. `upwind[p]` is the same-family wave from the
/// edge upwind of wave `p` (`None` if no such edge exists, which limits fully).
pub fn limit_waves(edge: &EdgeFluctuations, upwind: &[Option<[f64; 3]>; 3], limiter: fn(f64) -> f64) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for p in 0..3 {
        let phi = match &upwind[p] {
            Some(w) => limiter(wave_ratio(w, &edge.waves[p])),
            None => 0.0,
        };
        for k in 0..3 {
            out[p][k] = phi * edge.waves[p][k];
        }
    }
    out
}

/// Second-order correction flux `½ Σ sgn(s_p)(1 − Δt/Δx |s_p|) Z̃_p`.
///
/// With f-waves `Z = s γ r` this is the usual `½ Σ |s|(1 − Δt/Δx |s|) γ̃ r`.
pub fn second_order_correction(speeds: &[f64; 3], limited_waves: &[[f64; 3]; 3], dt_over_dx: f64) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for p in 0..3 {
        let s = speeds[p];
        let courant = s.abs() * dt_over_dx;
        if courant > 1.0 + 1e-12 {
            return Err(Error::CflViolation(courant));
        }
        let factor = 0.5 * s.signum() * (1.0 - courant);
        if s == 0.0 {
            continue;
        }
        for k in 0..3 {
            out[k] += factor * limited_waves[p][k];
        }
    }
    Ok(out)
}
