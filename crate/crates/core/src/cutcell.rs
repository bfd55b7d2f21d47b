//! Cut-cell kernels: least-squares gradients, Barth-Jespersen limiting,
//! barrier wave substitution for blocked upwind edges and the merged-cell
//! update.

use crate::barrier::{rotate_back, Frame};
use crate::error::{Error, Result};
use crate::state::ConservedState;

/// Spatial gradient of `[h, hu, hv]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gradient {
    pub dx: [f64; 3],
    pub dy: [f64; 3],
}

impl Gradient {
    pub const ZERO: Self = Self { dx: [0.0; 3], dy: [0.0; 3] };

    /// Linear increment `∇Q · r`.
    pub fn delta(&self, r: [f64; 2]) -> [f64; 3] {
        [
            self.dx[0] * r[0] + self.dy[0] * r[1],
            self.dx[1] * r[0] + self.dy[1] * r[1],
            self.dx[2] * r[0] + self.dy[2] * r[1],
        ]
    }

    /// Scales each component's gradient by its own factor.
    pub fn scaled(&self, alpha: [f64; 3]) -> Self {
        let mut g = *self;
        for k in 0..3 {
            g.dx[k] *= alpha[k];
            g.dy[k] *= alpha[k];
        }
        g
    }

    /// `q + ∇Q · r`.
    pub fn reconstruct(&self, q: ConservedState, r: [f64; 2]) -> ConservedState {
        q + ConservedState::from_array(self.delta(r))
    }
}

/// Least-squares gradient through the normal equations
/// `(ΔrᵀΔr) ∇Q = Δrᵀ (Q_N − Q)`, one right-hand side per component.
pub fn lsq_gradient(offsets: &[[f64; 2]], differences: &[[f64; 3]]) -> Result<Gradient> {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    let mut rx = [0.0; 3];
    let mut ry = [0.0; 3];
    for (r, d) in offsets.iter().zip(differences) {
        a += r[0] * r[0];
        b += r[0] * r[1];
        c += r[1] * r[1];
        for k in 0..3 {
            rx[k] += r[0] * d[k];
            ry[k] += r[1] * d[k];
        }
    }
    let det = a * c - b * b;
    if offsets.len() < 2 || !(det > 1e-12 * (a + c) * (a + c)) {
        return Err(Error::RankDeficient);
    }
    let mut g = Gradient::ZERO;
    for k in 0..3 {
        g.dx[k] = (c * rx[k] - b * ry[k]) / det;
        g.dy[k] = (a * ry[k] - b * rx[k]) / det;
    }
    Ok(g)
}

/// Barth-Jespersen factor for one component: the largest `α ∈ [0, 1]`
/// keeping every reconstructed value `q + α (r_k − q)` inside `[min, max]`.
pub fn barth_jespersen(q: f64, min: f64, max: f64, reconstructed: &[f64]) -> f64 {
    let mut alpha: f64 = 1.0;
    for &r in reconstructed {
        let d = r - q;
        if d > 0.0 {
            alpha = alpha.min((max - q) / d);
        } else if d < 0.0 {
            alpha = alpha.min((min - q) / d);
        }
    }
    alpha.clamp(0.0, 1.0)
}

/// Limited gradient of a cell from its stencil: unlimited LSQ gradient
/// (zero if rank deficient) scaled per component by Barth-Jespersen over
/// the reconstruction points.
pub fn limited_gradient(
    q: ConservedState,
    neighbors: &[ConservedState],
    offsets: &[[f64; 2]],
    points: &[[f64; 2]],
) -> Gradient {
    let qa = q.to_array();
    let diffs: Vec<[f64; 3]> = neighbors.iter().map(|n| (*n - q).to_array()).collect();
    let grad = lsq_gradient(offsets, &diffs).unwrap_or(Gradient::ZERO);
    let mut alpha = [1.0; 3];
    for k in 0..3 {
        let (mut lo, mut hi) = (qa[k], qa[k]);
        for n in neighbors {
            let v = n.to_array()[k];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let recon: Vec<f64> = points.iter().map(|&r| qa[k] + grad.delta(r)[k]).collect();
        alpha[k] = barth_jespersen(qa[k], lo, hi, &recon);
    }
    grad.scaled(alpha)
}

/// Barrier waves as seen by a Cartesian (or mapped) face with unit normal
/// `face_normal`: rotated to x-y components, with the outer families
/// exchanged when the barrier normal opposes the face normal. Speeds are
/// projected onto the face normal.
pub fn blocked_edge_correction(
    barrier_waves: &[[f64; 3]; 3],
    barrier_speeds: &[f64; 3],
    frame: &Frame,
    face_normal: [f64; 2],
) -> ([[f64; 3]; 3], [f64; 3]) {
    let c = frame.normal[0] * face_normal[0] + frame.normal[1] * face_normal[1];
    let order = if c < 0.0 { [2, 1, 0] } else { [0, 1, 2] };
    let mut waves = [[0.0; 3]; 3];
    let mut speeds = [0.0; 3];
    for (p, &src) in order.iter().enumerate() {
        waves[p] = rotate_back(barrier_waves[src], frame);
        speeds[p] = barrier_speeds[src] * c;
    }
    (waves, speeds)
}

/// Conservative update of a merged region: `Σ A_k Q_k` minus `dt` times the
/// summed length-weighted fluctuations, divided by the total area.
pub fn update_merged_cell(
    areas: &[f64],
    states: &[ConservedState],
    increments: &[ConservedState],
    dt: f64,
) -> ConservedState {
    let mut total = ConservedState::ZERO;
    let mut area = 0.0;
    for ((a, q), inc) in areas.iter().zip(states).zip(increments) {
        total += *a * *q;
        total -= dt * *inc;
        area += a;
    }
    (1.0 / area) * total
}
