//! Time step engine: ghost filling, face Riemann solutions (Cartesian,
//! rotated and barrier faces), wave-limited corrections, barrier
//! reconstruction, conservative (merged) updates and the drying fix.

use serde::Deserialize;

use crate::barrier::{barrier_edge_fluctuations, rotate, rotate_back, Frame};
use crate::cutcell::{blocked_edge_correction, limited_gradient, update_merged_cell, Gradient};
use crate::error::{Error, Result};
use crate::mesh::{Boundary, FaceKind, Mesh, Upwind};
use crate::riemann::{minmod, second_order_correction, solve_edge, wave_ratio, Axis};
use crate::state::{physical_flux_x, physical_flux_y, ConservedState, Order, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    #[default]
    Wall,
    Extrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryConditions {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
    pub bottom: BoundaryKind,
    pub top: BoundaryKind,
}

impl BoundaryConditions {
    pub fn walls() -> Self {
        Self::default()
    }

    pub fn get(&self, b: Boundary) -> BoundaryKind {
        match b {
            Boundary::Left => self.left,
            Boundary::Right => self.right,
            Boundary::Bottom => self.bottom,
            Boundary::Top => self.top,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FaceSolution {
    minus: ConservedState,
    plus: ConservedState,
    /// x-y components, except on barrier faces where they stay in the
    /// barrier frame.
    waves: [[f64; 3]; 3],
    speeds: [f64; 3],
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    /// Mass added by zeroing negative depths.
    pub drywet_mass: f64,
}

/// Finite volume solver on a [`Mesh`]; the state vector covers interior and
/// ghost volumes.
#[derive(Debug, Clone)]
pub struct Solver {
    pub mesh: Mesh,
    pub params: SolverParams,
    pub bc: BoundaryConditions,
    pub bed: Vec<f64>,
    solutions: Vec<FaceSolution>,
    increments: Vec<ConservedState>,
    gradients: Vec<Gradient>,
    /// Boundary of each ghost volume.
    ghost_boundary: Vec<Option<Boundary>>,
}

impl Solver {
    /// `bed` holds the bathymetry of the interior volumes; ghosts copy their
    /// sources.
    pub fn new(mesh: Mesh, params: SolverParams, bc: BoundaryConditions, interior_bed: Vec<f64>) -> Result<Self> {
        params.validate()?;
        assert_eq!(interior_bed.len(), mesh.n_interior);
        let mut bed = interior_bed;
        bed.resize(mesh.volumes.len(), 0.0);
        for g in &mesh.ghosts {
            bed[g.volume] = bed[g.source];
        }
        let nf = mesh.faces.len();
        let nv = mesh.volumes.len();
        let mut ghost_boundary = vec![None; nv];
        for g in &mesh.ghosts {
            ghost_boundary[g.volume] = Some(g.boundary);
        }
        Ok(Self {
            mesh,
            params,
            bc,
            bed,
            solutions: vec![FaceSolution::default(); nf],
            increments: vec![ConservedState::ZERO; nv],
            gradients: vec![Gradient::ZERO; nv],
            ghost_boundary,
        })
    }

    /// State vector sized for the mesh, filled from interior values.
    pub fn state_from(&self, interior: &[ConservedState]) -> Vec<ConservedState> {
        let mut q = interior.to_vec();
        q.resize(self.mesh.volumes.len(), ConservedState::ZERO);
        self.apply_boundary_conditions(&mut q);
        q
    }

    pub fn apply_boundary_conditions(&self, q: &mut [ConservedState]) {
        for g in &self.mesh.ghosts {
            let src = q[g.source];
            q[g.volume] = match self.bc.get(g.boundary) {
                BoundaryKind::Wall => g.boundary.axis().mirror(src),
                BoundaryKind::Extrapolation => src,
            };
        }
    }

    /// Largest stable step `cfl · width / max(|u| + c, |v| + c)`.
    pub fn compute_dt(&self, q: &[ConservedState]) -> Result<f64> {
        let g = self.params.gravity;
        let mut smax: f64 = 0.0;
        let mut wet = false;
        for v in self.mesh.interior() {
            let s = q[v];
            if s.is_dry() {
                continue;
            }
            wet = true;
            let c = (g * s.h).sqrt();
            smax = smax.max(s.u().abs() + c).max(s.v().abs() + c);
        }
        if !wet {
            return Err(Error::AllDry);
        }
        Ok(self.params.cfl_target * self.mesh.dt_width / smax)
    }

    pub fn total_mass(&self, q: &[ConservedState]) -> f64 {
        self.mesh.interior().map(|v| q[v].h * self.mesh.volumes[v].area).sum()
    }

    fn compute_gradients(&mut self, q: &[ConservedState]) {
        for v in 0..self.mesh.volumes.len() {
            if let Some(st) = &self.mesh.stencils[v] {
                let nb: Vec<ConservedState> = st.members.iter().map(|&m| q[m]).collect();
                self.gradients[v] = limited_gradient(q[v], &nb, &st.offsets, &st.points);
            }
        }
    }

    fn solve_faces(&mut self, q: &[ConservedState]) -> Result<()> {
        let g = self.params.gravity;
        let kind = self.params.average_kind;
        let second = self.params.order == Order::Second;
        for (k, face) in self.mesh.faces.iter().enumerate() {
            let (qa, qb) = (q[face.a], q[face.b]);
            let (ba, bb) = (self.bed[face.a], self.bed[face.b]);
            self.solutions[k] = match face.kind {
                FaceKind::Axis(axis) => {
                    let e = solve_edge(qa, qb, ba, bb, axis, kind, g)?;
                    FaceSolution {
                        minus: ConservedState::from_array(e.minus),
                        plus: ConservedState::from_array(e.plus),
                        waves: e.waves,
                        speeds: e.speeds,
                    }
                }
                FaceKind::Rotated(frame) => {
                    let e = solve_edge(rotate(qa, &frame), rotate(qb, &frame), ba, bb, Axis::X, kind, g)?;
                    FaceSolution {
                        minus: ConservedState::from_array(rotate_back(e.minus, &frame)),
                        plus: ConservedState::from_array(rotate_back(e.plus, &frame)),
                        waves: e.waves.map(|w| rotate_back(w, &frame)),
                        speeds: e.speeds,
                    }
                }
                FaceKind::Barrier(frame) => {
                    let (ql, qu) = if second {
                        let ca = self.mesh.volumes[face.a].centroid;
                        let cb = self.mesh.volumes[face.b].centroid;
                        let m = face.midpoint;
                        (
                            self.gradients[face.a].reconstruct(qa, [m[0] - ca[0], m[1] - ca[1]]),
                            self.gradients[face.b].reconstruct(qb, [m[0] - cb[0], m[1] - cb[1]]),
                        )
                    } else {
                        (qa, qb)
                    };
                    let f = barrier_edge_fluctuations(ql, qu, &frame, self.mesh.beta, ba, g)?;
                    // jumps between cell averages and reconstructed values keep
                    // the face conservative
                    let n = frame.normal;
                    let inner_a = normal_flux(ql, n, g) - normal_flux(qa, n, g);
                    let inner_b = normal_flux(qb, n, g) - normal_flux(qu, n, g);
                    FaceSolution {
                        minus: ConservedState::from_array(f.minus) + inner_a,
                        plus: ConservedState::from_array(f.plus) + inner_b,
                        waves: f.waves,
                        speeds: f.speeds,
                    }
                }
            };
        }
        Ok(())
    }

    /// Same-family wave of the upwind face, in x-y components.
    fn upwind_wave(&self, upwind: Upwind, family: usize, normal: [f64; 2]) -> Option<[f64; 3]> {
        match upwind {
            Upwind::None => None,
            Upwind::Face { face, swap } => {
                let sol = &self.solutions[face];
                match self.mesh.faces[face].kind {
                    FaceKind::Barrier(frame) => {
                        Some(blocked_edge_correction(&sol.waves, &sol.speeds, &frame, normal).0[family])
                    }
                    _ => Some(sol.waves[if swap { 2 - family } else { family }]),
                }
            }
        }
    }

    fn correction(&self, k: usize, dt: f64) -> Result<ConservedState> {
        let face = &self.mesh.faces[k];
        let sol = &self.solutions[k];
        let normal = face.normal();
        let mut phi = [0.0; 3];
        for p in 0..3 {
            let s = sol.speeds[p];
            if s == 0.0 {
                continue;
            }
            let up = face.upwind[usize::from(s > 0.0)];
            phi[p] = match self.upwind_wave(up, p, normal) {
                Some(w) => minmod(wave_ratio(&w, &sol.waves[p])),
                None => 0.0,
            };
        }
        // at a wall the incoming waves mirror the outgoing ones
        let wall = [(face.a, -1.0), (face.b, 1.0)].into_iter().find_map(|(v, outward)| {
            let b = self.ghost_boundary[v]?;
            (self.bc.get(b) == BoundaryKind::Wall).then_some(outward)
        });
        if let Some(outward) = wall {
            for p in 0..3 {
                let (s, m) = (sol.speeds[p], sol.speeds[2 - p]);
                if s * outward < 0.0 && m * outward > 0.0 {
                    phi[p] = phi[2 - p];
                }
            }
        }
        let mut limited = [[0.0; 3]; 3];
        for p in 0..3 {
            for c in 0..3 {
                limited[p][c] = phi[p] * sol.waves[p][c];
            }
        }
        Ok(ConservedState::from_array(second_order_correction(&sol.speeds, &limited, dt / face.width)?))
    }

    /// Advances `q` by `dt`. Ghost values are refreshed first.
    pub fn step(&mut self, q: &mut [ConservedState], dt: f64) -> Result<StepOutcome> {
        self.apply_boundary_conditions(q);
        let second = self.params.order == Order::Second;
        if second && !self.mesh.barrier_faces.is_empty() {
            self.compute_gradients(q);
        }
        self.solve_faces(q)?;
        self.increments.iter_mut().for_each(|v| *v = ConservedState::ZERO);
        for k in 0..self.mesh.faces.len() {
            let face = &self.mesh.faces[k];
            if face.ghost {
                continue;
            }
            let sol = self.solutions[k];
            let corr = if second && !face.is_barrier() { self.correction(k, dt)? } else { ConservedState::ZERO };
            let len = self.mesh.faces[k].length;
            let (a, b) = (self.mesh.faces[k].a, self.mesh.faces[k].b);
            self.increments[a] += len * (sol.minus + corr);
            self.increments[b] += len * (sol.plus - corr);
        }
        for v in self.mesh.interior() {
            if self.mesh.group_of[v].is_none() {
                q[v] -= (dt / self.mesh.volumes[v].area) * self.increments[v];
            }
        }
        for members in &self.mesh.groups {
            let areas: Vec<f64> = members.iter().map(|&m| self.mesh.volumes[m].area).collect();
            let states: Vec<ConservedState> = members.iter().map(|&m| q[m]).collect();
            let incs: Vec<ConservedState> = members.iter().map(|&m| self.increments[m]).collect();
            let merged = update_merged_cell(&areas, &states, &incs, dt);
            for &m in members {
                q[m] = merged;
            }
        }
        Ok(StepOutcome { drywet_mass: self.drywet_fix(q) })
    }

    /// Zeroes negative depths (returning the mass added) and momenta of dry
    /// cells.
    pub fn drywet_fix(&self, q: &mut [ConservedState]) -> f64 {
        let mut added = 0.0;
        for v in self.mesh.interior() {
            if q[v].h < 0.0 {
                added -= q[v].h * self.mesh.volumes[v].area;
                q[v] = ConservedState::ZERO;
            } else if q[v].is_dry() {
                q[v].hu = 0.0;
                q[v].hv = 0.0;
            }
        }
        added
    }
}

/// Flux through a unit normal `n`: `n₁ f(q) + n₂ g(q)`.
pub fn normal_flux(q: ConservedState, n: [f64; 2], g: f64) -> ConservedState {
    let fx = physical_flux_x(q, g);
    let fy = physical_flux_y(q, g);
    ConservedState::new(
        n[0] * fx[0] + n[1] * fy[0],
        n[0] * fx[1] + n[1] * fy[1],
        n[0] * fx[2] + n[1] * fy[2],
    )
}

/// Frame of a face for callers that need x-y rotations.
pub fn face_frame(kind: FaceKind) -> Frame {
    match kind {
        FaceKind::Axis(Axis::X) => Frame::from_normal([1.0, 0.0]),
        FaceKind::Axis(Axis::Y) => Frame::from_normal([0.0, 1.0]),
        FaceKind::Rotated(f) | FaceKind::Barrier(f) => f,
    }
}
