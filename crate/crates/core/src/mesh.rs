//! Unstructured finite volume mesh shared by the cut-cell and mapped
//! solvers: volumes (whole cells, cut sub-cells, ghosts), faces with their
//! geometry, upwind links for wave limiting, merge groups and LSQ stencils.

use crate::barrier::Frame;
use crate::error::{Error, Result};
use crate::geometry::{
    expand_stencil, BarrierGeometry, CellKind, CutCellTable, EdgeDir, Grid, Point, Side,
};
use crate::riemann::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Left,
    Right,
    Bottom,
    Top,
}

impl Boundary {
    pub const ALL: [Boundary; 4] = [Boundary::Left, Boundary::Right, Boundary::Bottom, Boundary::Top];

    pub fn axis(self) -> Axis {
        match self {
            Boundary::Left | Boundary::Right => Axis::X,
            Boundary::Bottom | Boundary::Top => Axis::Y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub area: f64,
    pub centroid: Point,
    /// Grid cell the volume belongs to (logical cell for mapped grids).
    pub cell: (usize, usize),
    pub side: Side,
    pub ghost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceKind {
    /// Grid-aligned face; normal along the positive axis.
    Axis(Axis),
    /// Straight face with an arbitrary unit normal.
    Rotated(Frame),
    /// Barrier face; normal points from volume `a` (lower) to `b` (upper).
    Barrier(Frame),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upwind {
    /// Fully limit (no upwind information).
    None,
    /// Waves of another face; `swap` exchanges the outer wave families when
    /// that face is oriented against this one.
    Face { face: usize, swap: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Volume on the negative side of the normal.
    pub a: usize,
    /// Volume on the positive side of the normal.
    pub b: usize,
    pub kind: FaceKind,
    pub length: f64,
    /// Normal mesh width used in the Courant factor of the correction.
    pub width: f64,
    pub midpoint: Point,
    /// Upwind faces for waves moving toward `a` (index 0) and toward `b`
    /// (index 1).
    pub upwind: [Upwind; 2],
    /// Both volumes are ghosts: solved for limiting only.
    pub ghost: bool,
}

impl Face {
    pub fn normal(&self) -> [f64; 2] {
        match self.kind {
            FaceKind::Axis(Axis::X) => [1.0, 0.0],
            FaceKind::Axis(Axis::Y) => [0.0, 1.0],
            FaceKind::Rotated(f) | FaceKind::Barrier(f) => f.normal,
        }
    }

    pub fn is_barrier(&self) -> bool {
        matches!(self.kind, FaceKind::Barrier(_))
    }
}

/// Ghost fill rule: copy `source`, reflecting normal momentum at walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ghost {
    pub volume: usize,
    pub source: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub members: Vec<usize>,
    /// Centroid offsets of the members.
    pub offsets: Vec<[f64; 2]>,
    /// Offsets of the reconstruction points (incident face midpoints).
    pub points: Vec<[f64; 2]>,
}

/// Piecewise affine vertical mapping `y = μ(x, η)` that sends the
/// computational line `η = y*` onto the barrier `y = L(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mapping {
    pub barrier: BarrierGeometry,
    pub ystar: f64,
}

impl Mapping {
    pub fn forward(&self, x: f64, eta: f64) -> f64 {
        let l = self.barrier.height_at(x);
        if eta <= self.ystar {
            eta * l / self.ystar
        } else {
            l + (eta - self.ystar) * (1.0 - l) / (1.0 - self.ystar)
        }
    }

    pub fn inverse(&self, x: f64, y: f64) -> f64 {
        let l = self.barrier.height_at(x);
        if y <= l {
            y * self.ystar / l
        } else {
            self.ystar + (y - l) * (1.0 - self.ystar) / (1.0 - l)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Cartesian { grid: Grid, barrier: Option<BarrierGeometry> },
    Mapped { n: usize, mapping: Mapping },
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub volumes: Vec<Volume>,
    pub faces: Vec<Face>,
    /// Volumes `0..n_interior` are physical; the rest are ghosts.
    pub n_interior: usize,
    pub ghosts: Vec<Ghost>,
    /// Faces incident to each volume, tagged with the cell edge they lie on
    /// as seen from that volume (`None` for slanted barrier pieces).
    pub incidence: Vec<Vec<(usize, Option<EdgeDir>)>>,
    pub groups: Vec<Vec<usize>>,
    pub group_of: Vec<Option<usize>>,
    pub stencils: Vec<Option<Stencil>>,
    pub barrier_faces: Vec<usize>,
    /// Volumes of each grid cell, by side.
    pub cell_volumes: Vec<[Option<usize>; 2]>,
    pub beta: f64,
    /// Length scale of the CFL condition.
    pub dt_width: f64,
    pub layout: Layout,
}

struct Builder {
    volumes: Vec<Volume>,
    faces: Vec<Face>,
    ghosts: Vec<Ghost>,
    tags: Vec<(Option<EdgeDir>, Option<EdgeDir>)>,
}

impl Builder {
    fn volume(&mut self, v: Volume) -> usize {
        self.volumes.push(v);
        self.volumes.len() - 1
    }

    /// Adds a face; `tag_a`/`tag_b` are the edges it occupies as seen from
    /// `a` and `b`.
    #[allow(clippy::too_many_arguments)]
    fn face(
        &mut self,
        a: usize,
        b: usize,
        kind: FaceKind,
        length: f64,
        width: f64,
        midpoint: Point,
        tags: (Option<EdgeDir>, Option<EdgeDir>),
    ) -> usize {
        let ghost = self.volumes[a].ghost && self.volumes[b].ghost;
        self.faces.push(Face { a, b, kind, length, width, midpoint, upwind: [Upwind::None; 2], ghost });
        self.tags.push(tags);
        self.faces.len() - 1
    }

    fn ghost_pair(&mut self, first: usize, second: usize, boundary: Boundary, centroid: Point) -> (usize, usize) {
        let template = Volume { ghost: true, centroid, ..self.volumes[first].clone() };
        let g1 = self.volume(template.clone());
        let g2 = self.volume(template);
        self.ghosts.push(Ghost { volume: g1, source: first, boundary });
        self.ghosts.push(Ghost { volume: g2, source: second, boundary });
        (g1, g2)
    }

    /// Connects an interior volume `v` to two ghost layers through a boundary
    /// face of the given length; `inner` is the second interior layer.
    #[allow(clippy::too_many_arguments)]
    fn boundary(
        &mut self,
        v: usize,
        inner: usize,
        boundary: Boundary,
        kind: FaceKind,
        length: f64,
        width: f64,
        midpoint: Point,
    ) {
        let (g1, g2) = self.ghost_pair(v, inner, boundary, midpoint);
        let (dir, opp) = match boundary {
            Boundary::Left => (EdgeDir::Left, EdgeDir::Right),
            Boundary::Right => (EdgeDir::Right, EdgeDir::Left),
            Boundary::Bottom => (EdgeDir::Bottom, EdgeDir::Top),
            Boundary::Top => (EdgeDir::Top, EdgeDir::Bottom),
        };
        match boundary {
            Boundary::Left | Boundary::Bottom => {
                self.face(g1, v, kind, length, width, midpoint, (Some(opp), Some(dir)));
                self.face(g2, g1, kind, length, width, midpoint, (Some(opp), Some(dir)));
            }
            Boundary::Right | Boundary::Top => {
                self.face(v, g1, kind, length, width, midpoint, (Some(dir), Some(opp)));
                self.face(g1, g2, kind, length, width, midpoint, (Some(dir), Some(opp)));
            }
        }
    }
}

fn upwind_for(faces: &[Face], incidence: &[Vec<(usize, Option<EdgeDir>)>], tags: &[(Option<EdgeDir>, Option<EdgeDir>)], volumes: &[Volume], f: usize, toward_b: bool) -> Upwind {
    let face = &faces[f];
    // waves moving toward b come from the far side of a, and vice versa
    let (vol, near) = if toward_b { (face.a, tags[f].0) } else { (face.b, tags[f].1) };
    let Some(near) = near else { return Upwind::None };
    let far = near.opposite();
    let n = face.normal();
    let pick = |cands: Vec<usize>| -> Option<usize> {
        cands.into_iter().max_by(|&x, &y| faces[x].length.total_cmp(&faces[y].length))
    };
    let on_far: Vec<usize> = incidence[vol].iter().filter(|(g, t)| *g != f && *t == Some(far)).map(|(g, _)| *g).collect();
    let chosen = pick(on_far).or_else(|| {
        if volumes[vol].ghost {
            return None;
        }
        pick(incidence[vol].iter().filter(|(g, _)| faces[*g].is_barrier() && *g != f).map(|(g, _)| *g).collect())
    });
    match chosen {
        Some(g) => {
            let m = faces[g].normal();
            Upwind::Face { face: g, swap: n[0] * m[0] + n[1] * m[1] < 0.0 }
        }
        None => Upwind::None,
    }
}

impl Mesh {
    fn finish(
        b: Builder,
        nx: usize,
        ny: usize,
        n_interior: usize,
        cell_volumes: Vec<[Option<usize>; 2]>,
        groups: Vec<Vec<usize>>,
        beta: f64,
        dt_width: f64,
        layout: Layout,
    ) -> Result<Self> {
        let Builder { volumes, mut faces, ghosts, tags } = b;
        let mut incidence = vec![Vec::new(); volumes.len()];
        for (k, f) in faces.iter().enumerate() {
            incidence[f.a].push((k, tags[k].0));
            incidence[f.b].push((k, tags[k].1));
        }
        let mut upwinds = Vec::with_capacity(faces.len());
        for k in 0..faces.len() {
            if faces[k].is_barrier() || faces[k].ghost {
                upwinds.push([Upwind::None; 2]);
            } else {
                upwinds.push([
                    upwind_for(&faces, &incidence, &tags, &volumes, k, false),
                    upwind_for(&faces, &incidence, &tags, &volumes, k, true),
                ]);
            }
        }
        for (f, u) in faces.iter_mut().zip(upwinds) {
            f.upwind = u;
        }
        let barrier_faces: Vec<usize> = (0..faces.len()).filter(|&k| faces[k].is_barrier()).collect();
        let mut group_of = vec![None; volumes.len()];
        for (g, members) in groups.iter().enumerate() {
            for &m in members {
                group_of[m] = Some(g);
            }
        }
        let mut mesh = Mesh {
            nx,
            ny,
            volumes,
            faces,
            n_interior,
            ghosts,
            incidence,
            groups,
            group_of,
            stencils: Vec::new(),
            barrier_faces,
            cell_volumes,
            beta,
            dt_width,
            layout,
        };
        mesh.build_stencils()?;
        Ok(mesh)
    }

    /// Same-side interior neighbors across non-barrier faces.
    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(f, _) in &self.incidence[v] {
            let face = &self.faces[f];
            if face.is_barrier() {
                continue;
            }
            let other = if face.a == v { face.b } else { face.a };
            if !self.volumes[other].ghost && !out.contains(&other) {
                out.push(other);
            }
        }
        out
    }

    fn build_stencils(&mut self) -> Result<()> {
        let mut stencils = vec![None; self.volumes.len()];
        let scale = self.dt_width;
        for &f in &self.barrier_faces {
            for v in [self.faces[f].a, self.faces[f].b] {
                if stencils[v].is_some() {
                    continue;
                }
                let (members, offsets) =
                    expand_stencil(v, |k| self.neighbors(k), |k| self.volumes[k].centroid, scale);
                if members.len() < 2 {
                    let (i, j) = self.volumes[v].cell;
                    return Err(Error::StencilTooSmall { i, j, size: members.len() });
                }
                let c = self.volumes[v].centroid;
                let points = self.incidence[v]
                    .iter()
                    .map(|&(g, _)| {
                        let m = self.faces[g].midpoint;
                        [m[0] - c[0], m[1] - c[1]]
                    })
                    .collect();
                stencils[v] = Some(Stencil { members, offsets, points });
            }
        }
        self.stencils = stencils;
        Ok(())
    }

    /// Cartesian mesh with cut cells from a precomputed table.
    pub fn cartesian(table: &CutCellTable) -> Result<Self> {
        let grid = table.grid;
        let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx, grid.dy);
        let mut b = Builder { volumes: Vec::new(), faces: Vec::new(), ghosts: Vec::new(), tags: Vec::new() };
        let mut cell_volumes = vec![[None, None]; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let cv = &mut cell_volumes[grid.linear(i, j)];
                match table.kind(i, j) {
                    CellKind::Whole(side) => {
                        let v = b.volume(Volume {
                            area: grid.cell_area(),
                            centroid: grid.cell_center(i, j),
                            cell: (i, j),
                            side,
                            ghost: false,
                        });
                        cv[side.index()] = Some(v);
                    }
                    CellKind::Cut(k) => {
                        for side in Side::BOTH {
                            let sc = table.cells[k].side(side);
                            let v = b.volume(Volume { area: sc.area, centroid: sc.centroid, cell: (i, j), side, ghost: false });
                            cv[side.index()] = Some(v);
                        }
                    }
                }
            }
        }
        let n_interior = b.volumes.len();
        let vol = |i: usize, j: usize, side: Side| -> usize {
            let cv = cell_volumes[grid.linear(i, j)];
            cv[side.index()].or(cv[1 - side.index()]).expect("cell has a volume")
        };
        let flat = BarrierGeometry { vertices: vec![[0.0, 2.0], [1.0, 2.0]], beta: 0.0 };
        let barrier = if table.has_barrier() { &table.barrier } else { &flat };

        let link = |b: &mut Builder, a: usize, c: usize, axis: Axis, len: f64, width: f64, mid: Point, tags: (Option<EdgeDir>, Option<EdgeDir>)| {
            let (sa, sc) = (b.volumes[a].side, b.volumes[c].side);
            if sa == sc {
                b.face(a, c, FaceKind::Axis(axis), len, width, mid, tags);
            } else {
                let e = match axis {
                    Axis::X => [1.0, 0.0],
                    Axis::Y => [0.0, 1.0],
                };
                if sa == Side::Lower {
                    b.face(a, c, FaceKind::Barrier(Frame::from_normal(e)), len, width, mid, tags);
                } else {
                    b.face(c, a, FaceKind::Barrier(Frame::from_normal([-e[0], -e[1]])), len, width, mid, (tags.1, tags.0));
                }
            }
        };
        // vertical interior edges
        for j in 0..ny {
            for i in 1..nx {
                let (x, y0, y1) = (i as f64 * dx, j as f64 * dy, (j + 1) as f64 * dy);
                for (side, len, mid) in barrier.split_vertical(x, y0, y1) {
                    let (a, c) = (vol(i - 1, j, side), vol(i, j, side));
                    link(&mut b, a, c, Axis::X, len, dx, mid, (Some(EdgeDir::Right), Some(EdgeDir::Left)));
                }
            }
        }
        // horizontal interior edges
        for j in 1..ny {
            for i in 0..nx {
                let (y, x0, x1) = (j as f64 * dy, i as f64 * dx, (i + 1) as f64 * dx);
                for (side, len, mid) in barrier.split_horizontal(y, x0, x1, dy) {
                    let (a, c) = (vol(i, j - 1, side), vol(i, j, side));
                    link(&mut b, a, c, Axis::Y, len, dy, mid, (Some(EdgeDir::Top), Some(EdgeDir::Bottom)));
                }
            }
        }
        // barrier pieces inside cut cells
        for c in &table.cells {
            let (lo, up) = (vol(c.i, c.j, Side::Lower), vol(c.i, c.j, Side::Upper));
            for s in &c.segments {
                b.face(lo, up, FaceKind::Barrier(Frame::from_normal(s.normal)), s.length, dx, s.midpoint, (None, None));
            }
        }
        // boundaries: two ghost layers per boundary edge portion
        let same_or = |i: usize, j: usize, side: Side, fallback: usize| -> usize {
            let v = vol(i, j, side);
            if b_side(&cell_volumes, &grid, i, j, side) {
                v
            } else {
                fallback
            }
        };
        for j in 0..ny {
            let (y0, y1) = (j as f64 * dy, (j + 1) as f64 * dy);
            for (side, len, mid) in barrier.split_vertical(0.0, y0, y1) {
                let v = vol(0, j, side);
                let inner = if nx > 1 { same_or(1, j, side, v) } else { v };
                b.boundary(v, inner, Boundary::Left, FaceKind::Axis(Axis::X), len, dx, mid);
            }
            for (side, len, mid) in barrier.split_vertical(1.0, y0, y1) {
                let v = vol(nx - 1, j, side);
                let inner = if nx > 1 { same_or(nx - 2, j, side, v) } else { v };
                b.boundary(v, inner, Boundary::Right, FaceKind::Axis(Axis::X), len, dx, mid);
            }
        }
        for i in 0..nx {
            let (x0, x1) = (i as f64 * dx, (i + 1) as f64 * dx);
            for (side, len, mid) in barrier.split_horizontal(0.0, x0, x1, dy) {
                let v = vol(i, 0, side);
                let inner = if ny > 1 { same_or(i, 1, side, v) } else { v };
                b.boundary(v, inner, Boundary::Bottom, FaceKind::Axis(Axis::Y), len, dy, mid);
            }
            for (side, len, mid) in barrier.split_horizontal(1.0, x0, x1, dy) {
                let v = vol(i, ny - 1, side);
                let inner = if ny > 1 { same_or(i, ny - 2, side, v) } else { v };
                b.boundary(v, inner, Boundary::Top, FaceKind::Axis(Axis::Y), len, dy, mid);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for c in &table.cells {
            for side in Side::BOTH {
                if let Some((ti, tj)) = c.side(side).merge_target {
                    let small = vol(c.i, c.j, side);
                    let target = vol(ti, tj, side);
                    match groups.iter_mut().find(|g| g[0] == target) {
                        Some(g) => g.push(small),
                        None => groups.push(vec![target, small]),
                    }
                }
            }
        }
        let beta = if table.has_barrier() { table.barrier.beta } else { 0.0 };
        let layout = Layout::Cartesian {
            grid,
            barrier: table.has_barrier().then(|| table.barrier.clone()),
        };
        Mesh::finish(b, nx, ny, n_interior, cell_volumes, groups, beta, dx.min(dy), layout)
    }

    /// Mapped (body-fitted) mesh on an `n × n` computational grid whose row
    /// of horizontal edges at `η = y*` lies on the barrier.
    pub(crate) fn mapped(n: usize, mapping: Mapping, barrier_row: Option<usize>, beta: f64) -> Result<Self> {
        let h = 1.0 / n as f64;
        let node = |i: usize, j: usize| -> Point {
            let x = i as f64 * h;
            [x, mapping.forward(x, j as f64 * h)]
        };
        let mut b = Builder { volumes: Vec::new(), faces: Vec::new(), ghosts: Vec::new(), tags: Vec::new() };
        let mut cell_volumes = vec![[None, None]; n * n];
        let mut dt_width = f64::INFINITY;
        for j in 0..n {
            for i in 0..n {
                let poly = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
                let area = crate::geometry::shoelace_area(&poly);
                if !(area > 0.0) {
                    return Err(Error::UnsupportedMapping(format!("non-positive area in cell ({i}, {j})")));
                }
                let mut longest: f64 = 0.0;
                for k in 0..4 {
                    let (p, q) = (poly[k], poly[(k + 1) % 4]);
                    longest = longest.max(((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt());
                }
                dt_width = dt_width.min(area / longest);
                let side = match barrier_row {
                    Some(r) if j >= r => Side::Upper,
                    _ => Side::Lower,
                };
                let v = b.volume(Volume {
                    area,
                    centroid: crate::geometry::polygon_centroid(&poly),
                    cell: (i, j),
                    side,
                    ghost: false,
                });
                cell_volumes[j * n + i][side.index()] = Some(v);
            }
        }
        let n_interior = b.volumes.len();
        let vid = |i: usize, j: usize| j * n + i;
        let area = |b: &Builder, v: usize| b.volumes[v].area;
        // vertical edges are x = const, hence axis aligned
        let vertical = |i: usize, j: usize| -> (f64, Point) {
            let (p, q) = (node(i, j), node(i, j + 1));
            (q[1] - p[1], [p[0], 0.5 * (p[1] + q[1])])
        };
        let horizontal = |i: usize, j: usize| -> (f64, Point, FaceKind) {
            let (p, q) = (node(i, j), node(i + 1, j));
            let d = [q[0] - p[0], q[1] - p[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let kind = if d[1] == 0.0 {
                FaceKind::Axis(Axis::Y)
            } else {
                FaceKind::Rotated(Frame::from_normal([-d[1] / len, d[0] / len]))
            };
            (len, [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])], kind)
        };
        for j in 0..n {
            for i in 1..n {
                let (len, mid) = vertical(i, j);
                let (a, c) = (vid(i - 1, j), vid(i, j));
                let width = area(&b, a).min(area(&b, c)) / len;
                b.face(a, c, FaceKind::Axis(Axis::X), len, width, mid, (Some(EdgeDir::Right), Some(EdgeDir::Left)));
            }
        }
        for j in 1..n {
            for i in 0..n {
                let (len, mid, kind) = horizontal(i, j);
                let (a, c) = (vid(i, j - 1), vid(i, j));
                let width = area(&b, a).min(area(&b, c)) / len;
                let kind = match (barrier_row, kind) {
                    (Some(r), FaceKind::Axis(_)) if r == j => FaceKind::Barrier(Frame::from_normal([0.0, 1.0])),
                    (Some(r), FaceKind::Rotated(f)) if r == j => FaceKind::Barrier(f),
                    _ => kind,
                };
                b.face(a, c, kind, len, width, mid, (Some(EdgeDir::Top), Some(EdgeDir::Bottom)));
            }
        }
        for j in 0..n {
            for (i, inner, boundary) in [(0, 1.min(n - 1), Boundary::Left), (n - 1, n.saturating_sub(2), Boundary::Right)] {
                let (len, mid) = vertical(if boundary == Boundary::Left { 0 } else { n }, j);
                let v = vid(i, j);
                let width = area(&b, v) / len;
                b.boundary(v, vid(inner, j), boundary, FaceKind::Axis(Axis::X), len, width, mid);
            }
        }
        for i in 0..n {
            for (j, inner, boundary) in [(0, 1.min(n - 1), Boundary::Bottom), (n - 1, n.saturating_sub(2), Boundary::Top)] {
                let (len, mid, kind) = horizontal(i, if boundary == Boundary::Bottom { 0 } else { n });
                let v = vid(i, j);
                let width = area(&b, v) / len;
                b.boundary(v, vid(i, inner), boundary, kind, len, width, mid);
            }
        }
        Mesh::finish(b, n, n, n_interior, cell_volumes, Vec::new(), beta, dt_width, Layout::Mapped { n, mapping })
    }

    /// Replaces every barrier face by an ordinary face.
    pub fn dissolve_barrier(&mut self) {
        for &f in &self.barrier_faces {
            let face = &mut self.faces[f];
            if let FaceKind::Barrier(frame) = face.kind {
                face.kind = if frame.normal == [1.0, 0.0] {
                    FaceKind::Axis(Axis::X)
                } else if frame.normal == [0.0, 1.0] {
                    FaceKind::Axis(Axis::Y)
                } else {
                    FaceKind::Rotated(frame)
                };
            }
        }
        self.barrier_faces.clear();
        for v in &mut self.volumes {
            v.side = Side::Lower;
        }
        self.stencils = vec![None; self.volumes.len()];
        // recompute upwind links now that barrier faces are ordinary
        let tags: Vec<(Option<EdgeDir>, Option<EdgeDir>)> = (0..self.faces.len())
            .map(|k| {
                let find = |v: usize| self.incidence[v].iter().find(|(g, _)| *g == k).and_then(|(_, t)| *t);
                (find(self.faces[k].a), find(self.faces[k].b))
            })
            .collect();
        for k in 0..self.faces.len() {
            if !self.faces[k].ghost {
                let u = [
                    upwind_for(&self.faces, &self.incidence, &tags, &self.volumes, k, false),
                    upwind_for(&self.faces, &self.incidence, &tags, &self.volumes, k, true),
                ];
                self.faces[k].upwind = u;
            }
        }
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        0..self.n_interior
    }

    /// Volume containing a physical point (the side of the barrier holding
    /// the point, for cut cells).
    pub fn locate(&self, p: Point) -> usize {
        match &self.layout {
            Layout::Cartesian { grid, barrier } => {
                let (i, j) = grid.locate(p);
                let cv = self.cell_volumes[grid.linear(i, j)];
                match (cv, barrier) {
                    ([Some(lo), Some(up)], Some(b)) => match b.side_of(p) {
                        Side::Lower => lo,
                        Side::Upper => up,
                    },
                    ([Some(v), _], _) | ([None, Some(v)], _) => v,
                    ([None, None], _) => unreachable!("cell without volume"),
                }
            }
            Layout::Mapped { n, mapping } => {
                let h = 1.0 / *n as f64;
                let i = ((p[0] / h).floor() as usize).min(n - 1);
                // cells of a column are bounded by straight edges between nodes
                let mut j = ((mapping.inverse(p[0], p[1]) / h).floor() as usize).min(n - 1);
                let below = |j: usize| -> f64 {
                    let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
                    let (y0, y1) = (mapping.forward(x0, j as f64 * h), mapping.forward(x1, j as f64 * h));
                    y0 + (p[0] - x0) / h * (y1 - y0)
                };
                while j > 0 && p[1] < below(j) {
                    j -= 1;
                }
                while j + 1 < *n && p[1] >= below(j + 1) {
                    j += 1;
                }
                j * n + i
            }
        }
    }
}

impl Mesh {
    /// Every volume whose closed cell contains `p` on the point's side of the
    /// barrier: one volume inside a cell, two on an edge, four at a corner.
    pub fn locate_all(&self, p: Point) -> Vec<usize> {
        let near = |t: f64, n: usize| -> Vec<usize> {
            let k = t.round();
            if (t - k).abs() <= 1e-9 && k >= 1.0 && k <= (n - 1) as f64 {
                vec![k as usize - 1, k as usize]
            } else {
                vec![(t.floor().max(0.0) as usize).min(n - 1)]
            }
        };
        let side = self.volumes[self.locate(p)].side;
        let mut out: Vec<usize> = Vec::with_capacity(4);
        let mut push = |v: usize| {
            if self.volumes[v].side == side && !out.contains(&v) {
                out.push(v);
            }
        };
        match &self.layout {
            Layout::Cartesian { grid, .. } => {
                for j in near(p[1] / grid.dy, grid.ny) {
                    for &i in &near(p[0] / grid.dx, grid.nx) {
                        if let Some(v) = self.cell_volumes[grid.linear(i, j)][side.index()] {
                            push(v);
                        }
                    }
                }
            }
            Layout::Mapped { n, mapping } => {
                let h = 1.0 / *n as f64;
                for i in near(p[0] / h, *n) {
                    for j in near(mapping.inverse(p[0], p[1]) / h, *n) {
                        push(j * n + i);
                    }
                }
            }
        }
        out
    }
}

fn b_side(cell_volumes: &[[Option<usize>; 2]], grid: &Grid, i: usize, j: usize, side: Side) -> bool {
    cell_volumes[grid.linear(i, j)][side.index()].is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::intersect_barrier;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plain_grid_topology() {
        let m = Mesh::cartesian(&CutCellTable::empty(Grid::square(4))).unwrap();
        assert_eq!(m.n_interior, 16);
        // 2·4·3 interior faces, 4·4·2 boundary faces
        assert_eq!(m.faces.len(), 24 + 32);
        assert_eq!(m.volumes.len(), 16 + 32);
        let f = m.faces.iter().position(|f| f.a == 1 && f.b == 2).unwrap();
        let up = m.faces.iter().position(|f| f.a == 0 && f.b == 1).unwrap();
        assert_eq!(m.faces[f].upwind[1], Upwind::Face { face: up, swap: false });
        assert!(m.barrier_faces.is_empty());
    }

    #[test]
    fn cut_mesh_closes() {
        // the sum of outward normals times lengths vanishes for every volume
        for barrier in [BarrierGeometry::linear_model(1.5), BarrierGeometry::v_model(1.5)] {
            let t = intersect_barrier(Grid::square(20), &barrier).unwrap();
            let m = Mesh::cartesian(&t).unwrap();
            for v in m.interior() {
                let mut s = [0.0, 0.0];
                for &(f, _) in &m.incidence[v] {
                    let face = &m.faces[f];
                    let n = face.normal();
                    let sign = if face.a == v { 1.0 } else { -1.0 };
                    s[0] += sign * n[0] * face.length;
                    s[1] += sign * n[1] * face.length;
                }
                assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn grid_line_barrier_becomes_barrier_faces() {
        let b = BarrierGeometry::new(vec![[0.0, 0.5], [1.0, 0.5]], 2.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        let m = Mesh::cartesian(&t).unwrap();
        assert_eq!(m.barrier_faces.len(), 10);
        for &f in &m.barrier_faces {
            let face = &m.faces[f];
            assert_eq!(m.volumes[face.a].side, Side::Lower);
            assert_eq!(m.volumes[face.b].side, Side::Upper);
            assert_eq!(face.normal(), [0.0, 1.0]);
        }
    }

    #[test]
    fn locate_picks_side() {
        let t = intersect_barrier(Grid::square(10), &BarrierGeometry::linear_model(1.5)).unwrap();
        let m = Mesh::cartesian(&t).unwrap();
        let lo = m.locate([0.05, 0.31]);
        let up = m.locate([0.05, 0.39]);
        assert_ne!(lo, up);
        assert_eq!(m.volumes[lo].side, Side::Lower);
        assert_eq!(m.volumes[up].side, Side::Upper);
    }

    #[test]
    fn mapping_examples() {
        let map = Mapping { barrier: BarrierGeometry::linear_model(1.5), ystar: 0.4765 };
        for x in [0.0, 0.3, 0.77, 1.0] {
            assert_abs_diff_eq!(map.forward(x, 0.4765), map.barrier.height_at(x), epsilon = 1e-15);
            assert_eq!(map.forward(x, 0.0), 0.0);
            assert_abs_diff_eq!(map.forward(x, 1.0), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(map.forward(x, 0.4765 * 0.5), 0.5 * map.barrier.height_at(x), epsilon = 1e-15);
            for eta in [0.1, 0.5, 0.9] {
                assert_abs_diff_eq!(map.inverse(x, map.forward(x, eta)), eta, epsilon = 1e-14);
            }
        }
    }
}
