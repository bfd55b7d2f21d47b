//! Barrier/grid preprocessing: cut-cell identification, sub-cell polygons,
//! areas, edge portions, barrier normals, merge targets and LSQ stencils.
//!
//! The barrier is a polyline spanning the unit square from `x = 0` to
//! `x = 1` with strictly increasing abscissae, i.e. the graph of a piecewise
//! linear function `y = L(x)`. The lower side of a cell is `{y < L(x)}`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Intersections closer than this (relative to the mesh width) to a grid
/// line are snapped onto it.
const SNAP: f64 = 1e-12;
/// Sub-cells smaller than this fraction of a cell are ignored.
const SLIVER: f64 = 1e-12;
/// Area fraction below which a sub-cell is merged with its normal neighbor.
pub const MERGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lower, Side::Upper];

    pub fn index(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }
}

/// Uniform grid on the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn square(n: usize) -> Self {
        Self { nx: n, ny: n, dx: 1.0 / n as f64, dy: 1.0 / n as f64 }
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn cell_bounds(&self, i: usize, j: usize) -> (f64, f64, f64, f64) {
        (i as f64 * self.dx, (i + 1) as f64 * self.dx, j as f64 * self.dy, (j + 1) as f64 * self.dy)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        [(i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy]
    }

    pub fn linear(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell containing a point of the closed unit square.
    pub fn locate(&self, p: Point) -> (usize, usize) {
        let i = ((p[0] / self.dx).floor() as isize).clamp(0, self.nx as isize - 1) as usize;
        let j = ((p[1] / self.dy).floor() as isize).clamp(0, self.ny as isize - 1) as usize;
        (i, j)
    }
}

/// Barrier polyline and its crest height above the local bed.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierGeometry {
    pub vertices: Vec<Point>,
    pub beta: f64,
}

impl BarrierGeometry {
    pub fn new(vertices: Vec<Point>, beta: f64) -> Result<Self> {
        let b = Self { vertices, beta };
        b.validate()?;
        Ok(b)
    }

    /// The 20° straight barrier of the model problem.
    pub fn linear_model(beta: f64) -> Self {
        Self { vertices: vec![[0.0, 0.3], [1.0, 0.653]], beta }
    }

    /// The 117° V-shaped barrier of the model problem.
    pub fn v_model(beta: f64) -> Self {
        Self { vertices: vec![[0.0, 0.72], [0.5, 0.412], [1.0, 0.72]], beta }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.vertices;
        if v.len() < 2 || v.len() > 3 {
            return Err(Error::DegenerateBarrier(format!("{} vertices; 2 or 3 supported", v.len())));
        }
        for p in v {
            if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
                return Err(Error::BarrierOutsideDomain { x: p[0], y: p[1] });
            }
        }
        for w in v.windows(2) {
            let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            if len == 0.0 {
                return Err(Error::DegenerateBarrier("zero-length segment".into()));
            }
            if w[1][0] <= w[0][0] {
                return Err(Error::DegenerateBarrier("vertices must be strictly increasing in x".into()));
            }
        }
        if v[0][0] != 0.0 || v[v.len() - 1][0] != 1.0 {
            return Err(Error::DegenerateBarrier("barrier must span the domain from x = 0 to x = 1".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Validation("beta".into()));
        }
        Ok(())
    }

    /// Barrier ordinate `L(x)`.
    pub fn height_at(&self, x: f64) -> f64 {
        let v = &self.vertices;
        let k = v.windows(2).position(|w| x <= w[1][0]).unwrap_or(v.len() - 2);
        let (a, b) = (v[k], v[k + 1]);
        let t = (x - a[0]) / (b[0] - a[0]);
        a[1] + t * (b[1] - a[1])
    }

    pub fn side_of(&self, p: Point) -> Side {
        if p[1] < self.height_at(p[0]) {
            Side::Lower
        } else {
            Side::Upper
        }
    }

    /// Mirror image about `x = 0.5`.
    pub fn reflected(&self) -> Self {
        let vertices = self.vertices.iter().rev().map(|p| [1.0 - p[0], p[1]]).collect();
        Self { vertices, beta: self.beta }
    }
}

/// Portion of an edge on one side of the barrier: side, length, midpoint.
pub type EdgePortion = (Side, f64, Point);

impl BarrierGeometry {
    /// Splits the vertical edge `x = xe`, `y0 ≤ y ≤ y1` at the barrier.
    pub fn split_vertical(&self, xe: f64, y0: f64, y1: f64) -> Vec<EdgePortion> {
        let len = y1 - y0;
        let mut yc = self.height_at(xe);
        if (yc - y0).abs() <= SNAP * len {
            yc = y0;
        } else if (yc - y1).abs() <= SNAP * len {
            yc = y1;
        }
        let yc = yc.clamp(y0, y1);
        let mut out = Vec::with_capacity(2);
        if yc - y0 > SLIVER * len {
            out.push((Side::Lower, yc - y0, [xe, 0.5 * (y0 + yc)]));
        }
        if y1 - yc > SLIVER * len {
            out.push((Side::Upper, y1 - yc, [xe, 0.5 * (yc + y1)]));
        }
        out
    }

    /// Splits the horizontal edge `y = ye`, `x0 ≤ x ≤ x1` at the barrier.
    /// A side's portion may consist of two intervals (V barrier); its
    /// midpoint is then the length-weighted mean of the interval midpoints.
    pub fn split_horizontal(&self, ye: f64, x0: f64, x1: f64, dy: f64) -> Vec<EdgePortion> {
        let len = x1 - x0;
        let mut xs = vec![x0, x1];
        for p in &self.vertices {
            if p[0] > x0 && p[0] < x1 {
                xs.push(p[0]);
            }
        }
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] - ye) * (b[1] - ye) < 0.0 {
                let x = a[0] + (ye - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x > x0 && x < x1 {
                    xs.push(x);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        let mut acc = [(0.0, 0.0); 2];
        for w in xs.windows(2) {
            let width = w[1] - w[0];
            let mid = 0.5 * (w[0] + w[1]);
            let side = if self.height_at(mid) > ye + SNAP * dy { Side::Lower } else { Side::Upper };
            acc[side.index()].0 += width;
            acc[side.index()].1 += width * mid;
        }
        let mut out = Vec::with_capacity(2);
        for side in Side::BOTH {
            let (l, m) = acc[side.index()];
            if l > SLIVER * len {
                out.push((side, l, [m / l, ye]));
            }
        }
        out
    }
}

/// Grows a stencil by a second ring of face neighbors when the first ring
/// has fewer than three members or nearly collinear offsets.
pub(crate) fn expand_stencil<K: Copy + PartialEq>(
    center: K,
    neighbors: impl Fn(K) -> Vec<K>,
    centroid: impl Fn(K) -> Point,
    scale: f64,
) -> (Vec<K>, Vec<[f64; 2]>) {
    let c = centroid(center);
    let offsets_of = |members: &[K]| -> Vec<[f64; 2]> {
        members
            .iter()
            .map(|&k| {
                let p = centroid(k);
                [p[0] - c[0], p[1] - c[1]]
            })
            .collect()
    };
    let mut stencil = neighbors(center);
    let mut offsets = offsets_of(&stencil);
    if stencil.len() < 3 || !well_conditioned(&offsets, scale) {
        let first = stencil.clone();
        for &k in &first {
            for nb in neighbors(k) {
                if nb != center && !stencil.contains(&nb) {
                    stencil.push(nb);
                }
            }
        }
        offsets = offsets_of(&stencil);
    }
    (stencil, offsets)
}

/// Polygon area by the shoelace formula (orientation independent).
pub fn shoelace_area(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    if n < 3 {
        return 0.0;
    }
    let o = polygon[0];
    let rel = |k: usize| [polygon[k % n][0] - o[0], polygon[k % n][1] - o[1]];
    let mut forward = 0.0;
    let mut backward = 0.0;
    for k in 1..n - 1 {
        let (p, q) = (rel(k), rel(k + 1));
        forward += p[0] * q[1];
        backward += q[0] * p[1];
    }
    0.5 * (forward - backward).abs()
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(polygon: &[Point]) -> Point {
    let n = polygon.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    // relative coordinates keep cancellation small for tiny cells
    let o = polygon[0];
    for k in 0..n {
        let p = [polygon[k][0] - o[0], polygon[k][1] - o[1]];
        let q = [polygon[(k + 1) % n][0] - o[0], polygon[(k + 1) % n][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a.abs() < 1e-300 {
        let sx: f64 = polygon.iter().map(|p| p[0]).sum();
        let sy: f64 = polygon.iter().map(|p| p[1]).sum();
        return [sx / n as f64, sy / n as f64];
    }
    [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)]
}

/// One straight piece of the barrier inside a cut cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSegment {
    pub start: Point,
    pub end: Point,
    pub length: f64,
    pub midpoint: Point,
    /// Unit normal pointing from the lower to the upper side.
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

impl BarrierSegment {
    fn new(start: Point, end: Point, leg: [Point; 2]) -> Self {
        let d = [end[0] - start[0], end[1] - start[1]];
        let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let e = [leg[1][0] - leg[0][0], leg[1][1] - leg[0][1]];
        let el = (e[0] * e[0] + e[1] * e[1]).sqrt();
        let normal = [-e[1] / el, e[0] / el];
        Self {
            start,
            end,
            length,
            midpoint: [0.5 * (start[0] + end[0]), 0.5 * (start[1] + end[1])],
            normal,
            tangent: [-normal[1], normal[0]],
        }
    }
}

/// Cartesian edge of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeDir {
    Left,
    Right,
    Bottom,
    Top,
}

impl EdgeDir {
    pub const ALL: [EdgeDir; 4] = [EdgeDir::Left, EdgeDir::Right, EdgeDir::Bottom, EdgeDir::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Self {
        match self {
            EdgeDir::Left => EdgeDir::Right,
            EdgeDir::Right => EdgeDir::Left,
            EdgeDir::Bottom => EdgeDir::Top,
            EdgeDir::Top => EdgeDir::Bottom,
        }
    }

    /// Index offset of the neighbor across this edge.
    pub fn offset(self) -> (isize, isize) {
        match self {
            EdgeDir::Left => (-1, 0),
            EdgeDir::Right => (1, 0),
            EdgeDir::Bottom => (0, -1),
            EdgeDir::Top => (0, 1),
        }
    }
}

/// One side of a cut cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubCell {
    pub polygon: Vec<Point>,
    pub area: f64,
    pub centroid: Point,
    /// Portion of each Cartesian edge (indexed by [`EdgeDir`]) on this side.
    pub edge_lengths: [f64; 4],
    /// Normal neighbor this sub-cell is merged with, if small.
    pub merge_target: Option<(usize, usize)>,
    /// Neighbors used for least-squares gradients, as `(i, j, side)`.
    pub lsq_stencil: Vec<(usize, usize, Side)>,
    /// Centroid offsets of the stencil members (rows of Δr).
    pub lsq_offsets: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutCell {
    pub i: usize,
    pub j: usize,
    pub sides: [SubCell; 2],
    pub segments: Vec<BarrierSegment>,
}

impl CutCell {
    pub fn side(&self, side: Side) -> &SubCell {
        &self.sides[side.index()]
    }

    pub fn lower(&self) -> &SubCell {
        &self.sides[0]
    }

    pub fn upper(&self) -> &SubCell {
        &self.sides[1]
    }

    /// Total barrier length inside the cell.
    pub fn barrier_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// The longest barrier piece (the only one unless a vertex lies inside).
    pub fn main_segment(&self) -> &BarrierSegment {
        self.segments.iter().max_by(|a, b| a.length.total_cmp(&b.length)).expect("cut cell has a segment")
    }
}

/// Classification of a grid cell against the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Whole(Side),
    Cut(usize),
}

/// Precomputed barrier/grid geometry.
#[derive(Debug, Clone)]
pub struct CutCellTable {
    pub grid: Grid,
    pub barrier: BarrierGeometry,
    pub kinds: Vec<CellKind>,
    pub cells: Vec<CutCell>,
}

struct Clip {
    lower: Vec<Point>,
    upper: Vec<Point>,
    lower_edges: [f64; 4],
    segments: Vec<BarrierSegment>,
}

fn dedupe(poly: Vec<Point>, tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly {
        if out.last().map_or(true, |q| (q[0] - p[0]).abs() > tol || (q[1] - p[1]).abs() > tol) {
            out.push(p);
        }
    }
    while out.len() > 1 {
        let (a, b) = (out[0], out[out.len() - 1]);
        if (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol {
            out.pop();
        } else {
            break;
        }
    }
    // drop vertices collinear with their neighbors
    let mut changed = true;
    while changed && out.len() > 3 {
        changed = false;
        for k in 0..out.len() {
            let n = out.len();
            let (a, b, c) = (out[(k + n - 1) % n], out[k], out[(k + 1) % n]);
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross.abs() <= tol * tol {
                out.remove(k);
                changed = true;
                break;
            }
        }
    }
    out
}

fn clip_cell(grid: &Grid, barrier: &BarrierGeometry, i: usize, j: usize) -> Clip {
    let (x0, x1, y0, y1) = grid.cell_bounds(i, j);
    let snap_y = |y: f64| -> f64 {
        if (y - y0).abs() <= SNAP * grid.dy {
            y0
        } else if (y - y1).abs() <= SNAP * grid.dy {
            y1
        } else {
            y
        }
    };
    let mut xs = vec![x0, x1];
    for p in &barrier.vertices {
        if p[0] > x0 && p[0] < x1 {
            xs.push(p[0]);
        }
    }
    for w in barrier.vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        for yl in [y0, y1] {
            if (a[1] - yl) * (b[1] - yl) < 0.0 {
                let x = a[0] + (yl - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x > x0 + SNAP * grid.dx && x < x1 - SNAP * grid.dx {
                    xs.push(x);
                }
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= SNAP * grid.dx);

    let ys: Vec<f64> = xs.iter().map(|&x| snap_y(barrier.height_at(x))).collect();
    let yc: Vec<f64> = ys.iter().map(|y| y.clamp(y0, y1)).collect();

    let mut lower = vec![[x0, y0], [x1, y0]];
    for k in (0..xs.len()).rev() {
        lower.push([xs[k], yc[k]]);
    }
    let mut upper: Vec<Point> = (0..xs.len()).map(|k| [xs[k], yc[k]]).collect();
    upper.push([x1, y1]);
    upper.push([x0, y1]);

    let mut lower_edges = [0.0; 4];
    lower_edges[EdgeDir::Left.index()] = yc[0] - y0;
    lower_edges[EdgeDir::Right.index()] = yc[xs.len() - 1] - y0;
    let mut segments = Vec::new();
    for k in 0..xs.len() - 1 {
        let w = xs[k + 1] - xs[k];
        let mid = snap_y(barrier.height_at(0.5 * (xs[k] + xs[k + 1])));
        if mid > y0 {
            lower_edges[EdgeDir::Bottom.index()] += w;
        }
        if mid > y1 {
            lower_edges[EdgeDir::Top.index()] += w;
        }
        if mid > y0 && mid < y1 {
            let xm = 0.5 * (xs[k] + xs[k + 1]);
            let v = &barrier.vertices;
            let leg = v.windows(2).position(|w| xm <= w[1][0]).unwrap_or(v.len() - 2);
            segments.push(BarrierSegment::new([xs[k], ys[k]], [xs[k + 1], ys[k + 1]], [v[leg], v[leg + 1]]));
        }
    }
    let tol = 1e-14 * grid.dx;
    Clip { lower: dedupe(lower, tol), upper: dedupe(upper, tol), lower_edges, segments }
}

fn full_edges(grid: &Grid) -> [f64; 4] {
    [grid.dy, grid.dy, grid.dx, grid.dx]
}

/// Clips every grid cell against the barrier: cell kinds, sub-cell
/// polygons, areas, centroids and edge portions, without merging.
pub fn clip_cells(grid: Grid, barrier: &BarrierGeometry) -> Result<CutCellTable> {
    barrier.validate()?;
    let cell_area = grid.cell_area();
    let mut kinds = Vec::with_capacity(grid.nx * grid.ny);
    let mut cells = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let clip = clip_cell(&grid, barrier, i, j);
            let a_lower = if clip.lower.len() >= 3 { shoelace_area(&clip.lower) } else { 0.0 };
            let a_upper = if clip.upper.len() >= 3 { shoelace_area(&clip.upper) } else { 0.0 };
            if a_lower <= SLIVER * cell_area {
                kinds.push(CellKind::Whole(Side::Upper));
                continue;
            }
            if a_upper <= SLIVER * cell_area {
                kinds.push(CellKind::Whole(Side::Lower));
                continue;
            }
            let full = full_edges(&grid);
            let mut upper_edges = [0.0; 4];
            for k in 0..4 {
                upper_edges[k] = full[k] - clip.lower_edges[k];
            }
            let sub = |polygon: Vec<Point>, area: f64, edge_lengths: [f64; 4]| SubCell {
                centroid: polygon_centroid(&polygon),
                polygon,
                area,
                edge_lengths,
                merge_target: None,
                lsq_stencil: Vec::new(),
                lsq_offsets: Vec::new(),
            };
            kinds.push(CellKind::Cut(cells.len()));
            cells.push(CutCell {
                i,
                j,
                sides: [sub(clip.lower, a_lower, clip.lower_edges), sub(clip.upper, a_upper, upper_edges)],
                segments: clip.segments,
            });
        }
    }
    Ok(CutCellTable { grid, barrier: barrier.clone(), kinds, cells })
}

/// Intersects the barrier with the grid and precomputes all cut-cell data,
/// including merge targets and LSQ stencils.
pub fn intersect_barrier(grid: Grid, barrier: &BarrierGeometry) -> Result<CutCellTable> {
    let mut table = clip_cells(grid, barrier)?;
    merge_targets(&mut table)?;
    for k in 0..table.cells.len() {
        for side in Side::BOTH {
            let (i, j) = (table.cells[k].i, table.cells[k].j);
            let (stencil, offsets) = build_lsq_stencil(&table, i, j, side)?;
            let sc = &mut table.cells[k].sides[side.index()];
            sc.lsq_stencil = stencil;
            sc.lsq_offsets = offsets;
        }
    }
    Ok(table)
}

impl CutCellTable {
    /// Table for a grid without any barrier.
    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            barrier: BarrierGeometry { vertices: Vec::new(), beta: 0.0 },
            kinds: vec![CellKind::Whole(Side::Lower); grid.nx * grid.ny],
            cells: Vec::new(),
        }
    }

    pub fn has_barrier(&self) -> bool {
        !self.barrier.vertices.is_empty()
    }

    pub fn kind(&self, i: usize, j: usize) -> CellKind {
        self.kinds[self.grid.linear(i, j)]
    }

    pub fn cut(&self, i: usize, j: usize) -> Option<&CutCell> {
        match self.kind(i, j) {
            CellKind::Cut(k) => Some(&self.cells[k]),
            CellKind::Whole(_) => None,
        }
    }

    /// Whether cell `(i, j)` has any volume on `side`.
    pub fn has_side(&self, i: usize, j: usize, side: Side) -> bool {
        match self.kind(i, j) {
            CellKind::Cut(_) => true,
            CellKind::Whole(s) => s == side,
        }
    }

    pub fn area(&self, i: usize, j: usize, side: Side) -> f64 {
        match self.kind(i, j) {
            CellKind::Cut(k) => self.cells[k].side(side).area,
            CellKind::Whole(s) if s == side => self.grid.cell_area(),
            CellKind::Whole(_) => 0.0,
        }
    }

    pub fn centroid(&self, i: usize, j: usize, side: Side) -> Point {
        match self.kind(i, j) {
            CellKind::Cut(k) => self.cells[k].side(side).centroid,
            CellKind::Whole(_) => self.grid.cell_center(i, j),
        }
    }

    /// Length of the part of edge `dir` of cell `(i, j)` bordering `side`.
    pub fn edge_length(&self, i: usize, j: usize, side: Side, dir: EdgeDir) -> f64 {
        match self.kind(i, j) {
            CellKind::Cut(k) => self.cells[k].side(side).edge_lengths[dir.index()],
            CellKind::Whole(s) if s == side => full_edges(&self.grid)[dir.index()],
            CellKind::Whole(_) => 0.0,
        }
    }

    pub fn neighbor(&self, i: usize, j: usize, dir: EdgeDir) -> Option<(usize, usize)> {
        let (di, dj) = dir.offset();
        let (ni, nj) = (i as isize + di, j as isize + dj);
        if ni < 0 || nj < 0 || ni >= self.grid.nx as isize || nj >= self.grid.ny as isize {
            None
        } else {
            Some((ni as usize, nj as usize))
        }
    }

    /// Plain-text dump: one row `i, j, α_U, α_L, l_bar, n̂x, n̂y` per cut cell.
    pub fn dump(&self) -> String {
        let mut out = String::from("# i,j,area_upper,area_lower,barrier_length,normal_x,normal_y\n");
        for c in &self.cells {
            let s = c.main_segment();
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                c.i,
                c.j,
                c.upper().area,
                c.lower().area,
                c.barrier_length(),
                s.normal[0],
                s.normal[1]
            );
        }
        out
    }
}

/// Assigns normal-neighbor merge targets to small sub-cells.
pub fn merge_targets(table: &mut CutCellTable) -> Result<()> {
    let limit = (MERGE_THRESHOLD - 1e-12) * table.grid.cell_area();
    let mut targets = Vec::new();
    for (k, c) in table.cells.iter().enumerate() {
        for side in Side::BOTH {
            if c.side(side).area >= limit {
                continue;
            }
            let dir = match side {
                Side::Upper => EdgeDir::Top,
                Side::Lower => EdgeDir::Bottom,
            };
            let (ti, tj) = table.neighbor(c.i, c.j, dir).ok_or(Error::MergeTargetCut { i: c.i, j: c.j })?;
            if !table.has_side(ti, tj, side) || table.area(ti, tj, side) < limit {
                return Err(Error::MergeTargetCut { i: c.i, j: c.j });
            }
            targets.push((k, side, (ti, tj)));
        }
    }
    for (k, side, t) in targets {
        table.cells[k].sides[side.index()].merge_target = Some(t);
    }
    Ok(())
}

/// Same-side face neighbors of `(i, j, side)` (cells sharing a nonzero
/// Cartesian edge portion on that side).
fn face_neighbors(table: &CutCellTable, i: usize, j: usize, side: Side) -> Vec<(usize, usize, Side)> {
    let tol = 1e-12 * table.grid.dx;
    let mut out = Vec::new();
    for dir in EdgeDir::ALL {
        if table.edge_length(i, j, side, dir) <= tol {
            continue;
        }
        if let Some((ni, nj)) = table.neighbor(i, j, dir) {
            if table.has_side(ni, nj, side) && table.edge_length(ni, nj, side, dir.opposite()) > tol {
                out.push((ni, nj, side));
            }
        }
    }
    out
}

fn well_conditioned(offsets: &[[f64; 2]], scale: f64) -> bool {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for r in offsets {
        a += r[0] * r[0];
        b += r[0] * r[1];
        c += r[1] * r[1];
    }
    let det = a * c - b * b;
    det > 1e-6 * scale.powi(4)
}

/// Least-squares stencil of a cut sub-cell: its same-side face neighbors,
/// extended by their face neighbors when fewer than three are available or
/// the offsets are nearly collinear.
pub fn build_lsq_stencil(
    table: &CutCellTable,
    i: usize,
    j: usize,
    side: Side,
) -> Result<(Vec<(usize, usize, Side)>, Vec<[f64; 2]>)> {
    let (stencil, offsets) = expand_stencil(
        (i, j, side),
        |(a, b, s)| face_neighbors(table, a, b, s),
        |(a, b, s)| table.centroid(a, b, s),
        table.grid.dx,
    );
    if stencil.len() < 2 {
        return Err(Error::StencilTooSmall { i, j, size: stencil.len() });
    }
    Ok((stencil, offsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn shoelace_examples() {
        assert_eq!(shoelace_area(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), 1.0);
        assert_eq!(shoelace_area(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 0.5);
        assert_eq!(shoelace_area(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]), 0.5);
        assert_eq!(shoelace_area(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), 0.0);
    }

    #[test]
    fn centroid_of_square() {
        let c = polygon_centroid(&[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn trapezoid_cut_cell() {
        let b = BarrierGeometry::new(vec![[0.0, 0.45], [1.0, 0.55]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        let c = t.cut(0, 4).expect("cell (0,4) is cut");
        assert_abs_diff_eq!(c.lower().area, 0.0055, epsilon = 1e-15);
        assert_eq!(c.lower().polygon.len(), 4);
        assert_abs_diff_eq!(c.lower().area + c.upper().area, 0.01, epsilon = 1e-16);
        assert_abs_diff_eq!(c.lower().edge_lengths[EdgeDir::Left.index()], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.lower().edge_lengths[EdgeDir::Right.index()], 0.06, epsilon = 1e-15);
        assert_eq!(c.lower().edge_lengths[EdgeDir::Top.index()], 0.0);
        let n = c.main_segment().normal;
        assert!(n[1] > 0.0);
        assert_abs_diff_eq!(n[0] * n[0] + n[1] * n[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn barrier_on_grid_line_has_no_cut_cells() {
        let b = BarrierGeometry::new(vec![[0.0, 0.5], [1.0, 0.5]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        assert!(t.cells.is_empty());
        assert_eq!(t.kind(3, 4), CellKind::Whole(Side::Lower));
        assert_eq!(t.kind(3, 5), CellKind::Whole(Side::Upper));
    }

    #[test]
    fn corner_touch_is_not_a_cut() {
        // passes exactly through grid nodes (0,0.2),(0.1,0.3),...
        let b = BarrierGeometry::new(vec![[0.0, 0.2], [1.0, 0.4]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        // slope 0.2: from x=0 to x=0.5 crosses only row 2 and 3
        for c in &t.cells {
            assert!(c.lower().area > 0.0 && c.upper().area > 0.0);
        }
        let b = BarrierGeometry::new(vec![[0.0, 0.0], [1.0, 1.0]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(8), &b).unwrap();
        assert_eq!(t.cells.len(), 8);
        assert_eq!(t.kind(1, 0), CellKind::Whole(Side::Lower));
    }

    #[test]
    fn v_barrier_cut_set_is_symmetric() {
        let t = intersect_barrier(Grid::square(40), &BarrierGeometry::v_model(1.5)).unwrap();
        for c in &t.cells {
            let m = t.cut(39 - c.i, c.j).expect("mirror cell is cut");
            assert_abs_diff_eq!(m.lower().area, c.lower().area, epsilon = 1e-15);
            assert_abs_diff_eq!(m.main_segment().normal[0], -c.main_segment().normal[0], epsilon = 1e-14);
        }
    }

    #[test]
    fn areas_partition_domain() {
        for b in [BarrierGeometry::linear_model(1.0), BarrierGeometry::v_model(1.0)] {
            for n in [7, 25, 64] {
                let t = intersect_barrier(Grid::square(n), &b).unwrap();
                let mut total = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        total += t.area(i, j, Side::Lower) + t.area(i, j, Side::Upper);
                    }
                }
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                for c in &t.cells {
                    let a = c.lower().area + c.upper().area;
                    assert!((a - t.grid.cell_area()).abs() <= 1e-12 * t.grid.cell_area());
                    for k in 0..4 {
                        let full = if k < 2 { t.grid.dy } else { t.grid.dx };
                        assert_abs_diff_eq!(c.lower().edge_lengths[k] + c.upper().edge_lengths[k], full, epsilon = 1e-15);
                    }
                    let max_vertices = if b.vertices.len() == 2 { 5 } else { 7 };
                    for s in Side::BOTH {
                        let v = c.side(s).polygon.len();
                        assert!((3..=max_vertices).contains(&v), "polygon with {v} vertices");
                    }
                }
            }
        }
    }

    fn barriers() -> impl Strategy<Value = BarrierGeometry> {
        let straight = (0.05f64..0.95, 0.05f64..0.95).prop_map(|(a, b)| vec![[0.0, a], [1.0, b]]);
        let bent = (0.05f64..0.95, 0.2f64..0.8, 0.05f64..0.95, 0.05f64..0.95)
            .prop_map(|(a, x, m, b)| vec![[0.0, a], [x, m], [1.0, b]]);
        prop_oneof![straight, bent].prop_map(|vertices| BarrierGeometry { vertices, beta: 1.0 })
    }

    proptest! {
        #[test]
        fn cut_areas_partition_cells(b in barriers(), n in 4usize..60) {
            let t = clip_cells(Grid::square(n), &b).unwrap();
            let cell = t.grid.cell_area();
            let mut total = 0.0;
            for j in 0..n {
                for i in 0..n {
                    total += t.area(i, j, Side::Lower) + t.area(i, j, Side::Upper);
                }
            }
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for c in &t.cells {
                prop_assert!(c.lower().area >= 0.0 && c.upper().area >= 0.0);
                prop_assert!((c.lower().area + c.upper().area - cell).abs() <= 1e-12 * cell);
            }
        }
    }

    #[test]
    fn merge_threshold_is_strict() {
        // horizontal barrier at y = 0.45 on a 10x10 grid: every row-4 cell is
        // split exactly in half, so nothing merges
        let b = BarrierGeometry::new(vec![[0.0, 0.45], [1.0, 0.45]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        assert_eq!(t.cells.len(), 10);
        assert!(t.cells.iter().all(|c| c.lower().merge_target.is_none() && c.upper().merge_target.is_none()));

        let b = BarrierGeometry::new(vec![[0.0, 0.455], [1.0, 0.455]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        let c = t.cut(3, 4).unwrap();
        assert_eq!(c.upper().merge_target, Some((3, 5)));
        assert_eq!(c.lower().merge_target, None);
    }

    #[test]
    fn merge_target_must_be_large() {
        // steep final leg: small lower slivers stacked in the last column
        let b = BarrierGeometry::new(vec![[0.0, 0.05], [0.95, 0.05], [1.0, 0.95]], 1.0).unwrap();
        assert!(matches!(intersect_barrier(Grid::square(10), &b), Err(Error::MergeTargetCut { i: 9, .. })));
        let b = BarrierGeometry::new(vec![[0.0, 0.0], [1.0, 1.0]], 1.0).unwrap();
        assert!(intersect_barrier(Grid::square(10), &b).is_ok());
    }

    #[test]
    fn stencils_stay_on_one_side() {
        let b = BarrierGeometry::linear_model(1.5);
        let t = intersect_barrier(Grid::square(20), &b).unwrap();
        for c in &t.cells {
            for s in Side::BOTH {
                let sc = c.side(s);
                assert!(sc.lsq_stencil.len() >= 2);
                for &(a, bb, side) in &sc.lsq_stencil {
                    assert_eq!(side, s);
                    let p = t.centroid(a, bb, side);
                    assert_eq!(b.side_of(p), s);
                }
            }
        }
    }

    #[test]
    fn steep_stencil_is_transpose_of_shallow() {
        // y = 0.3 + 0.35x and its transpose x = 0.3 + 0.35y are not both
        // graphs, so compare a slope-2 and slope-0.5 pair through the center
        let shallow = intersect_barrier(Grid::square(16), &BarrierGeometry::new(vec![[0.0, 0.25], [1.0, 0.75]], 1.0).unwrap()).unwrap();
        let steep = intersect_barrier(Grid::square(16), &BarrierGeometry::new(vec![[0.0, -0.0], [1.0, 1.0]], 1.0).unwrap()).unwrap();
        assert!(!shallow.cells.is_empty() && !steep.cells.is_empty());
        for t in [&shallow, &steep] {
            for c in &t.cells {
                for s in Side::BOTH {
                    assert!(c.side(s).lsq_stencil.len() >= 2);
                }
            }
        }
    }

    #[test]
    fn corner_cell_stencil_is_clipped() {
        let b = BarrierGeometry::new(vec![[0.0, 0.05], [1.0, 0.2]], 1.0).unwrap();
        let t = intersect_barrier(Grid::square(10), &b).unwrap();
        let c = t.cut(0, 0).unwrap();
        for &(i, j, _) in &c.lower().lsq_stencil {
            assert!(i < 10 && j < 10);
        }
    }

    #[test]
    fn invalid_barriers() {
        assert!(matches!(
            BarrierGeometry::new(vec![[0.0, 0.5], [1.0, 1.2]], 1.0),
            Err(Error::BarrierOutsideDomain { .. })
        ));
        assert!(matches!(
            BarrierGeometry::new(vec![[0.0, 0.5], [0.0, 0.5], [1.0, 0.5]], 1.0),
            Err(Error::DegenerateBarrier(_))
        ));
    }

    #[test]
    fn dump_has_one_row_per_cut_cell() {
        let t = intersect_barrier(Grid::square(10), &BarrierGeometry::linear_model(1.5)).unwrap();
        let text = t.dump();
        assert_eq!(text.lines().count(), t.cells.len() + 1);
    }
}
