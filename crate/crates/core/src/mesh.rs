//! Conforming triangulations of the perforated periodicity cell and of the
//! truncated boundary-layer strip, with identical traces on the periodic
//! sides.
//!
//! Points come from a graded quadtree driven by the sizing field
//! `h(x) = min(h_far, h_near + (grading - 1) dist(x, holes))`; the 1D
//! samplings of paired sides are generated once and copied. A constrained
//! Delaunay triangulation of those points is refined for angle quality.
//! Refinement may split boundary segments, so the traces of paired sides
//! are merged and the triangulation rebuilt until they coincide.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use libm::{acos, ceil, fabs, sqrt};
use serde::{Deserialize, Serialize};
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use crate::error::{Error, MeshError};
use crate::geometry::{instantiate_cell, segment_distance, CellSpec, Point, Polygon, StripSpec};

/// Minimum angle every mesh must reach.
pub const MIN_ANGLE_DEG: f64 = 20.0;

/// Quadtree leaf side relative to the local target size.
const LEAF_FACTOR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
    Hole(usize),
}

impl core::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BoundaryTag::Left => f.write_str("left"),
            BoundaryTag::Right => f.write_str("right"),
            BoundaryTag::Bottom => f.write_str("bottom"),
            BoundaryTag::Top => f.write_str("top"),
            BoundaryTag::Hole(k) => write!(f, "hole{k}"),
        }
    }
}

/// Which pair of sides is identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Periodicity {
    /// `x1 = -1/2` (master) with `x1 = 1/2` (slave).
    LeftRight,
    /// `x2 = 0` (master) with `x2 = H` (slave).
    BottomTop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// `(master, slave)`.
    pub periodic_pairs: Vec<(usize, usize)>,
    pub periodicity: Periodicity,
    /// Lower-left and upper-right corners of the outer rectangle.
    pub domain: [Point; 2],
    pub holes: Vec<Polygon>,
    /// Longest edge.
    pub h: f64,
    /// Smallest interior angle in degrees.
    pub quality: f64,
}

/// Sizing field parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sizing {
    pub h_near: f64,
    pub h_far: f64,
    pub grading: f64,
}

impl Sizing {
    pub fn uniform(h: f64) -> Self {
        Sizing { h_near: h, h_far: h, grading: 1.0 }
    }

    pub fn at_distance(&self, d: f64) -> f64 {
        (self.h_near + (self.grading - 1.0) * d.max(0.0)).min(self.h_far)
    }
}

/// Uniform mesh of the perforated cell.
pub fn mesh_cell(spec: &CellSpec, target_h: f64) -> Result<PeriodicMesh, Error> {
    let holes = instantiate_cell(spec)?;
    let mut limit = spec.height / 4.0;
    if let Some(hole) = &spec.hole {
        limit = limit.min(spec.epsilon() * hole.diameter() / 4.0);
    }
    if !(target_h > 0.0 && target_h < limit) {
        return Err(MeshError::SizeOutOfRange { requested: target_h, limit }.into());
    }
    build_cell(spec.height, holes, Sizing::uniform(target_h)).map_err(Into::into)
}

/// Graded mesh of the perforated cell: `h_near` at the holes, coarsening
/// by `grading` per layer up to `h_far`. The hole-resolution limit applies
/// to `h_near` only.
pub fn mesh_cell_graded(spec: &CellSpec, sizing: Sizing) -> Result<PeriodicMesh, Error> {
    let holes = instantiate_cell(spec)?;
    check_sizing(&sizing, spec.height / 4.0)?;
    if let Some(hole) = &spec.hole {
        let limit = spec.epsilon() * hole.diameter() / 4.0;
        if !(sizing.h_near < limit) {
            return Err(MeshError::SizeOutOfRange { requested: sizing.h_near, limit }.into());
        }
    }
    build_cell(spec.height, holes, sizing).map_err(Into::into)
}

/// Mesh of `(-T, T) x (0, H)` minus the hole, periodic in `x2`. Sizes grow
/// from `target_h` at the hole by `grading` per layer, capped at `H/8`.
pub fn mesh_strip(spec: &StripSpec, target_h: f64, grading: f64) -> Result<PeriodicMesh, Error> {
    let hole = spec.validated_polygon()?;
    let h_far = (spec.height / 8.0).max(target_h);
    let sizing = Sizing { h_near: target_h, h_far, grading };
    check_sizing(&sizing, spec.height / 4.0)?;
    let limit = spec.hole.diameter() / 4.0;
    if !(target_h < limit) {
        return Err(MeshError::SizeOutOfRange { requested: target_h, limit }.into());
    }
    let t = spec.half_length;
    build(
        [[-t, 0.0], [t, spec.height]],
        vec![hole],
        sizing,
        Periodicity::BottomTop,
    )
    .map_err(Into::into)
}

/// Mesh of a hole-free strip piece, for checks.
pub fn mesh_rectangle_strip(half_length: f64, height: f64, target_h: f64) -> Result<PeriodicMesh, Error> {
    check_sizing(&Sizing::uniform(target_h), height / 4.0)?;
    build([[-half_length, 0.0], [half_length, height]], Vec::new(), Sizing::uniform(target_h), Periodicity::BottomTop)
        .map_err(Into::into)
}

fn check_sizing(s: &Sizing, limit: f64) -> Result<(), MeshError> {
    if !(s.h_near > 0.0 && s.h_near < limit) {
        return Err(MeshError::SizeOutOfRange { requested: s.h_near, limit });
    }
    if !(s.h_far >= s.h_near && s.h_far <= 2.0 * limit) {
        return Err(MeshError::SizeOutOfRange { requested: s.h_far, limit: 2.0 * limit });
    }
    if !(s.grading >= 1.0) {
        return Err(MeshError::SizeOutOfRange { requested: s.grading, limit: 1.0 });
    }
    Ok(())
}

fn build_cell(height: f64, holes: Vec<Polygon>, sizing: Sizing) -> Result<PeriodicMesh, MeshError> {
    if holes.is_empty() {
        let nx = ceil(1.0 / sizing.h_far) as usize;
        let ny = ceil(height / (sizing.h_far * 0.5 * sqrt(3.0))) as usize;
        let mesh = mesh_cell_lattice(height, nx, ny)?;
        mesh.check_quality()?;
        return Ok(mesh);
    }
    build([[-0.5, 0.0], [0.5, height]], holes, sizing, Periodicity::LeftRight)
}

/// Hole-free cell on a near-equilateral lattice: `ny + 1` rows, `nx`
/// cells per row, odd rows shifted by half a cell (plus the two end
/// vertices). Quadtree points give right-angled patterns whose P1
/// eigenvalue error is about twice the equilateral one. The angle floor is
/// not enforced here; lattices chosen from a mesh size stay near 30 degrees.
pub fn mesh_cell_lattice(height: f64, nx: usize, ny: usize) -> Result<PeriodicMesh, MeshError> {
    if nx < 2 || ny < 1 || !(height > 0.0) {
        return Err(MeshError::SizeOutOfRange { requested: nx.min(ny) as f64, limit: 2.0 });
    }
    let mut vertices: Vec<Point> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(ny + 1);
    for r in 0..=ny {
        let y = if r == ny { height } else { height * r as f64 / ny as f64 };
        let mut xs: Vec<f64> = Vec::with_capacity(nx + 2);
        if r % 2 == 0 {
            xs.extend((0..nx).map(|i| -0.5 + i as f64 / nx as f64));
        } else {
            xs.push(-0.5);
            xs.extend((0..nx).map(|i| -0.5 + (i as f64 + 0.5) / nx as f64));
        }
        xs.push(0.5);
        let start = vertices.len();
        vertices.extend(xs.iter().map(|&x| [x, y]));
        rows.push((start..vertices.len()).collect());
    }
    let mut triangles = Vec::new();
    for w in rows.windows(2) {
        let (lo, up) = (&w[0], &w[1]);
        let (mut i, mut j) = (0, 0);
        while i + 1 < lo.len() || j + 1 < up.len() {
            // On a tie (both rows end at x = 1/2) the row that lags behind
            // moves first.
            let advance_lower = j + 1 == up.len()
                || (i + 1 < lo.len() && {
                    let (a, b) = (vertices[lo[i + 1]][0], vertices[up[j + 1]][0]);
                    a < b || (a == b && vertices[lo[i]][0] < vertices[up[j]][0])
                });
            if advance_lower {
                triangles.push([lo[i], lo[i + 1], up[j]]);
                i += 1;
            } else {
                triangles.push([lo[i], up[j + 1], up[j]]);
                j += 1;
            }
        }
    }
    let domain = [[-0.5, 0.0], [0.5, height]];
    let boundary_edges = tag_boundary(&triangles, &vertices, domain, &[])?;
    let mut mesh = PeriodicMesh {
        vertices,
        triangles,
        boundary_edges,
        periodic_pairs: Vec::new(),
        periodicity: Periodicity::LeftRight,
        domain,
        holes: Vec::new(),
        h: 0.0,
        quality: 0.0,
    };
    mesh.periodic_pairs = pair_periodic(&mesh)?;
    mesh.update_metrics();
    Ok(mesh)
}

struct SizeField<'a> {
    holes: &'a [Polygon],
    /// Centroid and bounding radius of each hole.
    bounds: Vec<(Point, f64)>,
    sizing: Sizing,
}

impl<'a> SizeField<'a> {
    fn new(holes: &'a [Polygon], sizing: Sizing) -> Self {
        let bounds = holes.iter().map(|h| (h.centroid(), h.bounding_radius())).collect();
        SizeField { holes, bounds, sizing }
    }

    fn hole_distance(&self, p: Point) -> f64 {
        let mut best = f64::INFINITY;
        for (hole, &(c, r)) in self.holes.iter().zip(&self.bounds) {
            if libm::hypot(p[0] - c[0], p[1] - c[1]) - r < best {
                best = best.min(hole.boundary_distance(p));
            }
        }
        best
    }

    fn at(&self, p: Point) -> f64 {
        if self.holes.is_empty() {
            self.sizing.h_far
        } else {
            self.sizing.at_distance(self.hole_distance(p))
        }
    }

    fn inside_hole(&self, p: Point) -> bool {
        self.holes.iter().any(|h| h.contains(p))
    }
}

/// Parameters along `[0, len]` where consecutive gaps follow `size(t)`,
/// rescaled to land exactly on `len`.
fn sample_segment(len: f64, size: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut ts = vec![0.0];
    let mut t = 0.0;
    while t < len {
        let step = size(t).min(size((t + size(t)).min(len)));
        t += step;
        ts.push(t);
    }
    // Drop the overshoot and distribute it.
    let n = ts.len() - 1;
    let last = ts[n];
    let prev = ts[n - 1];
    if n > 1 && (len - prev) < 0.5 * (last - prev) {
        ts.pop();
    }
    let scale = len / ts[ts.len() - 1];
    for t in ts.iter_mut() {
        *t *= scale;
    }
    let k = ts.len() - 1;
    ts[k] = len;
    ts
}

/// Boundary discretization: parameters along the four rectangle sides
/// (bottom/top measured from `x0`, left/right from `y0`) and the point
/// chains on each hole polygon.
#[derive(Clone, PartialEq)]
struct Traces {
    bottom: Vec<f64>,
    right: Vec<f64>,
    top: Vec<f64>,
    left: Vec<f64>,
    holes: Vec<Vec<Point>>,
}

const MAX_ROUNDS: usize = 8;

fn build(
    domain: [Point; 2],
    holes: Vec<Polygon>,
    sizing: Sizing,
    periodicity: Periodicity,
) -> Result<PeriodicMesh, MeshError> {
    let [[x0, y0], [x1, y1]] = domain;
    let field = SizeField::new(&holes, sizing);
    let step = |p: Point| LEAF_FACTOR * field.at(p);

    // Paired sides share one sampling.
    let (w, ht) = (x1 - x0, y1 - y0);
    let horizontal = |y: f64| sample_segment(w, |t| step([x0 + t, y]));
    let vertical = |x: f64| sample_segment(ht, |t| step([x, y0 + t]));
    let (bottom, top, left, right) = match periodicity {
        Periodicity::LeftRight => {
            let lr = sample_segment(ht, |t| step([x0, y0 + t]).min(step([x1, y0 + t])));
            (horizontal(y0), horizontal(y1), lr.clone(), lr)
        }
        Periodicity::BottomTop => {
            let bt = sample_segment(w, |t| step([x0 + t, y0]).min(step([x0 + t, y1])));
            (bt.clone(), bt, vertical(x0), vertical(x1))
        }
    };
    let hole_chains = holes
        .iter()
        .map(|poly| {
            let mut pts = Vec::new();
            for (p, q) in poly.edges() {
                let len = sqrt((q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]));
                let pieces = ceil(len / (LEAF_FACTOR * sizing.h_near)).max(1.0) as usize;
                for s in 0..pieces {
                    let t = s as f64 / pieces as f64;
                    pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
            pts
        })
        .collect();
    let mut traces = Traces { bottom, right, top, left, holes: hole_chains };
    let interior = quadtree_points(domain, &field);

    // Refinement may split boundary segments; the split points are copied
    // to the partner side and the triangulation rebuilt until both traces
    // agree.
    for _round in 0..MAX_ROUNDS {
        let (vertices, tris) = triangulate(domain, &traces, &interior, &field)?;
        let found = extract_traces(domain, &holes, &vertices, &tris);
        let mut next = found.clone();
        match periodicity {
            Periodicity::LeftRight => {
                let u = union(&found.left, &found.right);
                next.left = u.clone();
                next.right = u;
            }
            Periodicity::BottomTop => {
                let u = union(&found.bottom, &found.top);
                next.bottom = u.clone();
                next.top = u;
            }
        }
        if next == found {
            let boundary_edges = tag_boundary(&tris, &vertices, domain, &holes)?;
            let mut mesh = PeriodicMesh {
                vertices,
                triangles: tris,
                boundary_edges,
                periodic_pairs: Vec::new(),
                periodicity,
                domain,
                holes,
                h: 0.0,
                quality: 0.0,
            };
            mesh.periodic_pairs = pair_periodic(&mesh)?;
            mesh.update_metrics();
            mesh.check_quality()?;
            return Ok(mesh);
        }
        traces = next;
    }
    Err(MeshError::PeriodicMismatch { rounds: MAX_ROUNDS })
}

fn union(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = a.iter().chain(b).copied().collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

fn triangulate(
    domain: [Point; 2],
    traces: &Traces,
    interior: &[Point],
    field: &SizeField<'_>,
) -> Result<(Vec<Point>, Vec<[usize; 3]>), MeshError> {
    let [[x0, y0], [x1, y1]] = domain;
    let (w, ht) = (x1 - x0, y1 - y0);
    let mut ring: Vec<Point> = Vec::new();
    ring.extend(traces.bottom[..traces.bottom.len() - 1].iter().map(|&t| [x0 + t, y0]));
    ring.extend(traces.right[..traces.right.len() - 1].iter().map(|&t| [x1, y0 + t]));
    ring.extend(traces.top[1..].iter().rev().map(|&t| [x0 + t, y1]));
    ring.extend(traces.left[1..].iter().rev().map(|&t| [x0, y0 + t]));

    let mut points: Vec<Point2<f64>> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut chain = |pts: &[Point], points: &mut Vec<Point2<f64>>| {
        let start = points.len();
        points.extend(pts.iter().map(|p| Point2::new(p[0], p[1])));
        let end = points.len();
        for i in start..end - 1 {
            edges.push([i, i + 1]);
        }
        edges.push([end - 1, start]);
    };
    chain(&ring, &mut points);
    for h in &traces.holes {
        chain(h, &mut points);
    }
    // Interior points too close to boundary points refined in earlier
    // rounds would create slivers; the quadtree clearance already keeps
    // them off the initial traces.
    points.extend(interior.iter().map(|p| Point2::new(p[0], p[1])));
    // A frame keeps the outer rectangle off the convex hull.
    let pad = 0.25 * w.max(ht);
    for p in [[x0 - pad, y0 - pad], [x1 + pad, y0 - pad], [x1 + pad, y1 + pad], [x0 - pad, y1 + pad]] {
        points.push(Point2::new(p[0], p[1]));
    }

    let n_input = points.len();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(points, edges)
        .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
    if cdt.num_vertices() != n_input {
        return Err(MeshError::Triangulation("duplicate input points".into()));
    }
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG + 8.0))
        .exclude_outer_faces(true)
        .with_max_additional_vertices(n_input * 4 + 1000);
    cdt.refine(params);

    // Keep triangles inside the rectangle and outside all holes.
    let all: Vec<Point> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let inside = |c: Point| c[0] > x0 && c[0] < x1 && c[1] > y0 && c[1] < y1 && !field.inside_hole(c);
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        let [a, b, c] = f.vertices().map(|v| v.fix().index());
        let cen = [(all[a][0] + all[b][0] + all[c][0]) / 3.0, (all[a][1] + all[b][1] + all[c][1]) / 3.0];
        if inside(cen) {
            tris.push(ccw([a, b, c], &all));
        }
    }

    // Compact the vertex numbering, preserving order.
    let mut used = vec![usize::MAX; all.len()];
    for t in &tris {
        for &v in t {
            used[v] = 0;
        }
    }
    let mut vertices = Vec::new();
    for (i, u) in used.iter_mut().enumerate() {
        if *u == 0 {
            *u = vertices.len();
            vertices.push(all[i]);
        }
    }
    for t in tris.iter_mut() {
        for v in t.iter_mut() {
            *v = used[*v];
        }
    }
    Ok((vertices, tris))
}

/// Polygon edge index and parameter of a point lying on the polygon.
fn locate_on_polygon(poly: &Polygon, p: Point, tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    for (i, (a, b)) in poly.edges().enumerate() {
        let d = segment_distance(p, a, b);
        if d <= tol && best.map_or(true, |(bd, _, _)| d < bd) {
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let t = ((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / (ex * ex + ey * ey);
            best = Some((d, i, t.clamp(0.0, 1.0)));
        }
    }
    best.map(|(_, i, t)| {
        // A polygon vertex is the start of its outgoing edge.
        if t >= 1.0 {
            ((i + 1) % poly.len(), 0.0)
        } else {
            (i, t)
        }
    })
}

fn boundary_edge_list(tris: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            count.entry((a.min(b), a.max(b))).or_insert((0, [a, b])).0 += 1;
        }
    }
    count.into_values().filter(|&(n, _)| n == 1).map(|(_, e)| e).collect()
}

fn extract_traces(domain: [Point; 2], holes: &[Polygon], v: &[Point], tris: &[[usize; 3]]) -> Traces {
    let [[x0, y0], [x1, y1]] = domain;
    let tol = 1e-9 * (x1 - x0).max(y1 - y0);
    let mut on_boundary = vec![false; v.len()];
    for [a, b] in boundary_edge_list(tris) {
        on_boundary[a] = true;
        on_boundary[b] = true;
    }
    let mut t = Traces {
        bottom: Vec::new(),
        right: Vec::new(),
        top: Vec::new(),
        left: Vec::new(),
        holes: vec![Vec::new(); holes.len()],
    };
    let mut hole_params: Vec<Vec<(usize, f64, Point)>> = vec![Vec::new(); holes.len()];
    for (i, p) in v.iter().enumerate() {
        if !on_boundary[i] {
            continue;
        }
        let mut outer = false;
        if p[1] == y0 {
            t.bottom.push(p[0] - x0);
            outer = true;
        }
        if p[1] == y1 {
            t.top.push(p[0] - x0);
            outer = true;
        }
        if p[0] == x0 {
            t.left.push(p[1] - y0);
            outer = true;
        }
        if p[0] == x1 {
            t.right.push(p[1] - y0);
            outer = true;
        }
        if outer {
            continue;
        }
        for (k, poly) in holes.iter().enumerate() {
            if let Some((e, s)) = locate_on_polygon(poly, *p, tol) {
                hole_params[k].push((e, s, *p));
                break;
            }
        }
    }
    for side in [&mut t.bottom, &mut t.right, &mut t.top, &mut t.left] {
        side.sort_by(f64::total_cmp);
        side.dedup();
    }
    for (k, mut hp) in hole_params.into_iter().enumerate() {
        hp.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        t.holes[k] = hp.into_iter().map(|(_, _, p)| p).collect();
    }
    t
}

fn ccw(t: [usize; 3], v: &[Point]) -> [usize; 3] {
    if signed_area(v[t[0]], v[t[1]], v[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn quadtree_points(domain: [Point; 2], field: &SizeField<'_>) -> Vec<Point> {
    let [[x0, y0], [x1, y1]] = domain;
    let (w, ht) = (x1 - x0, y1 - y0);
    // Root cells are squares tiling the short side exactly.
    let ny = ceil(ht / (LEAF_FACTOR * field.sizing.h_far)).max(1.0) as usize;
    let s0 = ht / ny as f64;
    let nx = ceil(w / s0 - 1e-9).max(1.0) as usize;
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for j in (0..ny).rev() {
        for i in (0..nx).rev() {
            stack.push(([x0 + i as f64 * s0, y0 + j as f64 * s0], s0));
        }
    }
    while let Some((corner, s)) = stack.pop() {
        let c = [corner[0] + 0.5 * s, corner[1] + 0.5 * s];
        let d = if field.holes.is_empty() { f64::INFINITY } else { field.hole_distance(c) };
        if d > 0.75 * s && field.inside_hole(c) {
            continue;
        }
        let target = LEAF_FACTOR * field.at(c);
        if s > 1.5 * target && s > 1e-12 {
            let h = 0.5 * s;
            for (dx, dy) in [(1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (0.0, 0.0)] {
                stack.push(([corner[0] + dx * h, corner[1] + dy * h], h));
            }
            continue;
        }
        if c[0] <= x0 || c[0] >= x1 || c[1] <= y0 || c[1] >= y1 {
            continue;
        }
        let wall = (c[0] - x0).min(x1 - c[0]).min(c[1] - y0).min(y1 - c[1]);
        let clearance = 0.45 * s;
        if wall < clearance || d < clearance || field.inside_hole(c) {
            continue;
        }
        out.push(c);
    }
    out
}

fn tag_boundary(
    tris: &[[usize; 3]],
    v: &[Point],
    domain: [Point; 2],
    holes: &[Polygon],
) -> Result<Vec<([usize; 2], BoundaryTag)>, MeshError> {
    let [[x0, y0], [x1, y1]] = domain;
    let tol = 1e-9 * (x1 - x0).max(y1 - y0);
    let mut out = Vec::new();
    for [a, b] in boundary_edge_list(tris) {
        let (p, q) = (v[a], v[b]);
        let tag = if p[0] == x0 && q[0] == x0 {
            BoundaryTag::Left
        } else if p[0] == x1 && q[0] == x1 {
            BoundaryTag::Right
        } else if p[1] == y0 && q[1] == y0 {
            BoundaryTag::Bottom
        } else if p[1] == y1 && q[1] == y1 {
            BoundaryTag::Top
        } else {
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let k = holes.iter().position(|h| {
                h.boundary_distance(p) <= tol && h.boundary_distance(q) <= tol && h.boundary_distance(mid) <= tol
            });
            match k {
                Some(k) => BoundaryTag::Hole(k),
                None => {
                    return Err(MeshError::Triangulation(format!(
                        "untaggable boundary edge at ({}, {})",
                        p[0], p[1]
                    )))
                }
            }
        };
        out.push(([a, b], tag));
    }
    Ok(out)
}

fn pair_periodic(mesh: &PeriodicMesh) -> Result<Vec<(usize, usize)>, MeshError> {
    let (master_tag, slave_tag, coord) = match mesh.periodicity {
        Periodicity::LeftRight => (BoundaryTag::Left, BoundaryTag::Right, 1),
        Periodicity::BottomTop => (BoundaryTag::Bottom, BoundaryTag::Top, 0),
    };
    let collect = |tag: BoundaryTag| {
        let mut vs: Vec<usize> = mesh
            .boundary_edges
            .iter()
            .filter(|(_, t)| *t == tag)
            .flat_map(|(e, _)| e.iter().copied())
            .collect();
        vs.sort_by(|&a, &b| mesh.vertices[a][coord].total_cmp(&mesh.vertices[b][coord]));
        vs.dedup();
        vs
    };
    let (m, s) = (collect(master_tag), collect(slave_tag));
    let [[x0, y0], [x1, y1]] = mesh.domain;
    let size = (x1 - x0).max(y1 - y0);
    if m.len() != s.len() || m.is_empty() {
        return Err(MeshError::PeriodicMismatch { rounds: 1 });
    }
    for (&a, &b) in m.iter().zip(&s) {
        if fabs(mesh.vertices[a][coord] - mesh.vertices[b][coord]) > 1e-12 * size {
            return Err(MeshError::PeriodicMismatch { rounds: 1 });
        }
    }
    Ok(m.into_iter().zip(s).collect())
}

impl PeriodicMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Rectangle area minus the shoelace areas of the holes.
    pub fn domain_area(&self) -> f64 {
        let [[x0, y0], [x1, y1]] = self.domain;
        (x1 - x0) * (y1 - y0) - self.holes.iter().map(Polygon::area).sum::<f64>()
    }

    /// Interior angles of triangle `t` in degrees.
    pub fn angles(&self, t: usize) -> [f64; 3] {
        let p = self.triangles[t].map(|v| self.vertices[v]);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let w = [c[0] - a[0], c[1] - a[1]];
            let cosv = (u[0] * w[0] + u[1] * w[1]) / sqrt((u[0] * u[0] + u[1] * u[1]) * (w[0] * w[0] + w[1] * w[1]));
            out[k] = acos(cosv.clamp(-1.0, 1.0)).to_degrees();
        }
        out
    }

    fn update_metrics(&mut self) {
        let mut h = 0.0f64;
        let mut q = 180.0f64;
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                h = h.max(sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])));
            }
            q = q.min(self.angles(t).into_iter().fold(180.0, f64::min));
        }
        self.h = h;
        self.quality = q;
    }

    fn check_quality(&self) -> Result<(), MeshError> {
        for t in 0..self.triangles.len() {
            let area = self.triangle_area(t);
            let worst = self.angles(t).into_iter().fold(180.0, f64::min);
            if !(area > 0.0) || worst < MIN_ANGLE_DEG {
                let [a, b, c] = self.triangles[t];
                let x = (self.vertices[a][0] + self.vertices[b][0] + self.vertices[c][0]) / 3.0;
                let y = (self.vertices[a][1] + self.vertices[b][1] + self.vertices[c][1]) / 3.0;
                return Err(MeshError::Quality { triangle: t, angle_deg: worst, x, y });
            }
        }
        Ok(())
    }

    /// Slave vertex -> master vertex, identity elsewhere.
    pub fn master_map(&self) -> Vec<usize> {
        let mut map: Vec<usize> = (0..self.vertices.len()).collect();
        for &(m, s) in &self.periodic_pairs {
            map[s] = m;
        }
        // Corner chains (bottom-left <- bottom-right <- ...) resolve in one hop
        // because masters never appear as slaves.
        map
    }

    /// Red refinement: every triangle split into four through its edge
    /// midpoints. The refined space contains the coarse one.
    pub fn refine_uniform(&self) -> PeriodicMesh {
        let mut vertices = self.vertices.clone();
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[key.0], vertices[key.1]);
                vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for &([a, b], tag) in &self.boundary_edges {
            let m = midpoint(a, b, &mut vertices);
            boundary_edges.push(([a, m], tag));
            boundary_edges.push(([m, b], tag));
        }
        boundary_edges.sort_by_key(|&([a, b], _)| (a.min(b), a.max(b)));
        let mut mesh = PeriodicMesh {
            vertices,
            triangles,
            boundary_edges,
            periodic_pairs: Vec::new(),
            periodicity: self.periodicity,
            domain: self.domain,
            holes: self.holes.clone(),
            h: 0.0,
            quality: 0.0,
        };
        mesh.periodic_pairs = pair_periodic(&mesh).expect("refinement preserves periodic traces");
        mesh.update_metrics();
        mesh
    }

    /// Lengthens a strip mesh by `extra` at both ends with structured
    /// columns through the existing end traces. The original vertices and
    /// triangles are kept verbatim, so the two meshes differ only beyond
    /// the old ends.
    pub fn extend_strip(&self, extra: f64) -> Result<PeriodicMesh, MeshError> {
        if self.periodicity != Periodicity::BottomTop || !(extra > 0.0) {
            return Err(MeshError::SizeOutOfRange { requested: extra, limit: 0.0 });
        }
        let [[x0, y0], [x1, y1]] = self.domain;
        let mut mesh = self.clone();
        mesh.boundary_edges.retain(|&(_, t)| !matches!(t, BoundaryTag::Left | BoundaryTag::Right));
        for (tag, x, dir) in [(BoundaryTag::Right, x1, 1.0), (BoundaryTag::Left, x0, -1.0)] {
            let mut col: Vec<usize> = Vec::new();
            for &([a, b], t) in &self.boundary_edges {
                if t == tag {
                    col.extend([a, b]);
                }
            }
            col.sort_by(|&a, &b| self.vertices[a][1].total_cmp(&self.vertices[b][1]));
            col.dedup();
            let spacing = (y1 - y0) / (col.len() - 1) as f64;
            let m = ceil(extra / spacing).max(1.0) as usize;
            let dx = extra / m as f64;
            let top = col.len() - 1;
            let ys: Vec<f64> = col.iter().map(|&v| self.vertices[v][1]).collect();
            for k in 1..=m {
                let xk = if k == m { x + dir * extra } else { x + dir * k as f64 * dx };
                let next: Vec<usize> = ys
                    .iter()
                    .map(|&y| {
                        mesh.vertices.push([xk, y]);
                        mesh.vertices.len() - 1
                    })
                    .collect();
                // Left and right columns of this block.
                let (l, r) = if dir > 0.0 { (&col, &next) } else { (&next, &col) };
                for i in 0..top {
                    mesh.triangles.push([l[i], r[i], r[i + 1]]);
                    mesh.triangles.push([l[i], r[i + 1], l[i + 1]]);
                }
                mesh.boundary_edges.push(([l[0], r[0]], BoundaryTag::Bottom));
                mesh.boundary_edges.push(([r[top], l[top]], BoundaryTag::Top));
                col = next;
            }
            for i in 0..top {
                let edge = if dir > 0.0 { [col[i], col[i + 1]] } else { [col[i + 1], col[i]] };
                mesh.boundary_edges.push((edge, tag));
            }
        }
        mesh.boundary_edges.sort_by_key(|&([a, b], _)| (a.min(b), a.max(b)));
        mesh.domain = [[x0 - extra, y0], [x1 + extra, y1]];
        mesh.periodic_pairs = pair_periodic(&mesh)?;
        mesh.update_metrics();
        Ok(mesh)
    }

    /// Plain-text dump: a header line, then `v x y`, `t i j k`, `e i j tag`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# mesh vertices={} triangles={} edges={} h={:e} min_angle={:.3}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len(),
            self.h,
            self.quality
        );
        for v in &self.vertices {
            let _ = writeln!(s, "v {:e} {:e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
        }
        for ([a, b], tag) in &self.boundary_edges {
            let _ = writeln!(s, "e {a} {b} {tag}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HoleShape;
    use std::println;

    fn reference_disk() -> HoleShape {
        HoleShape::disk([0.0, 0.2], 0.08, 0.4)
    }

    fn assert_valid(mesh: &PeriodicMesh) {
        let rel = fabs(mesh.total_area() - mesh.domain_area()) / mesh.domain_area();
        assert!(rel < 1e-10, "area defect {rel:e}");
        assert!(mesh.quality >= MIN_ANGLE_DEG, "quality {}", mesh.quality);
        for t in 0..mesh.triangles.len() {
            assert!(mesh.triangle_area(t) > 0.0);
        }
        for &([a, b], tag) in &mesh.boundary_edges {
            if let BoundaryTag::Hole(k) = tag {
                for v in [a, b] {
                    assert!(mesh.holes[k].boundary_distance(mesh.vertices[v]) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unperforated_cell() {
        let mesh = mesh_cell(&CellSpec::unperforated(0.4), 0.1 * 0.99).unwrap();
        assert_valid(&mesh);
        assert!(mesh.h <= 1.5 * 0.099);
        for &(m, s) in &mesh.periodic_pairs {
            assert_eq!(mesh.vertices[m][1], mesh.vertices[s][1]);
            assert_eq!(mesh.vertices[m][0], -0.5);
            assert_eq!(mesh.vertices[s][0], 0.5);
        }
    }

    #[test]
    fn perforated_cell_and_refinement() {
        let spec = CellSpec::new(0.4, 2, reference_disk());
        let mesh = mesh_cell(&spec, 0.019).unwrap();
        assert_valid(&mesh);
        println!("cell N=2: {} vertices, quality {:.1}", mesh.num_vertices(), mesh.quality);
        let fine = mesh.refine_uniform();
        assert_valid(&fine);
        assert_eq!(fine.periodic_pairs.len(), 2 * mesh.periodic_pairs.len() - 1);
    }

    #[test]
    fn graded_cell_sixteen_holes() {
        let spec = CellSpec::new(0.4, 16, reference_disk());
        let mesh = mesh_cell_graded(&spec, Sizing { h_near: 0.0012, h_far: 0.05, grading: 1.25 }).unwrap();
        assert_valid(&mesh);
        println!("graded N=16: {} vertices, quality {:.1}", mesh.num_vertices(), mesh.quality);
    }

    #[test]
    fn strip_mesh() {
        let spec = StripSpec::with_default_truncation(0.4, reference_disk());
        let mesh = mesh_strip(&spec, 0.01, 1.2).unwrap();
        assert_valid(&mesh);
        for &(m, s) in &mesh.periodic_pairs {
            assert_eq!(mesh.vertices[m][0], mesh.vertices[s][0]);
        }
        println!("strip: {} vertices, quality {:.1}", mesh.num_vertices(), mesh.quality);
    }

    #[test]
    fn deterministic() {
        let spec = CellSpec::new(0.4, 4, reference_disk());
        let a = mesh_cell_graded(&spec, Sizing { h_near: 0.004, h_far: 0.05, grading: 1.3 }).unwrap();
        let b = mesh_cell_graded(&spec, Sizing { h_near: 0.004, h_far: 0.05, grading: 1.3 }).unwrap();
        assert_eq!(a, b);
    }
}
