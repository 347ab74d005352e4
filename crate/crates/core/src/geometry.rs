//! Strip, hole and periodicity-cell geometry.
//!
//! Holes are given in the coordinates of the unit strip `0 < xi2 < H` and
//! are approximated by closed polygons whose chord sagitta stays below the
//! hole's `boundary_tolerance`. The same polygon, scaled by `eps = 1/N` and
//! shifted by `eps*k*H`, produces the `N` holes of the periodicity cell.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use libm::{cos, fabs, hypot, log, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::PI;

pub type Point = [f64; 2];

/// Parametric family of the hole boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HoleKind {
    Disk {
        radius: f64,
    },
    /// Semi-axes `a` along `xi1`, `b` along `xi2`, rotated by `angle` radians.
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
    },
    /// `r(t) = radius * (1 + amplitude * cos(frequency * (t - phase)))`.
    SmoothStar {
        radius: f64,
        amplitude: f64,
        frequency: u32,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleShape {
    pub kind: HoleKind,
    pub center: Point,
    /// Maximum chord sagitta of the polygonal approximation.
    pub boundary_tolerance: f64,
}

impl HoleShape {
    /// Hole with the default tolerance `1e-3 * min(H, diam)`.
    pub fn new(kind: HoleKind, center: Point, height: f64) -> Self {
        let mut hole = HoleShape { kind, center, boundary_tolerance: 0.0 };
        hole.boundary_tolerance = default_tolerance(height, hole.diameter());
        hole
    }

    pub fn disk(center: Point, radius: f64, height: f64) -> Self {
        Self::new(HoleKind::Disk { radius }, center, height)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.boundary_tolerance = tol;
        self
    }

    /// Diameter of the smallest centered disk containing the exact curve.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            HoleKind::Disk { radius } => 2.0 * radius,
            HoleKind::Ellipse { a, b, .. } => 2.0 * a.max(b),
            HoleKind::SmoothStar { radius, amplitude, .. } => 2.0 * radius * (1.0 + fabs(amplitude)),
        }
    }

    /// Point of the boundary curve at parameter `t` (counterclockwise).
    pub fn point_at(&self, t: f64) -> Point {
        let [cx, cy] = self.center;
        match self.kind {
            HoleKind::Disk { radius } => [cx + radius * cos(t), cy + radius * sin(t)],
            HoleKind::Ellipse { a, b, angle } => {
                let (u, v) = (a * cos(t), b * sin(t));
                let (ca, sa) = (cos(angle), sin(angle));
                [cx + ca * u - sa * v, cy + sa * u + ca * v]
            }
            HoleKind::SmoothStar { radius, amplitude, frequency, phase } => {
                let r = radius * (1.0 + amplitude * cos(frequency as f64 * (t - phase)));
                [cx + r * cos(t), cy + r * sin(t)]
            }
        }
    }

    fn check_parameters(&self) -> Result<(), GeometryError> {
        let bad = |what: &str| Err(GeometryError::InvalidParameter(what.to_string()));
        if !(self.boundary_tolerance > 0.0) || !self.boundary_tolerance.is_finite() {
            return bad("boundary_tolerance must be positive");
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return bad("hole center must be finite");
        }
        match self.kind {
            HoleKind::Disk { radius } if !(radius > 0.0) => bad("disk radius must be positive"),
            HoleKind::Ellipse { a, b, .. } if !(a > 0.0 && b > 0.0) => {
                bad("ellipse semi-axes must be positive")
            }
            HoleKind::SmoothStar { radius, amplitude, frequency, .. } => {
                if !(radius > 0.0) {
                    bad("star radius must be positive")
                } else if !(fabs(amplitude) < 1.0) {
                    bad("star amplitude must lie in (-1, 1)")
                } else if frequency == 0 {
                    bad("star frequency must be at least 1")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Polygonal approximation of the boundary, counterclockwise, with
    /// every chord sagitta below `boundary_tolerance`.
    pub fn polygon(&self) -> Result<Polygon, GeometryError> {
        self.check_parameters()?;
        let initial = match self.kind {
            HoleKind::SmoothStar { frequency, .. } => (8 * frequency as usize).max(16),
            _ => 16,
        };
        let tol = self.boundary_tolerance;
        let mut vertices = Vec::new();
        let dt = 2.0 * PI / initial as f64;
        for i in 0..initial {
            let t0 = i as f64 * dt;
            self.subdivide(t0, t0 + dt, tol, 0, &mut vertices);
        }
        let poly = Polygon { vertices };
        let area = poly.signed_area();
        if !(area > 0.0) {
            return Err(GeometryError::DegenerateArea(area));
        }
        if !poly.is_simple() {
            return Err(GeometryError::NotSimple);
        }
        Ok(poly)
    }

    // Pushes the vertex at t0 and those strictly inside (t0, t1).
    fn subdivide(&self, t0: f64, t1: f64, tol: f64, depth: u32, out: &mut Vec<Point>) {
        let p0 = self.point_at(t0);
        let p1 = self.point_at(t1);
        let tm = 0.5 * (t0 + t1);
        let sagitta = [0.25, 0.5, 0.75]
            .iter()
            .map(|s| segment_distance(self.point_at(t0 + s * (t1 - t0)), p0, p1))
            .fold(0.0, f64::max);
        if sagitta > tol && depth < 24 {
            self.subdivide(t0, tm, tol, depth + 1, out);
            self.subdivide(tm, t1, tol, depth + 1, out);
        } else {
            out.push(p0);
        }
    }

    /// Validated polygon that also satisfies the strip containment margin.
    pub fn validated_polygon(&self, height: f64) -> Result<Polygon, GeometryError> {
        if !(height > 0.0) {
            return Err(GeometryError::InvalidParameter(format!("strip height {height} must be positive")));
        }
        let poly = self.polygon()?;
        let (lo, hi) = poly.bbox();
        let margin = 2.0 * self.boundary_tolerance;
        if lo[1] < margin || hi[1] > height - margin {
            return Err(GeometryError::OutsideStrip { height, margin });
        }
        Ok(poly)
    }
}

/// `1e-3 * min(H, diam)`.
pub fn default_tolerance(height: f64, diameter: f64) -> f64 {
    1e-3 * height.min(diameter)
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    hypot(p[0] - a[0] - t * dx, p[1] - a[1] - t * dy)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Closed polygon, vertices counterclockwise, last vertex joined to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace formula.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a[0] * b[1] - a[1] * b[0]).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        fabs(self.signed_area())
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| hypot(b[0] - a[0], b[1] - a[1])).sum()
    }

    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Largest distance from the centroid to a vertex.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices.iter().map(|p| hypot(p[0] - c[0], p[1] - c[1])).fold(0.0, f64::max)
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.perimeter() / self.len() as f64
    }

    /// No two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let v = &self.vertices;
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd point inclusion.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// `x -> scale * x + offset`.
    pub fn transformed(&self, scale: f64, offset: Point) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|p| [scale * p[0] + offset[0], scale * p[1] + offset[1]]).collect(),
        }
    }

    /// Mirror image across the horizontal line `x2 = axis`, kept counterclockwise.
    pub fn reflected(&self, axis: f64) -> Polygon {
        let mut vertices: Vec<Point> = self.vertices.iter().map(|p| [p[0], 2.0 * axis - p[1]]).collect();
        vertices.reverse();
        Polygon { vertices }
    }

    /// Symmetric Hausdorff distance between the two boundaries, measured
    /// vertex-to-polyline in both directions.
    pub fn hausdorff(&self, other: &Polygon) -> f64 {
        let one_way = |a: &Polygon, b: &Polygon| {
            a.vertices.iter().map(|&p| b.boundary_distance(p)).fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }

    /// True if the boundaries cross or one polygon contains the other.
    pub fn intersects(&self, other: &Polygon) -> bool {
        let (alo, ahi) = self.bbox();
        let (blo, bhi) = other.bbox();
        if alo[0] > bhi[0] || blo[0] > ahi[0] || alo[1] > bhi[1] || blo[1] > ahi[1] {
            return false;
        }
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                if segments_cross(a, b, c, d) {
                    return true;
                }
            }
        }
        self.contains(other.vertices[0]) || other.contains(self.vertices[0])
    }
}

/// Geometry of the periodicity cell `|x1| < 1/2, 0 < x2 < H` with `N`
/// scaled hole copies (`eps = 1/N`). `hole = None` is the unperforated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub height: f64,
    pub n: u32,
    pub hole: Option<HoleShape>,
}

impl CellSpec {
    pub fn new(height: f64, n: u32, hole: HoleShape) -> Self {
        CellSpec { height, n, hole: Some(hole) }
    }

    pub fn unperforated(height: f64) -> Self {
        CellSpec { height, n: 1, hole: None }
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }
}

/// Truncated boundary-layer strip `(-T, T) x (0, H)` minus the unit hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    pub height: f64,
    pub hole: HoleShape,
    pub half_length: f64,
}

impl StripSpec {
    /// Uses `T = max(4 diam, 1.5 H ln(1e6) / (2 pi))`, which puts the
    /// exponential truncation error below `1e-6`.
    pub fn with_default_truncation(height: f64, hole: HoleShape) -> Self {
        let half_length = default_half_length(height, hole.diameter());
        StripSpec { height, hole, half_length }
    }

    pub fn validated_polygon(&self) -> Result<Polygon, GeometryError> {
        let poly = self.hole.validated_polygon(self.height)?;
        let (lo, hi) = poly.bbox();
        let limit = self.half_length - self.height;
        if !(limit > 0.0) || lo[0] <= -limit || hi[0] >= limit {
            return Err(GeometryError::TruncationTooShort { half_length: self.half_length });
        }
        Ok(poly)
    }

    pub fn area(&self) -> Result<f64, GeometryError> {
        Ok(2.0 * self.half_length * self.height - self.validated_polygon()?.area())
    }
}

pub fn default_half_length(height: f64, diameter: f64) -> f64 {
    (4.0 * diameter).max(1.5 * height * log(1e6) / (2.0 * PI))
}

/// Hausdorff distance between the hole polygon and its mirror image
/// across `xi2 = H/2`; zero for a mirror-symmetric hole.
pub fn mirror_symmetry_defect(hole: &HoleShape, height: f64) -> Result<f64, GeometryError> {
    let poly = hole.validated_polygon(height)?;
    Ok(poly.hausdorff(&poly.reflected(0.5 * height)))
}

/// The `N` hole polygons of the periodicity cell, copy `k` being the base
/// polygon scaled by `eps` and shifted by `(0, eps*k*H)`.
pub fn instantiate_cell(spec: &CellSpec) -> Result<Vec<Polygon>, GeometryError> {
    if !(spec.height > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("cell height {} must be positive", spec.height)));
    }
    let Some(hole) = &spec.hole else {
        return Ok(Vec::new());
    };
    if spec.n == 0 {
        return Err(GeometryError::InvalidParameter("N must be positive".to_string()));
    }
    let base = hole.polygon()?;
    let eps = spec.epsilon();
    let h = spec.height;
    let copies: Vec<Polygon> =
        (0..spec.n as usize).map(|k| base.transformed(eps, [0.0, eps * k as f64 * h])).collect();
    for k in 0..copies.len().saturating_sub(1) {
        if copies[k].intersects(&copies[k + 1]) {
            return Err(GeometryError::Overlap { k, next: k + 1 });
        }
    }
    let margin = 2.0 * eps * hole.boundary_tolerance;
    for (k, poly) in copies.iter().enumerate() {
        let (lo, hi) = poly.bbox();
        if lo[0] <= -0.5 + margin || hi[0] >= 0.5 - margin || lo[1] <= margin || hi[1] >= h - margin {
            return Err(GeometryError::OutsideCell { k });
        }
    }
    // Pairwise disjointness beyond neighbours: copies live in disjoint
    // horizontal bands only if the base hole fits in (0, H).
    hole.validated_polygon(h)?;
    Ok(copies)
}

/// Area of the perforated cell (shoelace areas of the hole copies).
pub fn cell_area(spec: &CellSpec) -> Result<f64, GeometryError> {
    let holes = instantiate_cell(spec)?;
    Ok(spec.height - holes.iter().map(Polygon::area).sum::<f64>())
}

#[allow(dead_code)]
pub(crate) fn distance(a: Point, b: Point) -> f64 {
    sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.4;

    #[test]
    fn centered_disk_is_symmetric() {
        let hole = HoleShape::disk([0.0, H / 2.0], 0.08, H);
        assert!(mirror_symmetry_defect(&hole, H).unwrap() < 1e-12);
    }

    #[test]
    fn shifted_disk_defect_is_twice_the_shift() {
        let d = 0.01;
        let hole = HoleShape::disk([0.0, H / 2.0 + d], 0.08, H);
        let defect = mirror_symmetry_defect(&hole, H).unwrap();
        assert!((defect - 2.0 * d).abs() <= 2.0 * hole.boundary_tolerance, "{defect}");
    }

    #[test]
    fn star_defect_matches_brute_force() {
        let hole = HoleShape::new(
            HoleKind::SmoothStar { radius: 0.07, amplitude: 0.2, frequency: 5, phase: 0.0 },
            [0.0, H / 2.0],
            H,
        );
        let poly = hole.validated_polygon(H).unwrap();
        // Brute force: every vertex against every reflected vertex.
        let refl: Vec<Point> = poly.vertices.iter().map(|p| [p[0], H - p[1]]).collect();
        let nearest = |p: &Point, set: &[Point]| {
            set.iter().map(|q| distance(*p, *q)).fold(f64::INFINITY, f64::min)
        };
        let brute = poly.vertices.iter().map(|p| nearest(p, &refl)).fold(0.0, f64::max);
        let defect = mirror_symmetry_defect(&hole, H).unwrap();
        assert!(defect <= brute + 1e-15);
        assert!(defect <= 2.0 * hole.boundary_tolerance);
    }

    #[test]
    fn rotated_ellipse_is_asymmetric() {
        let hole = HoleShape::new(HoleKind::Ellipse { a: 0.1, b: 0.04, angle: 0.5 }, [0.0, H / 2.0], H);
        assert!(mirror_symmetry_defect(&hole, H).unwrap() > 0.01);
    }

    #[test]
    fn sagitta_and_area_tolerance() {
        let hole = HoleShape::disk([0.0, 0.2], 0.08, H);
        let poly = hole.polygon().unwrap();
        let exact = PI * 0.08 * 0.08;
        assert!((poly.area() - exact).abs() <= 10.0 * hole.boundary_tolerance * hole.diameter());
        for (a, b) in poly.edges() {
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let r = distance(mid, [0.0, 0.2]);
            assert!(0.08 - r <= hole.boundary_tolerance * 1.0001);
        }
        assert!(poly.signed_area() > 0.0);
        assert!(poly.is_simple());
    }

    #[test]
    fn single_copy_is_identity() {
        let hole = HoleShape::disk([0.0, 0.2], 0.08, H);
        let polys = instantiate_cell(&CellSpec::new(H, 1, hole.clone())).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0], hole.polygon().unwrap());
    }

    #[test]
    fn four_copies_of_centered_disk() {
        let hole = HoleShape::disk([0.0, H / 2.0], 0.1 * H, H);
        let polys = instantiate_cell(&CellSpec::new(H, 4, hole)).unwrap();
        assert_eq!(polys.len(), 4);
        for (k, poly) in polys.iter().enumerate() {
            let c = poly.centroid();
            let expected = H / 8.0 * (2 * k + 1) as f64;
            assert!(c[0].abs() < 1e-12 && (c[1] - expected).abs() < 1e-12);
            let r = poly.bounding_radius();
            assert!((r - 0.025 * H).abs() < 1e-12);
        }
    }

    #[test]
    fn large_disk_copies_overlap() {
        let hole = HoleShape::disk([0.0, H / 2.0], 0.6 * H, H);
        let err = instantiate_cell(&CellSpec::new(H, 4, hole)).unwrap_err();
        assert!(matches!(err, GeometryError::Overlap { k: 0, next: 1 }), "{err:?}");
    }

    #[test]
    fn removed_area_scales_like_eps() {
        let hole = HoleShape::disk([0.0, H / 2.0], 0.08, H);
        let base = hole.polygon().unwrap().area();
        for n in [1u32, 2, 4, 8, 16] {
            let spec = CellSpec::new(H, n, hole.clone());
            let removed: f64 = instantiate_cell(&spec).unwrap().iter().map(Polygon::area).sum();
            let eps = spec.epsilon();
            assert!((removed - eps * base).abs() <= 1e-14 * base.max(1.0));
            let exact = eps * PI * 0.08 * 0.08;
            assert!((removed - exact).abs() / exact <= 10.0 * hole.boundary_tolerance / hole.diameter());
        }
    }

    #[test]
    fn rejects_degenerate_and_outside_holes() {
        assert!(HoleShape::disk([0.0, 0.2], 0.0, H).polygon().is_err());
        let outside = HoleShape::disk([0.0, 0.05], 0.08, H);
        assert!(matches!(outside.validated_polygon(H), Err(GeometryError::OutsideStrip { .. })));
    }

    #[test]
    fn default_truncation() {
        let hole = HoleShape::disk([0.0, 0.2], 0.08, H);
        let strip = StripSpec::with_default_truncation(H, hole);
        let expected = 1.5 * H * log(1e6) / (2.0 * PI);
        assert!((strip.half_length - expected).abs() < 1e-14);
        assert!(strip.validated_polygon().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn defect_invariant_under_horizontal_shift(shift in -0.3f64..0.3, dy in -0.05f64..0.05) {
                let a = HoleShape::disk([0.0, H / 2.0 + dy], 0.06, H);
                let mut b = a.clone();
                b.center[0] += shift;
                let da = mirror_symmetry_defect(&a, H).unwrap();
                let db = mirror_symmetry_defect(&b, H).unwrap();
                prop_assert!((da - db).abs() < 1e-12);
            }

            #[test]
            fn instantiate_is_deterministic(n in 1u32..12, r in 0.02f64..0.15) {
                let spec = CellSpec::new(H, n, HoleShape::disk([0.0, H / 2.0], r, H));
                prop_assert_eq!(instantiate_cell(&spec), instantiate_cell(&spec));
            }
        }
    }
}
