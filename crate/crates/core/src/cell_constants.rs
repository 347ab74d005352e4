//! Boundary-layer problems on the truncated strip `Xi_T` and the constants
//! `m1`, `m2`, `M` of the unit hole.
//!
//! `W10` solves the Neumann problem with data `-nu_1` on the hole, `W2` the
//! one with data `-nu_2`; both are periodic in `xi2` and have zero flux at
//! `xi1 = +-T`. Far from the hole they tend to constants `C+-` at the rate
//! `exp(-2 pi |xi1| / H)`.
//!
//! For P1 elements the energy and far-field formulas for `m1` coincide up
//! to rounding (the discrete Green identity against the interpolant of
//! `xi1` is exact), and so do the two formulas for `m2`. Their comparison
//! is therefore an assembly check; truncation is assessed separately by
//! the decay fit.

use alloc::sync::Arc;
use alloc::vec::Vec;

use libm::{exp, fabs, log};
use serde::{Deserialize, Serialize};

use crate::error::{CellConstantsError, Error};
use crate::fem::{assemble_real_neumann, edge_normal, NeumannData};
use crate::geometry::StripSpec;
use crate::mesh::{mesh_strip, BoundaryTag, PeriodicMesh};
use crate::PI;

/// Nodal P1 field on a strip mesh.
#[derive(Debug, Clone)]
pub struct Field {
    pub mesh: Arc<PeriodicMesh>,
    /// One value per mesh vertex.
    pub values: Vec<f64>,
}

impl Field {
    /// `(1/H) int W(xi1, xi2) dxi2` along the side with the given tag,
    /// exact for the piecewise linear trace.
    pub fn side_mean(&self, tag: BoundaryTag) -> f64 {
        let mut integral = 0.0;
        let mut length = 0.0;
        for &([a, b], t) in &self.mesh.boundary_edges {
            if t == tag {
                let len = fabs(self.mesh.vertices[b][1] - self.mesh.vertices[a][1]);
                integral += 0.5 * len * (self.values[a] + self.values[b]);
                length += len;
            }
        }
        integral / length
    }

    /// `int (W(x, xi2) - c)^2 dxi2` over the vertical line `xi1 = x`.
    pub fn column_l2_squared(&self, x: f64, c: f64) -> f64 {
        let v = &self.mesh.vertices;
        let mut total = 0.0;
        for tri in &self.mesh.triangles {
            let xs = tri.map(|i| v[i][0]);
            if x <= xs[0].min(xs[1]).min(xs[2]) || x >= xs[0].max(xs[1]).max(xs[2]) {
                continue;
            }
            // Crossing points (y, value) on the two edges straddling x.
            let mut pts = [(0.0, 0.0); 2];
            let mut n = 0;
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let (xa, xb) = (v[a][0], v[b][0]);
                if (xa - x) * (xb - x) < 0.0 && n < 2 {
                    let s = (x - xa) / (xb - xa);
                    pts[n] = (
                        v[a][1] + s * (v[b][1] - v[a][1]),
                        self.values[a] + s * (self.values[b] - self.values[a]) - c,
                    );
                    n += 1;
                } else if xa == x && n < 2 {
                    pts[n] = (v[a][1], self.values[a] - c);
                    n += 1;
                }
            }
            if n == 2 {
                let len = fabs(pts[1].0 - pts[0].0);
                let (f0, f1) = (pts[0].1, pts[1].1);
                total += len * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0;
            }
        }
        total
    }
}

/// Exponential-decay fit of `||W(xi1, .) - C+-||` on both tails.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// Least-squares slope of the log column norm against `|xi1|`; the
    /// slower of the two tails.
    pub rate: f64,
    pub rate_left: f64,
    pub rate_right: f64,
    /// `-2 pi / H`.
    pub expected: f64,
    pub ok: bool,
    pub columns: usize,
}

pub const DECAY_SLACK: f64 = 0.3;
const DECAY_COLUMNS: usize = 12;

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits the decay over `|xi1| in [T/2, T - H]`.
pub fn decay_check(field: &Field, half_length: f64, height: f64) -> Result<DecayCheck, Error> {
    let (lo, hi) = (0.5 * half_length, half_length - height);
    if !(hi > lo) {
        return Err(CellConstantsError::InsufficientColumns { needed: 2, got: 0 }.into());
    }
    let c_plus = field.side_mean(BoundaryTag::Right);
    let c_minus = field.side_mean(BoundaryTag::Left);
    let mut xs = Vec::with_capacity(DECAY_COLUMNS);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for i in 0..DECAY_COLUMNS {
        // Offset off the lattice so columns avoid vertex abscissas.
        let x = lo + (hi - lo) * (i as f64 + 0.5 * (1.0 - 1.0 / core::f64::consts::E)) / DECAY_COLUMNS as f64;
        xs.push(x);
        let floor = f64::MIN_POSITIVE;
        right.push(0.5 * log(field.column_l2_squared(x, c_plus) + floor));
        left.push(0.5 * log(field.column_l2_squared(-x, c_minus) + floor));
    }
    if xs.len() < 3 {
        return Err(CellConstantsError::InsufficientColumns { needed: 3, got: xs.len() }.into());
    }
    let (rate_left, rate_right) = (slope(&xs, &left), slope(&xs, &right));
    let expected = -2.0 * PI / height;
    let rate = rate_left.max(rate_right);
    Ok(DecayCheck {
        rate,
        rate_left,
        rate_right,
        expected,
        ok: rate <= expected * (1.0 - DECAY_SLACK),
        columns: xs.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub half_length: f64,
    pub h: f64,
    pub vertices: usize,
    pub m1_energy: f64,
    pub m1_farfield: f64,
    pub m2_farfield: f64,
    pub m2_boundary_integral: f64,
    pub decay_w1: DecayCheck,
    pub decay_w2: DecayCheck,
    /// `max |W2|` on `xi2 in {0, H}` relative to `max |W2|`.
    pub w2_trace_defect: f64,
    /// `10 m1 exp(-2 pi T / H)`: allowed change of `m1` when `T` grows.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConstants {
    pub m1: f64,
    pub m2: f64,
    #[serde(rename = "M_Xi")]
    pub m_xi: f64,
    pub area_omega: f64,
    #[serde(rename = "H")]
    pub height: f64,
    pub diagnostics: Diagnostics,
}

impl CellConstants {
    /// Constants given directly, with empty diagnostics.
    pub fn from_values(m1: f64, m2: f64, m_xi: f64, area_omega: f64, height: f64) -> Self {
        CellConstants { m1, m2, m_xi, area_omega, height, diagnostics: Diagnostics::default() }
    }

    /// `|omega| / (2H)`, the lower bound of `m1`.
    pub fn area_term(&self) -> f64 {
        self.area_omega / (2.0 * self.height)
    }
}

/// Boundary-layer discretization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripOptions {
    /// Element size at the hole.
    pub target_h: f64,
    pub grading: f64,
    /// Allowed relative disagreement of the two `m1` formulas.
    pub cross_tol: f64,
}

impl StripOptions {
    pub fn for_hole(diameter: f64) -> Self {
        StripOptions { target_h: diameter / 16.0, grading: 1.2, cross_tol: 0.01 }
    }
}

/// Solution of one boundary-layer problem and its energy `||grad W||^2`.
#[derive(Debug, Clone)]
pub struct Solved {
    pub field: Field,
    pub energy: f64,
}

fn solve(mesh: &Arc<PeriodicMesh>, data: NeumannData) -> Result<Solved, Error> {
    let sys = assemble_real_neumann(mesh, data)?;
    let w = sys.solve_zero_mean()?;
    let energy: f64 = w.iter().zip(&sys.f).map(|(a, b)| a * b).sum();
    Ok(Solved { field: Field { mesh: mesh.clone(), values: sys.dofs.expand(&w) }, energy })
}

/// `W10` (data `-nu_1`).
pub fn solve_w1(mesh: &Arc<PeriodicMesh>) -> Result<Solved, Error> {
    solve(mesh, NeumannData::MinusNu1)
}

/// `W2` (data `-nu_2`).
pub fn solve_w2(mesh: &Arc<PeriodicMesh>) -> Result<Solved, Error> {
    solve(mesh, NeumannData::MinusNu2)
}

/// `-(1/2H) int_{d omega} (xi1 + W10) nu_2 ds`, exact for P1 traces on
/// the polygonal hole.
fn m2_boundary_integral(w1: &Field, height: f64) -> f64 {
    let mesh = &w1.mesh;
    let mut total = 0.0;
    for &([a, b], tag) in &mesh.boundary_edges {
        if let BoundaryTag::Hole(_) = tag {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let (nu, len) = edge_normal(pa, pb);
            let (ua, ub) = (pa[0] + w1.values[a], pb[0] + w1.values[b]);
            total += nu[1] * len * 0.5 * (ua + ub);
        }
    }
    -total / (2.0 * height)
}

/// All constants on a given strip mesh.
pub fn constants_on_mesh(
    spec: &StripSpec,
    mesh: Arc<PeriodicMesh>,
    cross_tol: f64,
) -> Result<(CellConstants, Solved, Solved), Error> {
    let area = spec.validated_polygon()?.area();
    let height = spec.height;
    let w1 = solve_w1(&mesh)?;
    let w2 = solve_w2(&mesh)?;
    let m1_energy = (w1.energy + area) / (2.0 * height);
    let m1_farfield =
        0.5 * (w1.field.side_mean(BoundaryTag::Right) - w1.field.side_mean(BoundaryTag::Left));
    let relative = fabs(m1_energy - m1_farfield) / fabs(m1_energy);
    if !(relative <= cross_tol) {
        return Err(CellConstantsError::CrossMethod {
            energy: m1_energy,
            farfield: m1_farfield,
            relative,
            limit: cross_tol,
        }
        .into());
    }
    let m2_farfield =
        0.5 * (w2.field.side_mean(BoundaryTag::Right) - w2.field.side_mean(BoundaryTag::Left));
    let m2_boundary_integral = m2_boundary_integral(&w1.field, height);
    let decay_w1 = decay_check(&w1.field, spec.half_length, height)?;
    let decay_w2 = decay_check(&w2.field, spec.half_length, height)?;
    let max_w2 = w2.field.values.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
    let mut trace = 0.0f64;
    for &([a, b], tag) in &mesh.boundary_edges {
        if matches!(tag, BoundaryTag::Bottom | BoundaryTag::Top) {
            trace = trace.max(fabs(w2.field.values[a])).max(fabs(w2.field.values[b]));
        }
    }
    let constants = CellConstants {
        m1: m1_energy,
        m2: m2_boundary_integral,
        m_xi: w2.energy,
        area_omega: area,
        height,
        diagnostics: Diagnostics {
            half_length: spec.half_length,
            h: mesh.h,
            vertices: mesh.num_vertices(),
            m1_energy,
            m1_farfield,
            m2_farfield,
            m2_boundary_integral,
            decay_w1,
            decay_w2,
            w2_trace_defect: if max_w2 > 0.0 { trace / max_w2 } else { 0.0 },
            truncation_bound: 10.0 * fabs(m1_energy) * truncation_bound(spec.half_length, height),
        },
    };
    Ok((constants, w1, w2))
}

pub fn cell_constants(spec: &StripSpec, opts: &StripOptions) -> Result<CellConstants, Error> {
    let mesh = Arc::new(mesh_strip(spec, opts.target_h, opts.grading)?);
    Ok(constants_on_mesh(spec, mesh, opts.cross_tol)?.0)
}

/// Constants on a mesh and its uniform refinement, with the Richardson
/// extrapolant `(4 f(h/2) - f(h)) / 3` for `m1` and `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub coarse: CellConstants,
    pub fine: CellConstants,
    pub m1: f64,
    #[serde(rename = "M_Xi")]
    pub m_xi: f64,
    pub m2: f64,
}

impl Extrapolated {
    /// The fine-mesh constants with `m1`, `M` replaced by the extrapolants.
    pub fn constants(&self) -> CellConstants {
        let mut c = self.fine.clone();
        c.m1 = self.m1;
        c.m_xi = self.m_xi;
        c.m2 = self.m2;
        c
    }
}

pub fn richardson(a: f64, b: f64) -> f64 {
    (4.0 * b - a) / 3.0
}

pub fn cell_constants_extrapolated(spec: &StripSpec, opts: &StripOptions) -> Result<Extrapolated, Error> {
    let coarse_mesh = mesh_strip(spec, opts.target_h, opts.grading)?;
    let fine_mesh = Arc::new(coarse_mesh.refine_uniform());
    let (coarse, _, _) = constants_on_mesh(spec, Arc::new(coarse_mesh), opts.cross_tol)?;
    let (fine, _, _) = constants_on_mesh(spec, fine_mesh, opts.cross_tol)?;
    Ok(Extrapolated {
        m1: richardson(coarse.m1, fine.m1),
        m_xi: richardson(coarse.m_xi, fine.m_xi),
        m2: richardson(coarse.m2, fine.m2),
        coarse,
        fine,
    })
}

/// Relative size of the truncation error predicted by the decay rate.
pub fn truncation_bound(half_length: f64, height: f64) -> f64 {
    exp(-2.0 * PI * half_length / height)
}

/// `m1` on the strip and on the same mesh lengthened to `2T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub m1: f64,
    pub m1_doubled: f64,
    pub change: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Doubles `T` by extending the mesh (see [`PeriodicMesh::extend_strip`]),
/// so the change in `m1` measures truncation alone.
pub fn doubling_check(spec: &StripSpec, mesh: &PeriodicMesh) -> Result<DoublingCheck, Error> {
    let area = spec.validated_polygon()?.area();
    let m1_of = |mesh: PeriodicMesh| -> Result<f64, Error> {
        let w = solve_w1(&Arc::new(mesh))?;
        Ok((w.energy + area) / (2.0 * spec.height))
    };
    let m1 = m1_of(mesh.clone())?;
    let m1_doubled = m1_of(mesh.extend_strip(spec.half_length)?)?;
    let change = fabs(m1_doubled - m1);
    let bound = 10.0 * fabs(m1) * truncation_bound(spec.half_length, spec.height);
    Ok(DoublingCheck { m1, m1_doubled, change, bound, ok: change <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HoleShape;
    use crate::mesh::mesh_rectangle_strip;
    use alloc::vec;

    fn disk() -> StripSpec {
        StripSpec::with_default_truncation(0.4, HoleShape::disk([0.0, 0.2], 0.08, 0.4))
    }

    #[test]
    fn reference_disk_consistency() {
        let spec = disk();
        let c = cell_constants(&spec, &StripOptions::for_hole(0.16)).unwrap();
        let d = &c.diagnostics;
        assert!(fabs(d.m1_energy - d.m1_farfield) <= 1e-9 * c.m1);
        assert!(fabs(d.m2_farfield - d.m2_boundary_integral) <= 1e-9 * c.m1);
        assert!(c.m1 >= c.area_omega / (2.0 * c.height));
        assert!(fabs(c.m2) <= 1e-2 * c.m1);
        assert!(c.m_xi > 0.0);
        assert!(d.decay_w1.ok, "{:?}", d.decay_w1);
        assert!(d.w2_trace_defect < 1e-4, "{}", d.w2_trace_defect);
    }

    #[test]
    fn doubling_t_changes_m1_below_bound() {
        let spec = disk();
        let mesh = mesh_strip(&spec, 0.01, 1.2).unwrap();
        let check = doubling_check(&spec, &mesh).unwrap();
        assert!(check.ok, "{check:?}");
    }

    #[test]
    fn no_hole_gives_zero_field() {
        let mesh = Arc::new(mesh_rectangle_strip(1.0, 0.4, 0.05).unwrap());
        let w = solve_w1(&mesh).unwrap();
        assert!(w.field.values.iter().all(|v| *v == 0.0));
        assert_eq!(w.energy, 0.0);
    }

    #[test]
    fn synthetic_decay_is_recovered() {
        let mesh = Arc::new(mesh_rectangle_strip(1.3, 0.4, 0.02).unwrap());
        let rate = -2.0 * PI / 0.4;
        let values = mesh
            .vertices
            .iter()
            .map(|p| exp(rate * fabs(p[0])) * libm::cos(2.0 * PI * p[1] / 0.4))
            .collect();
        let field = Field { mesh: mesh.clone(), values };
        let d = decay_check(&field, 1.3, 0.4).unwrap();
        // The side means are not exactly zero, which biases the far columns.
        assert!(fabs(d.rate_right / rate - 1.0) < 0.02, "{d:?}");
        let constant = Field { mesh: mesh.clone(), values: vec![2.5; mesh.num_vertices()] };
        let d = decay_check(&constant, 1.3, 0.4).unwrap();
        assert!(fabs(d.rate) < 1e-9 && !d.ok);
    }
}
