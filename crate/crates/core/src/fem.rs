//! P1 finite elements on a [`PeriodicMesh`]: the Bloch-shifted Hermitian
//! eigenproblem, the real Neumann problems of the boundary layer, and the
//! lowest-eigenpair solver.
//!
//! With `U = e^{i eta x1} V` the quasi-periodic problem becomes periodic in
//! `V` and the form `((d1 + i eta) V, (d1 + i eta) W) + (d2 V, d2 W)` has
//! matrix `K(eta) = S + eta^2 M + i eta C`, where
//! `C_ab = int(phi_b d1 phi_a - phi_a d1 phi_b)` is real antisymmetric.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use libm::sqrt;
use num_complex::Complex64;

use crate::dense::{generalized_eigen, hermitian_eigen, DenseMatrix, JacobiPhase};
use crate::error::{Error, FemError};
use crate::geometry::Point;
use crate::mesh::{BoundaryTag, PeriodicMesh, Periodicity};
use crate::scalar::{norm, Scalar};
use crate::sparse::{CsrMatrix, Ordering, Pattern, SparseCholesky};

/// Vertex to unknown numbering with slave vertices folded onto masters.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub vertex_to_dof: Vec<usize>,
    pub n_dofs: usize,
    /// Coordinates of each unknown's (master) vertex.
    pub coords: Vec<Point>,
}

impl DofMap {
    pub fn periodic(mesh: &PeriodicMesh) -> Result<Self, FemError> {
        let n = mesh.num_vertices();
        let mut master: Vec<usize> = (0..n).collect();
        let mut is_slave = vec![false; n];
        for &(m, s) in &mesh.periodic_pairs {
            if is_slave[m] {
                return Err(FemError::Assembly(format!("vertex {m} is both master and slave")));
            }
            master[s] = m;
            is_slave[s] = true;
        }
        let slave_tag = match mesh.periodicity {
            Periodicity::LeftRight => BoundaryTag::Right,
            Periodicity::BottomTop => BoundaryTag::Top,
        };
        for &([a, b], tag) in &mesh.boundary_edges {
            if tag == slave_tag {
                for v in [a, b] {
                    if !is_slave[v] {
                        return Err(FemError::Assembly(format!("unpaired trace vertex {v}")));
                    }
                }
            }
        }
        let mut vertex_to_dof = vec![usize::MAX; n];
        let mut coords = Vec::new();
        for v in 0..n {
            if !is_slave[v] {
                vertex_to_dof[v] = coords.len();
                coords.push(mesh.vertices[v]);
            }
        }
        for v in 0..n {
            if is_slave[v] {
                vertex_to_dof[v] = vertex_to_dof[master[v]];
            }
        }
        Ok(DofMap { vertex_to_dof, n_dofs: coords.len(), coords })
    }

    /// Nodal values on all mesh vertices.
    pub fn expand<T: Copy>(&self, dofs: &[T]) -> Vec<T> {
        self.vertex_to_dof.iter().map(|&d| dofs[d]).collect()
    }

    fn element(&self, tri: &[usize; 3]) -> [usize; 3] {
        tri.map(|v| self.vertex_to_dof[v])
    }
}

/// Area and the gradients of the three barycentric functions.
fn p1_element(p: [Point; 3]) -> (f64, [[f64; 2]; 3]) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det;
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det];
    }
    (area, g)
}

/// Stiffness, mass and drift matrices shared by every `eta`.
#[derive(Debug, Clone)]
pub struct BlochOperator {
    pub dofs: DofMap,
    pub stiffness: CsrMatrix<f64>,
    pub mass: CsrMatrix<f64>,
    pub drift: CsrMatrix<f64>,
    pub ordering: Ordering,
}

impl BlochOperator {
    pub fn new(mesh: &PeriodicMesh) -> Result<Self, FemError> {
        if mesh.periodicity != Periodicity::LeftRight || mesh.periodic_pairs.is_empty() {
            return Err(FemError::Assembly("Bloch assembly needs a left/right periodic mesh".into()));
        }
        let dofs = DofMap::periodic(mesh)?;
        let elems: Vec<[usize; 3]> = mesh.triangles.iter().map(|t| dofs.element(t)).collect();
        let pattern = Pattern::from_elements(dofs.n_dofs, elems.iter().map(|e| e.as_slice()));
        let mut stiffness = CsrMatrix::zeros(pattern.clone());
        let mut mass = CsrMatrix::zeros(pattern.clone());
        let mut drift = CsrMatrix::zeros(pattern.clone());
        for (tri, el) in mesh.triangles.iter().zip(&elems) {
            let (area, g) = p1_element(tri.map(|v| mesh.vertices[v]));
            if !(area > 0.0) {
                return Err(FemError::Assembly(format!("non-positive element area {area:e}")));
            }
            for a in 0..3 {
                for b in 0..3 {
                    stiffness.add(el[a], el[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                    mass.add(el[a], el[b], area / 12.0 * if a == b { 2.0 } else { 1.0 });
                    if a != b {
                        drift.add(el[a], el[b], area / 3.0 * (g[a][0] - g[b][0]));
                    }
                }
            }
        }
        let ordering = Ordering::nested_dissection(&pattern, &dofs.coords);
        Ok(BlochOperator { dofs, stiffness, mass, drift, ordering })
    }

    pub fn system(&self, eta: f64) -> BlochSystem {
        let values = self
            .stiffness
            .values
            .iter()
            .zip(&self.mass.values)
            .zip(&self.drift.values)
            .map(|((&s, &m), &c)| Complex64::new(s + eta * eta * m, eta * c))
            .collect();
        BlochSystem {
            eta,
            k: CsrMatrix { pattern: self.stiffness.pattern.clone(), values },
            m: self.mass.clone(),
            dof_map: self.dofs.vertex_to_dof.clone(),
            ordering: self.ordering.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlochSystem {
    pub eta: f64,
    pub k: CsrMatrix<Complex64>,
    pub m: CsrMatrix<f64>,
    /// Mesh vertex to unknown.
    pub dof_map: Vec<usize>,
    pub ordering: Ordering,
}

impl BlochSystem {
    pub fn pencil(&self) -> Pencil<'_, Complex64> {
        Pencil { k: &self.k, m: &self.m, ordering: &self.ordering }
    }

    pub fn n_dofs(&self) -> usize {
        self.m.n()
    }
}

pub fn assemble_bloch(mesh: &PeriodicMesh, eta: f64) -> Result<BlochSystem, Error> {
    Ok(BlochOperator::new(mesh)?.system(eta))
}

/// Boundary data of the real Neumann problems on the hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeumannData {
    /// `G = -nu_1`.
    MinusNu1,
    /// `G = -nu_2`.
    MinusNu2,
    /// Volume load `F = 1` with no boundary term; never compatible, kept to
    /// exercise the solvability check.
    UnitVolume,
}

/// Singular real system `K w = F` whose kernel is the constants.
#[derive(Debug, Clone)]
pub struct RealSystem {
    pub k: CsrMatrix<f64>,
    pub m: CsrMatrix<f64>,
    pub f: Vec<f64>,
    pub dofs: DofMap,
    pub ordering: Ordering,
}

/// Outward unit normal of the meshed domain on boundary edge `a -> b`
/// (the domain lies to the left).
pub fn edge_normal(a: Point, b: Point) -> (Point, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = sqrt(dx * dx + dy * dy);
    ([dy / len, -dx / len], len)
}

pub fn assemble_real_neumann(mesh: &PeriodicMesh, data: NeumannData) -> Result<RealSystem, Error> {
    let dofs = DofMap::periodic(mesh)?;
    let elems: Vec<[usize; 3]> = mesh.triangles.iter().map(|t| dofs.element(t)).collect();
    let pattern = Pattern::from_elements(dofs.n_dofs, elems.iter().map(|e| e.as_slice()));
    let mut k = CsrMatrix::zeros(pattern.clone());
    let mut m = CsrMatrix::zeros(pattern.clone());
    let mut f = vec![0.0; dofs.n_dofs];
    for (tri, el) in mesh.triangles.iter().zip(&elems) {
        let (area, g) = p1_element(tri.map(|v| mesh.vertices[v]));
        for a in 0..3 {
            for b in 0..3 {
                k.add(el[a], el[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                m.add(el[a], el[b], area / 12.0 * if a == b { 2.0 } else { 1.0 });
            }
            if data == NeumannData::UnitVolume {
                f[el[a]] += area / 3.0;
            }
        }
    }
    if data != NeumannData::UnitVolume {
        // Two-point Gauss rule per edge.
        let gauss = [0.5 - 0.5 / sqrt(3.0), 0.5 + 0.5 / sqrt(3.0)];
        for &([a, b], tag) in &mesh.boundary_edges {
            if !matches!(tag, BoundaryTag::Hole(_)) {
                continue;
            }
            let (nu, len) = edge_normal(mesh.vertices[a], mesh.vertices[b]);
            let g = match data {
                NeumannData::MinusNu1 => -nu[0],
                _ => -nu[1],
            };
            for s in gauss {
                f[dofs.vertex_to_dof[a]] += 0.5 * len * g * (1.0 - s);
                f[dofs.vertex_to_dof[b]] += 0.5 * len * g * s;
            }
        }
    }
    let total: f64 = f.iter().sum();
    let scale: f64 = f.iter().map(|v| v.abs()).sum();
    let limit = 1e-8 * scale.max(f64::MIN_POSITIVE);
    if total.abs() > limit {
        return Err(FemError::Solvability { defect: total.abs(), limit }.into());
    }
    let ordering = Ordering::nested_dissection(&pattern, &dofs.coords);
    Ok(RealSystem { k, m, f, dofs, ordering })
}

impl RealSystem {
    /// The solution with zero mean. The kernel is removed by pinning one
    /// unknown, after which the mean is subtracted.
    pub fn solve_zero_mean(&self) -> Result<Vec<f64>, FemError> {
        let n = self.k.n();
        let pin = self.ordering.perm[n - 1];
        let mut pinned = self.k.clone();
        for i in 0..n {
            for s in pinned.pattern.row_ptr[i]..pinned.pattern.row_ptr[i + 1] {
                let j = pinned.pattern.col_idx[s];
                if i == pin || j == pin {
                    pinned.values[s] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let chol = SparseCholesky::factor(&pinned, &self.ordering)?;
        let mut u = self.f.clone();
        u[pin] = 0.0;
        chol.solve_in_place(&mut u);
        let ones = vec![1.0; n];
        let m1 = self.m.mul_vec(&ones);
        let mean = m1.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / m1.iter().sum::<f64>();
        for v in u.iter_mut() {
            *v -= mean;
        }
        Ok(u)
    }

    pub fn pencil(&self) -> Pencil<'_, f64> {
        Pencil { k: &self.k, m: &self.m, ordering: &self.ordering }
    }
}

/// `K v = lambda M v` with `K` Hermitian and `M` real symmetric positive definite.
#[derive(Debug, Clone, Copy)]
pub struct Pencil<'a, T> {
    pub k: &'a CsrMatrix<T>,
    pub m: &'a CsrMatrix<f64>,
    pub ordering: &'a Ordering,
}

/// `y = M x` for a real `M` and any scalar `x`.
pub fn apply_real<T: Scalar>(m: &CsrMatrix<f64>, x: &[T]) -> Vec<T> {
    (0..m.n())
        .map(|i| {
            let mut acc = T::ZERO;
            for s in m.pattern.row_ptr[i]..m.pattern.row_ptr[i + 1] {
                acc += x[m.pattern.col_idx[s]].scale(m.values[s]);
            }
            acc
        })
        .collect()
}

fn inner<T: Scalar>(x: &[T], y: &[T]) -> T {
    crate::scalar::dot(x, y)
}

impl<T: Scalar + JacobiPhase> Pencil<'_, T> {
    pub fn n(&self) -> usize {
        self.m.n()
    }

    /// `K + M`, positive definite for the pencils at hand.
    pub fn shifted(&self) -> CsrMatrix<T> {
        CsrMatrix {
            pattern: self.k.pattern.clone(),
            values: self.k.values.iter().zip(&self.m.values).map(|(&k, &m)| k + T::from_real(m)).collect(),
        }
    }

    /// `||K v - lambda M v|| / ((1 + |lambda|) ||M v||)`.
    pub fn residual(&self, lambda: f64, v: &[T]) -> f64 {
        let kv = self.k.mul_vec(v);
        let mv = apply_real(self.m, v);
        let r: Vec<T> = kv.iter().zip(&mv).map(|(&a, &b)| a - b.scale(lambda)).collect();
        norm(&r) / ((1.0 + lambda.abs()) * norm(&mv))
    }
}

/// Eigensolver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target, see [`Pencil::residual`].
    pub tol: f64,
    pub max_iter: usize,
    /// Largest system the dense path accepts.
    pub dense_ceiling: usize,
    /// Allow the sparse subspace iteration.
    pub iterative: bool,
    /// Below this size the dense path is used even when iterative mode is on.
    pub dense_preferred: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 300, dense_ceiling: 4000, iterative: true, dense_preferred: 300 }
    }
}

/// Lowest eigenpairs, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSeq<T> {
    pub values: Vec<f64>,
    /// `M`-orthonormal coefficient vectors over the unknowns.
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Accepted on a residual plateau above `tol` (see [`solve_pencil`]).
    pub stalled: bool,
}

const STALL_WINDOW: usize = 8;

pub fn solve_lowest(system: &BlochSystem, count: usize, opts: &SolverOptions) -> Result<EigenSeq<Complex64>, FemError> {
    solve_pencil(&system.pencil(), count, opts, None)
}

/// Lowest `count` eigenpairs of the pencil. `start` seeds the iterative
/// path (e.g. vectors from a neighbouring `eta`). The iterative path stops
/// at `tol`, or on a rounding plateau below `sqrt(tol)` where the residual
/// stops halving over several iterations.
pub fn solve_pencil<T: Scalar + JacobiPhase>(
    pencil: &Pencil<'_, T>,
    count: usize,
    opts: &SolverOptions,
    start: Option<&[Vec<T>]>,
) -> Result<EigenSeq<T>, FemError> {
    let n = pencil.n();
    if count == 0 || count > n {
        return Err(FemError::TooManyEigenpairs { requested: count, dofs: n });
    }
    let guard = (count / 2).max(4);
    let p = count + guard;
    if n <= opts.dense_preferred || (!opts.iterative && n <= opts.dense_ceiling) || 3 * p >= n {
        if n > opts.dense_ceiling {
            return Err(FemError::Capacity { dofs: n, ceiling: opts.dense_ceiling });
        }
        return solve_dense(pencil, count);
    }
    if !opts.iterative {
        return Err(FemError::Capacity { dofs: n, ceiling: opts.dense_ceiling });
    }
    solve_subspace(pencil, count, p, opts, start)
}

fn solve_dense<T: Scalar + JacobiPhase>(pencil: &Pencil<'_, T>, count: usize) -> Result<EigenSeq<T>, FemError> {
    let n = pencil.n();
    let k = pencil.k.to_dense();
    let m = DenseMatrix::from_fn(n, n, |i, j| T::from_real(pencil.m.get(i, j)));
    let (vals, vecs) = generalized_eigen(&k, &m)?;
    let mut out = EigenSeq { values: Vec::new(), vectors: Vec::new(), residuals: Vec::new(), iterations: 0, stalled: false };
    for j in 0..count {
        let v = vecs.column(j);
        out.residuals.push(pencil.residual(vals[j], &v));
        out.values.push(vals[j]);
        out.vectors.push(v);
    }
    Ok(out)
}

/// Deterministic pseudo-random start block.
fn start_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x2545_F491_4F6C_DD1D);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            T::from_real((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect()
}

/// Appends `v` to the `M`-orthonormal set `(q, mq)` unless it is dependent.
fn push_orthonormal<T: Scalar>(m: &CsrMatrix<f64>, q: &mut Vec<Vec<T>>, mq: &mut Vec<Vec<T>>, mut v: Vec<T>) {
    let mut mv = apply_real(m, &v);
    let norm0 = sqrt(inner(&v, &mv).re().max(0.0));
    if !(norm0 > 0.0) {
        return;
    }
    for _pass in 0..2 {
        for (qi, mqi) in q.iter().zip(mq.iter()) {
            let c = inner(mqi, &v);
            for (a, &b) in v.iter_mut().zip(qi) {
                *a -= c * b;
            }
        }
        mv = apply_real(m, &v);
    }
    let nv = sqrt(inner(&v, &mv).re().max(0.0));
    if nv <= 1e-10 * norm0 {
        return;
    }
    let s = 1.0 / nv;
    q.push(v.into_iter().map(|x| x.scale(s)).collect());
    mq.push(mv.into_iter().map(|x| x.scale(s)).collect());
}

fn solve_subspace<T: Scalar + JacobiPhase>(
    pencil: &Pencil<'_, T>,
    count: usize,
    p: usize,
    opts: &SolverOptions,
    start: Option<&[Vec<T>]>,
) -> Result<EigenSeq<T>, FemError> {
    let n = pencil.n();
    let chol = SparseCholesky::factor(&pencil.shifted(), pencil.ordering)?;
    let mut x: Vec<Vec<T>> = Vec::with_capacity(p);
    if let Some(s) = start {
        x.extend(s.iter().take(p).cloned());
    }
    let mut seed = 0;
    while x.len() < p {
        x.push(start_vector(n, seed));
        seed += 1;
    }
    let mut worst = f64::INFINITY;
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        // Krylov block [X, A X, A^2 X] with A = (K + M)^{-1} M.
        let mut block = x.clone();
        let mut prev = x.clone();
        for _depth in 0..2 {
            let next: Vec<Vec<T>> = prev
                .iter()
                .map(|v| {
                    let mut w = apply_real(pencil.m, v);
                    chol.solve_in_place(&mut w);
                    w
                })
                .collect();
            block.extend(next.iter().cloned());
            prev = next;
        }
        let mut q = Vec::new();
        let mut mq = Vec::new();
        for v in block {
            push_orthonormal(pencil.m, &mut q, &mut mq, v);
        }
        let dim = q.len();
        if dim < count {
            return Err(FemError::Solver { residual: f64::INFINITY, iterations: it });
        }
        let kq: Vec<Vec<T>> = q.iter().map(|v| pencil.k.mul_vec(v)).collect();
        let mut small = DenseMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = inner(&q[i], &kq[j]);
                small[(i, j)] = v;
                small[(j, i)] = v.conj();
            }
        }
        let (theta, y) = hermitian_eigen(&small);
        let keep = p.min(dim);
        let mut ritz = Vec::with_capacity(keep);
        let mut kritz = Vec::with_capacity(keep);
        for j in 0..keep {
            let mut v = vec![T::ZERO; n];
            let mut kv = vec![T::ZERO; n];
            for i in 0..dim {
                let c = y[(i, j)];
                for r in 0..n {
                    v[r] += q[i][r] * c;
                    kv[r] += kq[i][r] * c;
                }
            }
            ritz.push(v);
            kritz.push(kv);
        }
        let mut residuals = Vec::with_capacity(count);
        for j in 0..count {
            let mv = apply_real(pencil.m, &ritz[j]);
            let r: Vec<T> = kritz[j].iter().zip(&mv).map(|(&a, &b)| a - b.scale(theta[j])).collect();
            residuals.push(norm(&r) / ((1.0 + theta[j].abs()) * norm(&mv)));
        }
        worst = residuals.iter().copied().fold(0.0, f64::max);
        // Solves with K + M limit the attainable residual to roughly
        // cond(K + M) times the unit roundoff; a plateau well below
        // sqrt(tol) already pins the eigenvalues (their error is quadratic
        // in the residual).
        history.push(worst);
        let stalled = history.len() > STALL_WINDOW
            && worst > 0.5 * history[history.len() - 1 - STALL_WINDOW]
            && worst <= sqrt(opts.tol);
        if worst <= opts.tol || stalled {
            ritz.truncate(count);
            return Ok(EigenSeq {
                values: theta[..count].to_vec(),
                vectors: ritz,
                residuals,
                iterations: it,
                stalled: worst > opts.tol,
            });
        }
        x = ritz;
    }
    Err(FemError::Solver { residual: worst, iterations: opts.max_iter })
}

/// Certified enclosure for the pencil: with `G = K + M`, `B = G^{-1} M`,
/// returns `delta = ||B u - mu u||_G / ||u||_G`. Some eigenvalue
/// `mu_p = 1 / (1 + lambda_p)` of `B` satisfies `|mu_p - mu| <= delta`.
pub struct Certifier<T> {
    chol: SparseCholesky<T>,
    g: CsrMatrix<T>,
    m: CsrMatrix<f64>,
}

impl<T: Scalar + JacobiPhase> Certifier<T> {
    pub fn new(pencil: &Pencil<'_, T>) -> Result<Self, FemError> {
        let g = pencil.shifted();
        Ok(Certifier { chol: SparseCholesky::factor(&g, pencil.ordering)?, g, m: pencil.m.clone() })
    }

    fn g_norm2(&self, u: &[T]) -> f64 {
        inner(u, &self.g.mul_vec(u)).re()
    }

    /// Rayleigh quotient of `B` in the `G` inner product.
    pub fn rayleigh(&self, u: &[T]) -> Result<f64, FemError> {
        let g = self.g_norm2(u);
        if !(g > 0.0) {
            return Err(FemError::ZeroTrial);
        }
        Ok(inner(u, &apply_real(&self.m, u)).re() / g)
    }

    pub fn radius(&self, u: &[T], mu: f64) -> Result<f64, FemError> {
        let gu = self.g_norm2(u);
        if !(gu > 0.0) {
            return Err(FemError::ZeroTrial);
        }
        let mut bu = apply_real(&self.m, u);
        self.chol.solve_in_place(&mut bu);
        let d: Vec<T> = bu.iter().zip(u).map(|(&b, &x)| b - x.scale(mu)).collect();
        Ok(sqrt(self.g_norm2(&d).max(0.0) / gu))
    }
}

pub fn residual_certificate(system: &BlochSystem, trial: &[Complex64], mu_trial: f64) -> Result<f64, FemError> {
    if trial.iter().all(|z| z.abs2() == 0.0) {
        return Err(FemError::ZeroTrial);
    }
    Certifier::new(&system.pencil())?.radius(trial, mu_trial)
}

/// Coordinate text dump, one `i j re im` line per stored entry.
pub fn dump_coo<T: Scalar>(a: &CsrMatrix<T>) -> String {
    let mut s = String::new();
    for i in 0..a.n() {
        for k in a.pattern.row_ptr[i]..a.pattern.row_ptr[i + 1] {
            let v = a.values[k];
            let _ = writeln!(s, "{} {} {:e} {:e}", i, a.pattern.col_idx[k], v.re(), v.im());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CellSpec;
    use crate::mesh::mesh_cell;
    use core::f64::consts::PI;

    fn unperforated(h: f64) -> PeriodicMesh {
        mesh_cell(&CellSpec::unperforated(0.4), h).unwrap()
    }

    #[test]
    fn constants_in_kernel_at_zero() {
        let sys = assemble_bloch(&unperforated(0.05), 0.0).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); sys.n_dofs()];
        let k1 = sys.k.mul_vec(&ones);
        assert!(norm(&k1) < 1e-12);
    }

    #[test]
    fn hermitian_and_conjugate_symmetric() {
        let op = BlochOperator::new(&unperforated(0.05)).unwrap();
        let (a, b) = (op.system(1.3), op.system(-1.3));
        assert!(a.k.hermitian_defect() < 1e-12);
        for (x, y) in a.k.values.iter().zip(&b.k.values) {
            assert_eq!(*x, y.conj());
        }
        assert!(op.mass.hermitian_defect() < 1e-15);
    }

    #[test]
    fn one_by_one_identity() {
        let p = Pattern::from_elements(1, core::iter::once(&[0usize][..]));
        let mut k = CsrMatrix::zeros(p.clone());
        k.add(0, 0, 2.0);
        let mut m = CsrMatrix::zeros(p);
        m.add(0, 0, 1.0);
        let ord = Ordering::identity(1);
        let seq = solve_pencil(&Pencil { k: &k, m: &m, ordering: &ord }, 1, &SolverOptions::default(), None).unwrap();
        assert!((seq.values[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn subspace_matches_dense() {
        let sys = assemble_bloch(&unperforated(0.07), 0.7).unwrap();
        let dense = solve_dense(&sys.pencil(), 6).unwrap();
        let opts = SolverOptions { dense_preferred: 10, ..Default::default() };
        let it = solve_pencil(&sys.pencil(), 6, &opts, None).unwrap();
        for (a, b) in dense.values.iter().zip(&it.values) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} {b}");
        }
        assert!(it.residuals.iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn double_point_at_pi() {
        let mesh = unperforated(0.01);
        let sys = assemble_bloch(&mesh, PI).unwrap();
        let seq = solve_lowest(&sys, 2, &SolverOptions::default()).unwrap();
        let target = PI * PI;
        for v in &seq.values {
            assert!((v - target).abs() / target < 1e-3, "{v}");
        }
    }

    #[test]
    fn compatibility_of_hole_data() {
        let spec = crate::geometry::StripSpec::with_default_truncation(
            0.4,
            crate::geometry::HoleShape::disk([0.0, 0.2], 0.08, 0.4),
        );
        let mesh = crate::mesh::mesh_strip(&spec, 0.015, 1.3).unwrap();
        for d in [NeumannData::MinusNu1, NeumannData::MinusNu2] {
            let sys = assemble_real_neumann(&mesh, d).unwrap();
            assert!(sys.f.iter().sum::<f64>().abs() < 1e-14);
        }
        assert!(matches!(
            assemble_real_neumann(&mesh, NeumannData::UnitVolume),
            Err(Error::Fem(FemError::Solvability { .. }))
        ));
    }

    #[test]
    fn certificate_of_eigenvector_is_tiny() {
        let sys = assemble_bloch(&unperforated(0.1 * 0.99), 0.4).unwrap();
        let seq = solve_dense(&sys.pencil(), 3).unwrap();
        let cert = Certifier::new(&sys.pencil()).unwrap();
        for (lam, v) in seq.values.iter().zip(&seq.vectors) {
            let mu = 1.0 / (1.0 + lam);
            assert!(cert.radius(v, mu).unwrap() < 1e-12);
        }
        assert!(matches!(
            residual_certificate(&sys, &vec![Complex64::new(0.0, 0.0); sys.n_dofs()], 0.5),
            Err(FemError::ZeroTrial)
        ));
    }
}
