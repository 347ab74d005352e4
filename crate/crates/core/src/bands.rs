//! Dispersion sweeps over `eta in [-pi, pi]`, band/gap extraction and the
//! comparison of computed bands with the first-order corrections.
//!
//! Every grid point is an independent task (coarse mesh, and its uniform
//! refinement when Richardson extrapolation is on). [`sweep`] runs them in
//! order; a parallel driver can call [`SweepContext::solve_at`] from a pool
//! and hand the columns back in plan order to [`SweepContext::assemble`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::fabs;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{correction_node, GapPredictions, NodeId};
use crate::cell_constants::CellConstants;
use crate::error::Error;
use crate::fem::{solve_pencil, BlochOperator, SolverOptions};
use crate::geometry::CellSpec;
use crate::limit::{find_nodes, limit_eigenvalues};
use crate::mesh::{mesh_cell, mesh_cell_graded, PeriodicMesh, Sizing};
use crate::PI;

/// Mesh resolution for the cell. Far from the holes the size is `target_h`;
/// near them it is `eps * diam / near_divisions`, growing by `grading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub target_h: f64,
    pub near_divisions: f64,
    pub grading: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { target_h: 0.025, near_divisions: 16.0, grading: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Points of the uniform grid, both endpoints included.
    pub eta_samples: usize,
    pub bands: usize,
    /// Half width of the node windows in the fast variable `psi`.
    pub psi_max: f64,
    pub window_samples: usize,
    /// Windows are placed at nodes with `lambda* <= node_lambda_max`;
    /// `None` means the top of the highest requested limit band.
    pub node_lambda_max: Option<f64>,
    pub mesh: MeshOptions,
    /// Solve on `h` and `h/2` and extrapolate.
    pub richardson: bool,
    pub solver: SolverOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            eta_samples: 33,
            bands: 4,
            psi_max: 8.0,
            window_samples: 17,
            node_lambda_max: None,
            mesh: MeshOptions::default(),
            richardson: true,
            // Eigenvalue errors from a 1e-8 residual are far below the
            // discretisation error, and tighter targets mostly hit the
            // rounding plateau.
            solver: SolverOptions { tol: 1e-8, ..SolverOptions::default() },
        }
    }
}

/// Refinement cluster `eta = eta* + eps psi` around one node. `indices`
/// point into the dataset grid, one per `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeWindow {
    pub eta_star: f64,
    pub lambda_star: Vec<f64>,
    pub psi: Vec<f64>,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshInfo {
    pub h: f64,
    pub h_near: f64,
    pub vertices: usize,
    pub dofs: usize,
    pub fine_dofs: Option<usize>,
    pub min_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionDataset {
    /// `None` for the unperforated cell.
    pub epsilon: Option<f64>,
    pub height: f64,
    pub bands: usize,
    pub eta_grid: Vec<f64>,
    /// Whether the grid point belongs to the uniform grid (as opposed to a
    /// node window only).
    pub uniform: Vec<bool>,
    /// Per grid point, the lowest `bands` eigenvalues ascending
    /// (extrapolated when Richardson is on).
    pub values: Vec<Vec<f64>>,
    pub coarse: Vec<Vec<f64>>,
    pub fine: Option<Vec<Vec<f64>>>,
    /// `|fine - coarse| / 3`, zero without Richardson.
    pub error_estimate: Vec<Vec<f64>>,
    pub max_residual: f64,
    pub stalled_solves: usize,
    pub windows: Vec<NodeWindow>,
    pub mesh: MeshInfo,
    pub warnings: Vec<String>,
}

impl DispersionDataset {
    pub fn band(&self, p: usize) -> Vec<f64> {
        self.values.iter().map(|c| c[p - 1]).collect()
    }

    pub fn window_at(&self, eta_star: f64) -> Option<&NodeWindow> {
        self.windows
            .iter()
            .find(|w| fabs(w.eta_star - eta_star) < 1e-12)
            .or_else(|| self.windows.iter().find(|w| fabs(fabs(w.eta_star) - PI) < 1e-12 && fabs(fabs(eta_star) - PI) < 1e-12))
    }
}

/// One solved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub coarse: Vec<f64>,
    pub fine: Option<Vec<f64>>,
    pub residual: f64,
    pub stalled: usize,
}

/// Fold into `[-pi, pi]`.
pub fn wrap_eta(eta: f64) -> f64 {
    let mut e = eta;
    while e > PI {
        e -= 2.0 * PI;
    }
    while e < -PI {
        e += 2.0 * PI;
    }
    e
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { PI } else { -PI + 2.0 * PI * i as f64 / (n - 1) as f64 }).collect()
}

const SAME_ETA: f64 = 1e-12;

/// The merged grid, its uniform flags and the windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub eta: Vec<f64>,
    pub uniform: Vec<bool>,
    pub windows: Vec<NodeWindow>,
    pub warnings: Vec<String>,
}

pub fn plan(spec: &CellSpec, opts: &SweepOptions) -> Result<SweepPlan, Error> {
    if opts.eta_samples < 9 {
        return Err(Error::InvalidInput(format!("eta_samples = {} must be at least 9", opts.eta_samples)));
    }
    if opts.bands == 0 {
        return Err(Error::InvalidInput("bands must be at least 1".into()));
    }
    let grid = uniform_grid(opts.eta_samples);
    let mut points: Vec<(f64, bool)> = grid.iter().map(|&e| (e, true)).collect();
    let mut raw_windows: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut warnings = Vec::new();
    if spec.hole.is_some() && opts.window_samples > 0 {
        if opts.window_samples < 3 || !(opts.psi_max > 0.0) {
            return Err(Error::InvalidInput("node windows need psi_max > 0 and at least 3 samples".into()));
        }
        let eps = spec.epsilon();
        let lambda_max = match opts.node_lambda_max {
            Some(l) => l,
            None => {
                let mut top: f64 = 0.0;
                for &e in &grid {
                    top = top.max(limit_eigenvalues(spec.height, e, opts.bands)?[opts.bands - 1].value);
                }
                top
            }
        };
        let nodes = find_nodes(spec.height, lambda_max)?;
        warnings.extend(nodes.warnings);
        let psi: Vec<f64> = (0..opts.window_samples)
            .map(|k| -opts.psi_max + 2.0 * opts.psi_max * k as f64 / (opts.window_samples - 1) as f64)
            .collect();
        for node in &nodes.nodes {
            match raw_windows.iter_mut().find(|w| fabs(w.0 - node.eta_star) < SAME_ETA) {
                Some(w) => {
                    if !w.1.iter().any(|&l| fabs(l - node.lambda_star) < 1e-9) {
                        w.1.push(node.lambda_star);
                    }
                }
                None => {
                    let etas: Vec<f64> = psi.iter().map(|&s| wrap_eta(node.eta_star + eps * s)).collect();
                    points.extend(etas.iter().map(|&e| (e, false)));
                    raw_windows.push((node.eta_star, alloc::vec![node.lambda_star], etas));
                }
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut eta: Vec<f64> = Vec::with_capacity(points.len());
    let mut uniform: Vec<bool> = Vec::with_capacity(points.len());
    for (e, u) in points {
        match eta.last() {
            Some(&last) if fabs(e - last) < SAME_ETA => {
                let i = eta.len() - 1;
                // Keep the uniform grid's own value.
                if u && !uniform[i] {
                    eta[i] = e;
                }
                uniform[i] |= u;
            }
            _ => {
                eta.push(e);
                uniform.push(u);
            }
        }
    }
    let locate = |e: f64| -> usize {
        let i = eta.partition_point(|&x| x < e - SAME_ETA);
        debug_assert!(fabs(eta[i] - e) < SAME_ETA);
        i
    };
    let psi: Vec<f64> = (0..opts.window_samples)
        .map(|k| -opts.psi_max + 2.0 * opts.psi_max * k as f64 / (opts.window_samples.max(2) - 1) as f64)
        .collect();
    let windows = raw_windows
        .into_iter()
        .map(|(eta_star, lambda_star, etas)| NodeWindow {
            eta_star,
            lambda_star,
            psi: psi.clone(),
            indices: etas.iter().map(|&e| locate(e)).collect(),
        })
        .collect();
    Ok(SweepPlan { eta, uniform, windows, warnings })
}

/// Mesh of the cell for the given options.
pub fn sweep_mesh(spec: &CellSpec, mesh: &MeshOptions) -> Result<(PeriodicMesh, f64), Error> {
    match &spec.hole {
        None => Ok((mesh_cell(spec, mesh.target_h)?, mesh.target_h)),
        Some(hole) => {
            let h_near = (spec.epsilon() * hole.diameter() / mesh.near_divisions).min(mesh.target_h);
            let sizing = Sizing { h_near, h_far: mesh.target_h, grading: mesh.grading };
            Ok((mesh_cell_graded(spec, sizing)?, h_near))
        }
    }
}

/// Operators shared by all grid points.
pub struct SweepContext {
    pub spec: CellSpec,
    pub opts: SweepOptions,
    pub plan: SweepPlan,
    pub mesh_info: MeshInfo,
    coarse: BlochOperator,
    fine: Option<BlochOperator>,
}

impl SweepContext {
    pub fn new(spec: &CellSpec, opts: &SweepOptions) -> Result<Self, Error> {
        let plan = plan(spec, opts)?;
        let (mesh, h_near) = sweep_mesh(spec, &opts.mesh)?;
        let coarse = BlochOperator::new(&mesh)?;
        let fine = if opts.richardson { Some(BlochOperator::new(&mesh.refine_uniform())?) } else { None };
        for op in core::iter::once(&coarse).chain(fine.iter()) {
            if opts.bands > op.dofs.n_dofs {
                return Err(Error::InvalidInput(format!("{} bands requested from {} unknowns", opts.bands, op.dofs.n_dofs)));
            }
        }
        let mesh_info = MeshInfo {
            h: mesh.h,
            h_near,
            vertices: mesh.num_vertices(),
            dofs: coarse.dofs.n_dofs,
            fine_dofs: fine.as_ref().map(|f| f.dofs.n_dofs),
            min_angle_deg: mesh.quality,
        };
        Ok(SweepContext { spec: spec.clone(), opts: opts.clone(), plan, mesh_info, coarse, fine })
    }

    pub fn len(&self) -> usize {
        self.plan.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.eta.is_empty()
    }

    /// Solve grid point `i`.
    pub fn solve_at(&self, i: usize) -> Result<Column, Error> {
        let eta = self.plan.eta[i];
        let at = |source| Error::AtEta { eta, source };
        let mut residual: f64 = 0.0;
        let mut stalled = 0;
        let mut run = |op: &BlochOperator| -> Result<Vec<f64>, Error> {
            let system = op.system(eta);
            let seq = solve_pencil(&system.pencil(), self.opts.bands, &self.opts.solver, None).map_err(at)?;
            residual = seq.residuals.iter().fold(residual, |a, &r| a.max(r));
            stalled += seq.stalled as usize;
            Ok(seq.values)
        };
        let coarse = run(&self.coarse)?;
        let fine = match &self.fine {
            Some(op) => Some(run(op)?),
            None => None,
        };
        Ok(Column { coarse, fine, residual, stalled })
    }

    /// Build the dataset from columns given in grid order.
    pub fn assemble(&self, columns: Vec<Column>) -> DispersionDataset {
        assert_eq!(columns.len(), self.len(), "one column per grid point");
        let mut values = Vec::with_capacity(columns.len());
        let mut error_estimate = Vec::with_capacity(columns.len());
        let mut coarse = Vec::with_capacity(columns.len());
        let mut fine: Option<Vec<Vec<f64>>> = self.fine.as_ref().map(|_| Vec::new());
        let mut max_residual: f64 = 0.0;
        let mut stalled_solves = 0;
        for c in columns {
            max_residual = max_residual.max(c.residual);
            stalled_solves += c.stalled;
            match &c.fine {
                Some(f) => {
                    values.push(c.coarse.iter().zip(f).map(|(&a, &b)| (4.0 * b - a) / 3.0).collect());
                    error_estimate.push(c.coarse.iter().zip(f).map(|(&a, &b)| fabs(b - a) / 3.0).collect());
                }
                None => {
                    values.push(c.coarse.clone());
                    error_estimate.push(alloc::vec![0.0; c.coarse.len()]);
                }
            }
            if let (Some(all), Some(f)) = (fine.as_mut(), c.fine) {
                all.push(f);
            }
            coarse.push(c.coarse);
        }
        DispersionDataset {
            epsilon: self.spec.hole.as_ref().map(|_| self.spec.epsilon()),
            height: self.spec.height,
            bands: self.opts.bands,
            eta_grid: self.plan.eta.clone(),
            uniform: self.plan.uniform.clone(),
            values,
            coarse,
            fine,
            error_estimate,
            max_residual,
            stalled_solves,
            windows: self.plan.windows.clone(),
            mesh: self.mesh_info.clone(),
            warnings: self.plan.warnings.clone(),
        }
    }
}

/// Sequential sweep.
pub fn sweep(spec: &CellSpec, opts: &SweepOptions) -> Result<DispersionDataset, Error> {
    let ctx = SweepContext::new(spec, opts)?;
    let columns = (0..ctx.len()).map(|i| ctx.solve_at(i)).collect::<Result<Vec<_>, _>>()?;
    Ok(ctx.assemble(columns))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub p: usize,
    pub lo: f64,
    pub hi: f64,
    pub argmin: f64,
    pub argmax: f64,
    /// How far the parabolic refinement moved each extremum from the best
    /// sample.
    pub lo_refinement: f64,
    pub hi_refinement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub p: usize,
    pub lower: f64,
    pub upper: f64,
    /// `upper - lower`; negative when the bands overlap.
    pub width: f64,
    pub open: bool,
    pub tolerance: f64,
}

/// Smallest tolerance used when no discretisation error estimate exists.
pub fn tolerance_floor(value: f64) -> f64 {
    1e-6 * (1.0 + fabs(value))
}

/// Extremum of a sampled periodic curve with a parabola through the best
/// sample and its two neighbours. Returns `(eta, value, shift)`.
fn refine_extremum(eta: &[f64], y: &[f64], i: usize, maximum: bool) -> (f64, f64, f64) {
    let n = eta.len();
    let periodic = n > 2 && fabs(eta[0] + PI) < SAME_ETA && fabs(eta[n - 1] - PI) < SAME_ETA;
    let (prev, next) = if i == 0 {
        if !periodic {
            return (eta[i], y[i], 0.0);
        }
        ((eta[n - 2] - 2.0 * PI, y[n - 2]), (eta[1], y[1]))
    } else if i == n - 1 {
        if !periodic {
            return (eta[i], y[i], 0.0);
        }
        ((eta[n - 2], y[n - 2]), (eta[1] + 2.0 * PI, y[1]))
    } else {
        ((eta[i - 1], y[i - 1]), (eta[i + 1], y[i + 1]))
    };
    let (x0, y0) = prev;
    let (x1, y1) = (eta[i], y[i]);
    let (x2, y2) = next;
    let f01 = (y1 - y0) / (x1 - x0);
    let f12 = (y2 - y1) / (x2 - x1);
    let a = (f12 - f01) / (x2 - x0);
    let curved = if maximum { a < 0.0 } else { a > 0.0 };
    if !curved {
        return (x1, y1, 0.0);
    }
    let xs = 0.5 * (x0 + x1) - f01 / (2.0 * a);
    if !(xs >= x0 && xs <= x2) {
        return (x1, y1, 0.0);
    }
    let ys = y0 + f01 * (xs - x0) + a * (xs - x0) * (xs - x1);
    let better = if maximum { ys >= y1 } else { ys <= y1 };
    if !better {
        return (x1, y1, 0.0);
    }
    (wrap_eta(xs), ys, fabs(ys - y1))
}

/// Bands `1..=count` and the gaps between consecutive ones.
pub fn extract_bands_gaps(ds: &DispersionDataset, count: usize) -> Result<(Vec<Band>, Vec<Gap>), Error> {
    if count == 0 || count > ds.bands {
        return Err(Error::InvalidInput(format!("{count} bands requested from a dataset with {}", ds.bands)));
    }
    let mut bands = Vec::with_capacity(count);
    for p in 1..=count {
        let y = ds.band(p);
        let mut imin = 0;
        let mut imax = 0;
        for i in 1..y.len() {
            if y[i] < y[imin] {
                imin = i;
            }
            if y[i] > y[imax] {
                imax = i;
            }
        }
        let (argmin, lo, lo_refinement) = refine_extremum(&ds.eta_grid, &y, imin, false);
        let (argmax, hi, hi_refinement) = refine_extremum(&ds.eta_grid, &y, imax, true);
        bands.push(Band { p, lo, hi, argmin, argmax, lo_refinement, hi_refinement });
    }
    let mut gaps = Vec::with_capacity(count.saturating_sub(1));
    for p in 1..count {
        let (below, above) = (&bands[p - 1], &bands[p]);
        let err_at = |band: usize, eta: f64| -> f64 {
            let i = nearest_index(&ds.eta_grid, eta);
            ds.error_estimate[i][band - 1]
        };
        let est = err_at(p, below.argmax).max(err_at(p + 1, above.argmin));
        let tolerance = (3.0 * est).max(tolerance_floor(below.hi.max(above.lo)));
        let width = above.lo - below.hi;
        gaps.push(Gap { p, lower: below.hi, upper: above.lo, width, open: width > tolerance, tolerance });
    }
    Ok((bands, gaps))
}

fn nearest_index(grid: &[f64], eta: f64) -> usize {
    let mut best = 0;
    for (i, &e) in grid.iter().enumerate() {
        if fabs(e - eta) < fabs(grid[best] - eta) {
            best = i;
        }
    }
    best
}

/// Residuals of one band pair in a node window against
/// `node + eps * Lambda'_-(psi)` and `node + eps * Lambda'_+(psi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeComparison {
    pub node_id: NodeId,
    pub eta_star: f64,
    pub lambda_star: f64,
    /// 1-based band indices following the lower and upper branch.
    pub band_minus: usize,
    pub band_plus: usize,
    pub psi: Vec<f64>,
    pub computed_minus: Vec<f64>,
    pub computed_plus: Vec<f64>,
    pub predicted_minus: Vec<f64>,
    pub predicted_plus: Vec<f64>,
    pub residual_minus: Vec<f64>,
    pub residual_plus: Vec<f64>,
    /// `max |r| / eps^2` over the window.
    pub fit_c: f64,
}

impl NodeComparison {
    /// `max |r| / eps^2` restricted to the listed `psi` (absent values are
    /// ignored). `None` if none of them is in the window.
    pub fn fit_c_on(&self, psi: &[f64], epsilon: f64) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (k, &s) in self.psi.iter().enumerate() {
            if psi.iter().any(|&q| fabs(q - s) < 1e-9) {
                let r = fabs(self.residual_minus[k]).max(fabs(self.residual_plus[k]));
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
        worst.map(|w| w / (epsilon * epsilon))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub p: u32,
    pub measured_lower: f64,
    pub measured_upper: f64,
    pub measured_width: f64,
    pub measured_slope: f64,
    pub predicted_lower: f64,
    pub predicted_upper: f64,
    pub predicted_slope: f64,
    /// `measured_slope / predicted_slope - 1`.
    pub relative_deviation: f64,
    pub open: bool,
}

/// One computed eigenvalue against the nearest limit branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwayPoint {
    pub eta: f64,
    pub p: usize,
    pub value: f64,
    /// `(j, k)` of the nearest branch.
    pub branch: (i32, u32),
    pub residual: f64,
    /// Other branches within `2 C0 eps` of the nearest one, with residuals.
    pub also: Vec<((i32, u32), f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwayComparison {
    /// Per band, `max |Lambda - Lambda0| / eps` over the uniform grid.
    pub per_band_ratio: Vec<f64>,
    /// Per band, the maximal nearest-branch distance itself.
    pub per_band_max: Vec<f64>,
    pub c0: f64,
    pub ambiguous: usize,
    pub points: Vec<AwayPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub epsilon: f64,
    pub height: f64,
    pub nodes: Vec<NodeComparison>,
    pub gaps: Vec<GapComparison>,
    pub away: AwayComparison,
    pub notes: Vec<String>,
}

/// Compare a perforated dataset with the node corrections, the gap
/// predictions and the unperturbed branches.
pub fn compare_asymptotics(
    ds: &DispersionDataset,
    cc: &CellConstants,
    predictions: &GapPredictions,
) -> Result<ComparisonReport, Error> {
    let eps = ds.epsilon.ok_or_else(|| Error::Comparison("dataset is unperforated".into()))?;
    if fabs(cc.height - ds.height) > 1e-12 {
        return Err(Error::Comparison(format!("constants for H = {} used with a dataset for H = {}", cc.height, ds.height)));
    }
    if fabs(predictions.epsilon - eps) > 1e-12 {
        return Err(Error::Comparison(format!("predictions for eps = {} used with eps = {eps}", predictions.epsilon)));
    }
    let mut notes = Vec::new();
    let mut nodes = Vec::new();
    for (node, bands) in [(NodeId::Square, (1, 2)), (NodeId::Circ, (2, 3))] {
        if ds.height >= node.height_limit() {
            notes.push(format!("{node:?} node skipped: H >= {}", node.height_limit()));
            continue;
        }
        if bands.1 > ds.bands {
            notes.push(format!("{node:?} node skipped: needs {} bands", bands.1));
            continue;
        }
        let window = ds
            .window_at(node.eta())
            .ok_or_else(|| Error::Comparison(format!("no refinement window at eta* = {}", node.eta())))?;
        let mut cmp = NodeComparison {
            node_id: node,
            eta_star: node.eta(),
            lambda_star: node.value(),
            band_minus: bands.0,
            band_plus: bands.1,
            psi: window.psi.clone(),
            computed_minus: Vec::new(),
            computed_plus: Vec::new(),
            predicted_minus: Vec::new(),
            predicted_plus: Vec::new(),
            residual_minus: Vec::new(),
            residual_plus: Vec::new(),
            fit_c: 0.0,
        };
        for (&psi, &i) in window.psi.iter().zip(&window.indices) {
            let corr = correction_node(cc, node, psi);
            let (lm, lp) = (ds.values[i][bands.0 - 1], ds.values[i][bands.1 - 1]);
            let (pm, pp) = (node.value() + eps * corr.lambda_prime_minus, node.value() + eps * corr.lambda_prime_plus);
            cmp.computed_minus.push(lm);
            cmp.computed_plus.push(lp);
            cmp.predicted_minus.push(pm);
            cmp.predicted_plus.push(pp);
            cmp.residual_minus.push(lm - pm);
            cmp.residual_plus.push(lp - pp);
            cmp.fit_c = cmp.fit_c.max(fabs(lm - pm).max(fabs(lp - pp)) / (eps * eps));
        }
        nodes.push(cmp);
    }

    let count = ds.bands;
    let (_, measured) = extract_bands_gaps(ds, count)?;
    let mut gaps = Vec::new();
    for g in &predictions.gaps {
        let p = g.p as usize;
        let Some(m) = measured.get(p - 1) else {
            notes.push(format!("gap {p} not measured: needs {} bands", p + 1));
            continue;
        };
        let measured_slope = m.width / eps;
        gaps.push(GapComparison {
            p: g.p,
            measured_lower: m.lower,
            measured_upper: m.upper,
            measured_width: m.width,
            measured_slope,
            predicted_lower: g.lower_edge,
            predicted_upper: g.upper_edge,
            predicted_slope: g.width_slope,
            relative_deviation: measured_slope / g.width_slope - 1.0,
            open: m.open,
        });
    }
    for o in &predictions.omitted {
        notes.push(format!("gap {} prediction omitted: {}", o.p, o.reason));
    }

    let away = compare_away(ds, eps)?;
    Ok(ComparisonReport { epsilon: eps, height: ds.height, nodes, gaps, away, notes })
}

fn compare_away(ds: &DispersionDataset, eps: f64) -> Result<AwayComparison, Error> {
    let count = ds.bands;
    let mut raw: Vec<(f64, usize, f64, Vec<((i32, u32), f64, f64)>)> = Vec::new();
    let mut per_band_max = alloc::vec![0.0f64; count];
    for (i, &eta) in ds.eta_grid.iter().enumerate() {
        if !ds.uniform[i] {
            continue;
        }
        let limit = limit_eigenvalues(ds.height, eta, count + 4)?;
        for p in 1..=count {
            let v = ds.values[i][p - 1];
            let cands: Vec<((i32, u32), f64, f64)> = limit.iter().map(|l| ((l.j, l.k), l.value, fabs(v - l.value))).collect();
            let best = cands.iter().fold(f64::INFINITY, |a, c| a.min(c.2));
            per_band_max[p - 1] = per_band_max[p - 1].max(best);
            raw.push((eta, p, v, cands));
        }
    }
    let per_band_ratio: Vec<f64> = per_band_max.iter().map(|m| m / eps).collect();
    let c0 = per_band_ratio.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut ambiguous = 0;
    let mut points = Vec::with_capacity(raw.len());
    for (eta, p, value, cands) in raw {
        let k = cands.iter().enumerate().fold(0, |b, (i, c)| if c.2 < cands[b].2 { i } else { b });
        let (branch, centre, residual) = cands[k];
        let also: Vec<((i32, u32), f64)> = cands
            .iter()
            .enumerate()
            .filter(|&(i, c)| i != k && fabs(c.1 - centre) < 2.0 * c0 * eps)
            .map(|(_, c)| (c.0, c.2))
            .collect();
        ambiguous += !also.is_empty() as usize;
        points.push(AwayPoint { eta, p, value, branch, residual, also });
    }
    Ok(AwayComparison { per_band_ratio, per_band_max, c0, ambiguous, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HoleShape;

    fn disk_spec(n: u32) -> CellSpec {
        CellSpec::new(0.4, n, HoleShape::disk([0.0, 0.2], 0.08, 0.4))
    }

    #[test]
    fn plan_merges_windows_into_grid() {
        let mut opts = SweepOptions::default();
        opts.node_lambda_max = Some(4.0 * PI * PI + 1.0);
        let p = plan(&disk_spec(8), &opts).unwrap();
        assert!(p.eta.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p.eta[0], -PI);
        assert_eq!(*p.eta.last().unwrap(), PI);
        assert_eq!(p.uniform.iter().filter(|&&u| u).count(), 33);
        // Windows at -pi, 0 and pi; the two end windows share points.
        assert_eq!(p.windows.len(), 3);
        for w in &p.windows {
            assert_eq!(w.indices.len(), 17);
            for (&s, &i) in w.psi.iter().zip(&w.indices) {
                assert!(fabs(p.eta[i] - wrap_eta(w.eta_star + s / 8.0)) < 1e-12);
            }
        }
    }

    #[test]
    fn unperforated_plan_has_no_windows() {
        let p = plan(&CellSpec::unperforated(0.4), &SweepOptions::default()).unwrap();
        assert!(p.windows.is_empty());
        assert_eq!(p.eta.len(), 33);
    }

    #[test]
    fn too_few_samples_rejected() {
        let opts = SweepOptions { eta_samples: 8, ..Default::default() };
        assert!(matches!(plan(&disk_spec(4), &opts), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn parabola_recovers_smooth_maximum() {
        let eta = uniform_grid(33);
        let y: Vec<f64> = eta.iter().map(|&e| 2.0 - (e - 0.3) * (e - 0.3)).collect();
        let i = (0..33).fold(0, |b, i| if y[i] > y[b] { i } else { b });
        let (x, v, shift) = refine_extremum(&eta, &y, i, true);
        assert!(fabs(x - 0.3) < 1e-12 && fabs(v - 2.0) < 1e-12);
        assert!(shift > 0.0);
    }

    #[test]
    fn parabola_wraps_at_the_ends() {
        // Minimum of cos-like curve at +-pi.
        let eta = uniform_grid(17);
        let y: Vec<f64> = eta.iter().map(|&e| libm::cos(e)).collect();
        let (x, v, _) = refine_extremum(&eta, &y, 0, false);
        assert!(fabs(fabs(x) - PI) < 1e-12);
        assert!(fabs(v + 1.0) < 1e-12);
    }

    fn synthetic(values: Vec<Vec<f64>>, err: f64) -> DispersionDataset {
        let n = values.len();
        DispersionDataset {
            epsilon: Some(0.125),
            height: 0.4,
            bands: values[0].len(),
            eta_grid: uniform_grid(n),
            uniform: alloc::vec![true; n],
            error_estimate: alloc::vec![alloc::vec![err; values[0].len()]; n],
            coarse: values.clone(),
            fine: None,
            values,
            max_residual: 0.0,
            stalled_solves: 0,
            windows: Vec::new(),
            mesh: MeshInfo { h: 0.0, h_near: 0.0, vertices: 0, dofs: 0, fine_dofs: None, min_angle_deg: 0.0 },
            warnings: Vec::new(),
        }
    }

    #[test]
    fn limit_bands_touch() {
        let grid = uniform_grid(33);
        let values = grid
            .iter()
            .map(|&e| limit_eigenvalues(0.4, e, 3).unwrap().iter().map(|l| l.value).collect())
            .collect();
        let (bands, gaps) = extract_bands_gaps(&synthetic(values, 0.0), 3).unwrap();
        assert!(bands.iter().all(|b| b.lo <= b.hi));
        assert!(!gaps[0].open && !gaps[1].open);
        assert!(fabs(gaps[0].width) < 1e-9);
    }

    #[test]
    fn gap_needs_to_exceed_tolerance() {
        let values: Vec<Vec<f64>> = uniform_grid(9).iter().map(|_| alloc::vec![1.0, 1.01]).collect();
        let (_, gaps) = extract_bands_gaps(&synthetic(values.clone(), 1e-3), 2).unwrap();
        assert!(gaps[0].open);
        let (_, gaps) = extract_bands_gaps(&synthetic(values, 1e-2), 2).unwrap();
        assert!(!gaps[0].open);
    }
}
