//! The five subcommands. Each returns the files it wrote plus warnings for
//! stderr; failures carry their exit code through [`CliError`].

use std::f64::consts::PI;
use std::path::PathBuf;

use gapstrip_core::asymptotics::{predicted_gaps, GapPredictions};
use gapstrip_core::bands::{compare_asymptotics, extract_bands_gaps, Band, ComparisonReport, DispersionDataset, Gap};
use gapstrip_core::cell_constants::{
    cell_constants, cell_constants_extrapolated, doubling_check, CellConstants, DoublingCheck, Extrapolated,
};
use gapstrip_core::error::Error as CoreError;
use gapstrip_core::geometry::mirror_symmetry_defect;
use gapstrip_core::limit::{find_nodes, limit_eigenvalues, NodeSet, NodeStatus};
use gapstrip_core::mesh::mesh_strip;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{dispersion_csv, ensure_dir, limit_csv, write_bytes, write_json, write_text};
use crate::pool;
use crate::svg::{render, Figure, Marker, MarkerKind};
use crate::verify::{self, CriterionResult};

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn limit_plot_grid(samples: usize) -> Vec<f64> {
    let n = 8 * (samples - 1) + 1;
    (0..n).map(|i| if i + 1 == n { PI } else { -PI + 2.0 * PI * i as f64 / (n - 1) as f64 }).collect()
}

fn marker(status: NodeStatus) -> MarkerKind {
    match status {
        NodeStatus::OpensGap => MarkerKind::Open,
        NodeStatus::Shaded => MarkerKind::Shaded,
        _ => MarkerKind::Closed,
    }
}

#[derive(Serialize)]
struct LimitReport<'a> {
    height: f64,
    bands: usize,
    lambda_max: f64,
    nodes: &'a NodeSet,
}

pub fn cmd_limit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let h = cfg.geometry.height;
    let count = cfg.sweep.bands;
    let rows = limit_plot_grid(cfg.sweep.eta_samples)
        .into_iter()
        .map(|eta| limit_eigenvalues(h, eta, count))
        .collect::<Result<Vec<_>, _>>()?;
    let lambda_max = rows.iter().fold(0.0f64, |a, r| a.max(r[count - 1].value));
    let nodes = find_nodes(h, lambda_max)?;
    let mut out = Outcome { warnings: nodes.warnings.clone(), ..Default::default() };
    let dir = &cfg.output.directory;
    ensure_dir(dir)?;
    if cfg.output.wants(Format::Csv) {
        out.files.push(write_bytes(dir, "limit_dispersion.csv", &limit_csv(&rows))?);
    }
    if cfg.output.wants(Format::Json) {
        out.files.push(write_json(dir, "limit_nodes.json", &LimitReport { height: h, bands: count, lambda_max, nodes: &nodes })?);
    }
    if cfg.output.wants(Format::Svg) {
        let fig = Figure {
            title: format!("Limit dispersion, H = {h}"),
            y_label: "\u{39b}\u{2070}".into(),
            curves: (0..count).map(|p| rows.iter().map(|r| (r[0].eta, r[p].value)).collect()).collect(),
            gaps: Vec::new(),
            markers: nodes.nodes.iter().map(|n| Marker { x: n.eta_star, y: n.lambda_star, kind: marker(n.status) }).collect(),
        };
        out.files.push(write_text(dir, "limit.svg", &render(&fig))?);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct CellConstantsReport {
    pub constants: CellConstants,
    pub extrapolation: Option<Extrapolated>,
    pub doubling: DoublingCheck,
    pub symmetry_defect: f64,
    pub warnings: Vec<String>,
}

fn symmetry_warning(cfg: &RunConfig) -> Result<(f64, Option<String>), CliError> {
    let hole = cfg.hole().expect("perforated");
    let defect = mirror_symmetry_defect(&hole, cfg.geometry.height).map_err(CoreError::from)?;
    let warning = (defect > 2.0 * hole.boundary_tolerance).then(|| {
        format!(
            "hole is not mirror-symmetric about xi2 = H/2 (defect {defect:.2e}); the gap-opening results assume a symmetric hole"
        )
    });
    Ok((defect, warning))
}

pub fn compute_cell_constants(cfg: &RunConfig) -> Result<CellConstantsReport, CliError> {
    let spec = cfg.strip_spec().ok_or_else(|| CliError::Config("cell constants need a hole ([geometry.hole])".into()))?;
    let opts = cfg.strip_options().expect("perforated");
    let (defect, warning) = symmetry_warning(cfg)?;
    let mut warnings: Vec<String> = warning.into_iter().collect();
    let (constants, extrapolation) = if cfg.cell_constants.extrapolate {
        let ex = cell_constants_extrapolated(&spec, &opts)?;
        (ex.constants(), Some(ex))
    } else {
        (cell_constants(&spec, &opts)?, None)
    };
    let d = &constants.diagnostics;
    for (name, check) in [("W1", &d.decay_w1), ("W2", &d.decay_w2)] {
        if !check.ok {
            warnings.push(format!("{name} decay rate {:.3} is slower than expected {:.3}; increase T", check.rate, check.expected));
        }
    }
    let doubling = doubling_check(&spec, &mesh_strip(&spec, opts.target_h, opts.grading)?)?;
    if !doubling.ok {
        warnings.push(format!("doubling T changes m1 by {:.2e}, above the bound {:.2e}", doubling.change, doubling.bound));
    }
    Ok(CellConstantsReport { constants, extrapolation, doubling, symmetry_defect: defect, warnings })
}

pub fn cmd_cell_constants(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = compute_cell_constants(cfg)?;
    let dir = &cfg.output.directory;
    ensure_dir(dir)?;
    let mut out = Outcome { warnings: report.warnings.clone(), ..Default::default() };
    if cfg.output.wants(Format::Json) {
        out.files.push(write_json(dir, "cell_constants.json", &report)?);
    }
    Ok(out)
}

fn dispersion_figure(ds: &DispersionDataset, gaps: &[Gap]) -> Figure {
    let title = match ds.epsilon {
        Some(e) => format!("Dispersion, H = {}, eps = 1/{:.0}", ds.height, 1.0 / e),
        None => format!("Dispersion, H = {}, unperforated", ds.height),
    };
    Figure {
        title,
        y_label: "\u{39b}".into(),
        curves: (1..=ds.bands).map(|p| ds.eta_grid.iter().copied().zip(ds.band(p)).collect()).collect(),
        gaps: gaps.iter().filter(|g| g.open).map(|g| (g.lower, g.upper)).collect(),
        markers: Vec::new(),
    }
}

fn run_sweep(cfg: &RunConfig) -> Result<DispersionDataset, CliError> {
    let ds = pool::sweep(&cfg.cell_spec(), &cfg.sweep_options(), cfg.sweep.workers)?;
    Ok(ds)
}

fn write_dispersion(cfg: &RunConfig, ds: &DispersionDataset, gaps: &[Gap], out: &mut Outcome) -> Result<(), CliError> {
    let dir = &cfg.output.directory;
    if cfg.output.wants(Format::Csv) {
        out.files.push(write_bytes(dir, "dispersion.csv", &dispersion_csv(ds))?);
    }
    if cfg.output.wants(Format::Json) {
        out.files.push(write_json(dir, "dispersion.json", ds)?);
    }
    if cfg.output.wants(Format::Svg) {
        out.files.push(write_text(dir, "dispersion.svg", &render(&dispersion_figure(ds, gaps)))?);
    }
    Ok(())
}

pub fn cmd_dispersion(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_dir(&cfg.output.directory)?;
    let ds = run_sweep(cfg)?;
    let mut out = Outcome { warnings: ds.warnings.clone(), ..Default::default() };
    write_dispersion(cfg, &ds, &[], &mut out)?;
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct GapsReport {
    pub epsilon: Option<f64>,
    pub height: f64,
    pub bands: Vec<Band>,
    pub gaps: Vec<Gap>,
    pub predictions: Option<GapPredictions>,
}

pub fn cmd_gaps(cfg: &RunConfig) -> Result<Outcome, CliError> {
    ensure_dir(&cfg.output.directory)?;
    let ds = run_sweep(cfg)?;
    let (bands, gaps) = extract_bands_gaps(&ds, ds.bands)?;
    let mut out = Outcome { warnings: ds.warnings.clone(), ..Default::default() };
    let mut predictions = None;
    let mut comparison: Option<ComparisonReport> = None;
    if let Some(eps) = ds.epsilon {
        let cc = compute_cell_constants(cfg)?;
        out.warnings.extend(cc.warnings.iter().cloned());
        let pred = predicted_gaps(&cc.constants, eps)?;
        comparison = Some(compare_asymptotics(&ds, &cc.constants, &pred)?);
        predictions = Some(pred);
    }
    write_dispersion(cfg, &ds, &gaps, &mut out)?;
    let dir = &cfg.output.directory;
    if cfg.output.wants(Format::Json) {
        let report = GapsReport { epsilon: ds.epsilon, height: ds.height, bands, gaps, predictions };
        out.files.push(write_json(dir, "bands_gaps.json", &report)?);
        if let Some(c) = &comparison {
            out.files.push(write_json(dir, "comparison.json", c)?);
        }
    }
    Ok(out)
}

/// Runs the acceptance suite; fails with exit code 4 if any criterion fails.
pub fn cmd_verify(cfg: &RunConfig, mut progress: impl FnMut(&CriterionResult)) -> Result<(Outcome, Vec<CriterionResult>), CliError> {
    ensure_dir(&cfg.output.directory)?;
    let results = verify::run_all(cfg.sweep.workers, &mut progress);
    let mut out = Outcome::default();
    if cfg.output.wants(Format::Json) {
        out.files.push(write_json(&cfg.output.directory, "verify.json", &results)?);
    }
    Ok((out, results))
}
