//! Run configuration: one TOML file, every key optional, unknown keys
//! rejected. `--set section.key=value` overrides are applied to the parsed
//! table before validation, so they obey the same schema.

use std::path::PathBuf;

use gapstrip_core::bands::{MeshOptions, SweepOptions};
use gapstrip_core::cell_constants::StripOptions;
use gapstrip_core::fem::SolverOptions;
use gapstrip_core::geometry::{default_half_length, CellSpec, HoleKind, HoleShape, StripSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub fem: FemConfig,
    pub sweep: SweepConfig,
    pub cell_constants: CellConstantsConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryConfig::default(),
            fem: FemConfig::default(),
            sweep: SweepConfig::default(),
            cell_constants: CellConstantsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Strip height `H`.
    pub height: f64,
    /// Holes per period; `eps = 1/n`.
    pub n: u32,
    /// Absent for the unperforated strip.
    pub hole: Option<HoleConfig>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { height: 0.4, n: 8, hole: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleConfig {
    pub shape: HoleKind,
    /// Centre in the unit strip `0 < xi2 < H`.
    pub center: [f64; 2],
    pub boundary_tolerance: Option<f64>,
}

impl Default for HoleConfig {
    fn default() -> Self {
        HoleConfig { shape: HoleKind::Disk { radius: 0.08 }, center: [0.0, 0.2], boundary_tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    /// Element size away from the holes.
    pub target_h: f64,
    /// Element size at the holes is `eps * diam / near_divisions`.
    pub near_divisions: f64,
    pub grading: f64,
    pub dense_ceiling: usize,
    pub iterative: bool,
    pub tol: f64,
    pub max_iter: usize,
    /// Also solve on the uniformly refined mesh and extrapolate.
    pub richardson: bool,
}

impl Default for FemConfig {
    fn default() -> Self {
        let m = MeshOptions::default();
        let s = SweepOptions::default().solver;
        FemConfig {
            target_h: m.target_h,
            near_divisions: m.near_divisions,
            grading: m.grading,
            dense_ceiling: s.dense_ceiling,
            iterative: s.iterative,
            tol: s.tol,
            max_iter: s.max_iter,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eta_samples: usize,
    pub bands: usize,
    pub psi_max: f64,
    pub window_samples: usize,
    pub node_lambda_max: Option<f64>,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let s = SweepOptions::default();
        SweepConfig {
            eta_samples: s.eta_samples,
            bands: s.bands,
            psi_max: s.psi_max,
            window_samples: s.window_samples,
            node_lambda_max: s.node_lambda_max,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConstantsConfig {
    /// Strip half-length `T`; default `max(4 diam, 1.5 H ln(1e6) / (2 pi))`.
    pub half_length: Option<f64>,
    /// Element size at the hole; default `diam / 16`.
    pub target_h: Option<f64>,
    pub grading: f64,
    pub cross_tol: f64,
    /// Richardson-extrapolate `m1`, `M` from `h` and `h/2`.
    pub extrapolate: bool,
}

impl Default for CellConstantsConfig {
    fn default() -> Self {
        CellConstantsConfig { half_length: None, target_h: None, grading: 1.2, cross_tol: 0.01, extrapolate: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Results never depend on scheduling; `false` is rejected.
    pub deterministic: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("gapstrip-out"), formats: vec![Format::Csv, Format::Json, Format::Svg], deterministic: true }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Commented default configuration, shown by `--help`.
pub const DEFAULTS: &str = r#"[geometry]
height = 0.4            # strip height H
n = 8                   # holes per period, eps = 1/n
# No hole table: the unperforated strip. The reference hole is
# [geometry.hole]
# center = [0.0, 0.2]     # in the unit strip 0 < xi2 < H
# boundary_tolerance =    # chord sagitta, default 1e-3 * min(H, diam)
# [geometry.hole.shape]
# kind = "disk"           # disk {radius} | ellipse {a, b, angle} |
# radius = 0.08           # smooth-star {radius, amplitude, frequency, phase}

[fem]
target_h = 0.025        # element size away from the holes
near_divisions = 16     # size at the holes: eps * diam / near_divisions
grading = 1.25
dense_ceiling = 4000
iterative = true
tol = 1e-8              # relative eigen-residual
max_iter = 300
richardson = true       # solve on h and h/2, extrapolate

[sweep]
eta_samples = 33
bands = 4
psi_max = 8.0           # node windows eta* + eps*psi, |psi| <= psi_max
window_samples = 17
# node_lambda_max =     # default: top of the highest requested band
workers = 0             # 0 = available parallelism

[cell_constants]
# half_length =         # default max(4 diam, 1.5 H ln(1e6) / (2 pi))
# target_h =            # default diam / 16
grading = 1.2
cross_tol = 0.01
extrapolate = true

[output]
directory = "gapstrip-out"
formats = ["csv", "json", "svg"]
deterministic = true
"#;

/// Parse `text`, apply overrides, validate.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (path, raw) = item.split_once('=').ok_or_else(|| CliError::Config(format!("--set {item}: expected section.key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("--set {item}: empty key")));
    }
    // Anything that is not a TOML value is taken as a bare string.
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("--set {item}: {k} is not a section")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {v} must be positive")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("geometry.height", self.geometry.height)?;
        if self.geometry.n == 0 {
            return Err(CliError::Config("geometry.n must be at least 1".into()));
        }
        positive("fem.target_h", self.fem.target_h)?;
        positive("fem.near_divisions", self.fem.near_divisions)?;
        if !(self.fem.grading >= 1.0) {
            return Err(CliError::Config("fem.grading must be at least 1".into()));
        }
        positive("fem.tol", self.fem.tol)?;
        if self.sweep.eta_samples < 9 {
            return Err(CliError::Config(format!("sweep.eta_samples = {} must be at least 9", self.sweep.eta_samples)));
        }
        if self.sweep.bands == 0 {
            return Err(CliError::Config("sweep.bands must be at least 1".into()));
        }
        positive("cell_constants.cross_tol", self.cell_constants.cross_tol)?;
        if !self.output.deterministic {
            return Err(CliError::Config("output.deterministic cannot be turned off".into()));
        }
        Ok(())
    }

    pub fn hole(&self) -> Option<HoleShape> {
        self.geometry.hole.as_ref().map(|h| {
            let shape = HoleShape::new(h.shape.clone(), h.center, self.geometry.height);
            match h.boundary_tolerance {
                Some(t) => shape.with_tolerance(t),
                None => shape,
            }
        })
    }

    pub fn cell_spec(&self) -> CellSpec {
        match self.hole() {
            Some(h) => CellSpec::new(self.geometry.height, self.geometry.n, h),
            None => CellSpec::unperforated(self.geometry.height),
        }
    }

    pub fn strip_spec(&self) -> Option<StripSpec> {
        let hole = self.hole()?;
        let half_length =
            self.cell_constants.half_length.unwrap_or_else(|| default_half_length(self.geometry.height, hole.diameter()));
        Some(StripSpec { height: self.geometry.height, hole, half_length })
    }

    pub fn strip_options(&self) -> Option<StripOptions> {
        let hole = self.hole()?;
        let mut o = StripOptions::for_hole(hole.diameter());
        if let Some(h) = self.cell_constants.target_h {
            o.target_h = h;
        }
        o.grading = self.cell_constants.grading;
        o.cross_tol = self.cell_constants.cross_tol;
        Some(o)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.fem.tol,
            max_iter: self.fem.max_iter,
            dense_ceiling: self.fem.dense_ceiling,
            iterative: self.fem.iterative,
            ..SolverOptions::default()
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            eta_samples: self.sweep.eta_samples,
            bands: self.sweep.bands,
            psi_max: self.sweep.psi_max,
            window_samples: self.sweep.window_samples,
            node_lambda_max: self.sweep.node_lambda_max,
            mesh: MeshOptions { target_h: self.fem.target_h, near_divisions: self.fem.near_divisions, grading: self.fem.grading },
            richardson: self.fem.richardson,
            solver: self.solver(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults_match_code() {
        assert_eq!(load(DEFAULTS, &[]).unwrap(), RunConfig::default());
        assert_eq!(load("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(load("[fem]\ntarget = 0.1\n", &[]), Err(CliError::Config(_))));
        assert!(matches!(load("[nope]\n", &[]), Err(CliError::Config(_))));
        assert!(load("", &["sweep.color=1".into()]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = load("", &["geometry.n=16".into(), "fem.richardson=false".into(), "output.directory=/tmp/x".into()]).unwrap();
        assert_eq!(c.geometry.n, 16);
        assert!(!c.fem.richardson);
        assert_eq!(c.output.directory, PathBuf::from("/tmp/x"));
        let c = load("", &["geometry.hole.shape={kind=\"ellipse\", a=0.1, b=0.05}".into(), "geometry.hole.center=[0.0, 0.2]".into()]).unwrap();
        assert_eq!(c.geometry.hole.unwrap().shape, HoleKind::Ellipse { a: 0.1, b: 0.05, angle: 0.0 });
    }

    #[test]
    fn hole_table_round_trips() {
        assert!(RunConfig::default().cell_spec().hole.is_none());
        let mut c = RunConfig::default();
        c.geometry.hole = Some(HoleConfig::default());
        let text = toml::to_string(&c).unwrap();
        let back = load(&text, &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.cell_spec().hole.unwrap().diameter(), 0.16);
    }

    #[test]
    fn determinism_flag_is_fixed() {
        assert!(load("[output]\ndeterministic = false\n", &[]).is_err());
    }
}
