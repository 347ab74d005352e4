use std::sync::Arc;

use gapstrip_core::cell_constants::*;
use gapstrip_core::geometry::{HoleKind, HoleShape, StripSpec};
use gapstrip_core::mesh::mesh_strip;

fn reference() -> StripSpec {
    StripSpec::with_default_truncation(0.4, HoleShape::disk([0.0, 0.2], 0.08, 0.4))
}

// Richardson extrapolants of the default mesh pair (h, h/2), recorded from
// `cell_constants_extrapolated` after checking them against the multipole
// values below.
const M1_FROZEN: f64 = 0.0577735197;
const M_XI_FROZEN: f64 = 0.0154108737;

// Exact circle, r = 0.08, H = 0.4: oracles/multipole_disk.py (K = 16, 24
// agree to 12 digits).
const M1_CIRCLE: f64 = 0.057884923828;
const M_XI_CIRCLE: f64 = 0.015430969969;

#[test]
fn extrapolated_constants_match_frozen_values() {
    let ex = cell_constants_extrapolated(&reference(), &StripOptions::for_hole(0.16)).unwrap();
    assert!((ex.m1 / M1_FROZEN - 1.0).abs() < 1e-7, "{}", ex.m1);
    assert!((ex.m_xi / M_XI_FROZEN - 1.0).abs() < 1e-7, "{}", ex.m_xi);
    // Energies of Neumann problems grow under refinement.
    assert!(ex.coarse.m1 < ex.fine.m1 && ex.fine.m1 < ex.m1);
    assert!(ex.coarse.m_xi < ex.fine.m_xi && ex.fine.m_xi < ex.m_xi);
}

#[test]
fn close_to_exact_circle_multipoles() {
    // The inscribed polygon loses about 0.16 % of the disk area.
    let ex = cell_constants_extrapolated(&reference(), &StripOptions::for_hole(0.16)).unwrap();
    let area_deficit = 1.0 - ex.fine.area_omega / (std::f64::consts::PI * 0.0064);
    assert!(area_deficit > 0.0 && area_deficit < 3e-3);
    for (value, exact) in [(ex.m1, M1_CIRCLE), (ex.m_xi, M_XI_CIRCLE)] {
        let rel = 1.0 - value / exact;
        assert!(rel > 0.0 && rel < 2.0 * area_deficit, "{value} vs {exact}");
    }
}

#[test]
fn m1_differences_shrink_quadratically() {
    let spec = reference();
    let opts = StripOptions::for_hole(0.16);
    let m0 = mesh_strip(&spec, opts.target_h, opts.grading).unwrap();
    let m1 = m0.refine_uniform();
    let m2 = m1.refine_uniform();
    let values: Vec<f64> = [m0, m1, m2]
        .into_iter()
        .map(|m| constants_on_mesh(&spec, Arc::new(m), opts.cross_tol).unwrap().0.m1)
        .collect();
    let ratio = (values[1] - values[0]) / (values[2] - values[1]);
    assert!(ratio >= 3.0, "{values:?} ratio {ratio}");
}

#[test]
fn reflection_flips_m2() {
    let tilted = |angle: f64| {
        let hole = HoleShape::new(HoleKind::Ellipse { a: 0.1, b: 0.05, angle }, [0.0, 0.2], 0.4);
        StripSpec::with_default_truncation(0.4, hole)
    };
    let opts = StripOptions::for_hole(0.2);
    let up = cell_constants(&tilted(0.5), &opts).unwrap();
    let down = cell_constants(&tilted(-0.5), &opts).unwrap();
    assert!(up.m2.abs() > 1e-2 * up.m1, "{}", up.m2);
    assert!((up.m2 + down.m2).abs() < 1e-3 * up.m2.abs(), "{} {}", up.m2, down.m2);
    assert!((up.m1 - down.m1).abs() < 1e-3 * up.m1);
    let d = &up.diagnostics;
    assert!((d.m2_farfield - d.m2_boundary_integral).abs() < 1e-10);
}

#[test]
fn serializes_with_all_diagnostics() {
    let c = cell_constants(&reference(), &StripOptions::for_hole(0.16)).unwrap();
    let json = serde_json::to_value(&c).unwrap();
    for key in ["m1", "m2", "M_Xi", "area_omega", "H"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let diag = &json["diagnostics"];
    for key in ["half_length", "h", "m1_energy", "m1_farfield", "m2_farfield", "m2_boundary_integral", "decay_w1"] {
        assert!(diag.get(key).is_some(), "{key}");
    }
    let back: CellConstants = serde_json::from_value(json).unwrap();
    assert_eq!(back, c);
}
