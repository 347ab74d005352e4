use gapstrip_core::bands::{extract_bands_gaps, sweep, MeshOptions, SweepOptions};
use gapstrip_core::geometry::{CellSpec, HoleShape};
use gapstrip_core::limit::limit_eigenvalues;
use gapstrip_core::PI;

fn cheap() -> SweepOptions {
    SweepOptions {
        eta_samples: 17,
        bands: 3,
        window_samples: 5,
        psi_max: 4.0,
        node_lambda_max: Some(4.0 * PI * PI + 1.0),
        mesh: MeshOptions { target_h: 0.05, near_divisions: 8.0, grading: 1.3 },
        ..Default::default()
    }
}

#[test]
fn unperforated_sweep_follows_limit_branches() {
    let ds = sweep(&CellSpec::unperforated(0.4), &cheap()).unwrap();
    assert!(ds.windows.is_empty());
    for (i, &eta) in ds.eta_grid.iter().enumerate() {
        let exact = limit_eigenvalues(0.4, eta, 3).unwrap();
        for p in 0..3 {
            let (v, e) = (ds.values[i][p], exact[p].value);
            assert!((v - e).abs() <= 1e-3 * (1.0 + e), "eta {eta} p {p}: {v} vs {e}");
        }
    }
    let (_, gaps) = extract_bands_gaps(&ds, 3).unwrap();
    assert!(gaps.iter().all(|g| !g.open), "{gaps:?}");
}

#[test]
fn perforated_sweep_invariants() {
    let spec = CellSpec::new(0.4, 4, HoleShape::disk([0.0, 0.2], 0.08, 0.4));
    let ds = sweep(&spec, &cheap()).unwrap();
    // Columns sorted, grid sorted with both ends.
    assert!(ds.eta_grid.windows(2).all(|w| w[0] < w[1]));
    assert_eq!((ds.eta_grid[0], *ds.eta_grid.last().unwrap()), (-PI, PI));
    assert!(ds.values.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1])));
    // The constant survives at eta = 0.
    let i0 = ds.eta_grid.iter().position(|&e| e == 0.0).unwrap();
    assert!(ds.values[i0][0].abs() < 1e-8);
    // eta <-> -eta, and the two ends coincide.
    let n = ds.eta_grid.len();
    for i in 0..n {
        let j = ds.eta_grid.iter().position(|&e| (e + ds.eta_grid[i]).abs() < 1e-12).unwrap();
        for p in 0..3 {
            let (a, b) = (ds.values[i][p], ds.values[j][p]);
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "eta {}: {a} vs {b}", ds.eta_grid[i]);
        }
    }
    let (bands, gaps) = extract_bands_gaps(&ds, 3).unwrap();
    assert!(bands.iter().all(|b| b.lo <= b.hi));
    assert!(gaps[0].open && gaps[1].open, "{gaps:?}");
    for b in &bands {
        for x in [b.argmin, b.argmax] {
            assert!(x.abs() < 1e-9 || (x.abs() - PI).abs() < 1e-9, "extremum at {x}");
        }
    }
}
