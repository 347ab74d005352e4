use gapstrip_core::geometry::{instantiate_cell, CellSpec, HoleShape};
use gapstrip_core::mesh::{mesh_cell, mesh_cell_graded, mesh_cell_lattice, BoundaryTag, PeriodicMesh, Sizing, MIN_ANGLE_DEG};
use proptest::prelude::*;

fn disk() -> HoleShape {
    HoleShape::disk([0.0, 0.2], 0.08, 0.4)
}

fn check_periodic(mesh: &PeriodicMesh) {
    for &(m, s) in &mesh.periodic_pairs {
        assert_eq!(mesh.vertices[m][1], mesh.vertices[s][1]);
        assert_eq!((mesh.vertices[m][0], mesh.vertices[s][0]), (-0.5, 0.5));
    }
    let on = |tag| mesh.boundary_edges.iter().filter(|(_, t)| *t == tag).count();
    assert_eq!(on(BoundaryTag::Left), on(BoundaryTag::Right));
}

#[test]
fn refinement_quadruples_triangles() {
    let spec = CellSpec::new(0.4, 4, disk());
    let mesh = mesh_cell(&spec, 0.008).unwrap();
    let fine = mesh.refine_uniform();
    assert_eq!(fine.triangles.len(), 4 * mesh.triangles.len());
    // V' = V + E, and E ~ 3V for large planar meshes.
    let ratio = fine.num_vertices() as f64 / mesh.num_vertices() as f64;
    assert!((3.6..4.0).contains(&ratio), "{ratio}");
    assert!((fine.h - 0.5 * mesh.h).abs() < 1e-12);
    assert!((fine.quality - mesh.quality).abs() < 1e-9);
    check_periodic(&fine);
}

#[test]
fn areas_add_up() {
    for n in [1, 3, 8] {
        let spec = CellSpec::new(0.4, n, disk());
        let mesh = mesh_cell(&spec, 0.3 * 0.16 / n as f64 * 0.5).unwrap();
        let holes: f64 = instantiate_cell(&spec).unwrap().iter().map(|p| p.area()).sum();
        let rel = (mesh.total_area() - (0.4 - holes)).abs() / 0.4;
        assert!(rel < 1e-12, "n = {n}: {rel:e}");
        check_periodic(&mesh);
    }
}

/// Expected vertex count from the size field: an equilateral mesh of
/// spacing `h` has `2 / (sqrt(3) h^2)` vertices per unit area. The mesher
/// treats the field as an upper bound, so it lands above this.
fn vertex_estimate(spec: &CellSpec, sizing: Sizing) -> f64 {
    let holes = instantiate_cell(spec).unwrap();
    let (nx, ny) = (1000, 400);
    let (dx, dy) = (1.0 / nx as f64, spec.height / ny as f64);
    let mut total = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let p = [-0.5 + (i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy];
            if holes.iter().any(|h| h.contains(p)) {
                continue;
            }
            let d = holes.iter().map(|h| h.boundary_distance(p)).fold(f64::INFINITY, f64::min);
            let h = sizing.at_distance(d);
            total += 2.0 / (3f64.sqrt() * h * h) * dx * dy;
        }
    }
    total
}

#[test]
fn graded_vertex_count_follows_size_field() {
    let spec = CellSpec::new(0.4, 8, disk());
    let sizing = Sizing { h_near: 0.125 * 0.16 / 16.0, h_far: 0.025, grading: 1.25 };
    let mesh = mesh_cell_graded(&spec, sizing).unwrap();
    let ratio = mesh.num_vertices() as f64 / vertex_estimate(&spec, sizing);
    assert!((0.5..2.0).contains(&ratio), "{ratio}");
    assert!(mesh.quality >= MIN_ANGLE_DEG);
    // Graded is much cheaper than uniform at the near size.
    let uniform = 2.0 / (3f64.sqrt() * sizing.h_near * sizing.h_near) * 0.4;
    assert!((mesh.num_vertices() as f64) < 0.05 * uniform);
}

#[test]
fn lattice_dofs() {
    let mesh = mesh_cell_lattice(0.4, 12, 3).unwrap();
    assert_eq!(mesh.num_vertices() - mesh.periodic_pairs.len(), 50);
    check_periodic(&mesh);
    let mesh = mesh_cell(&CellSpec::unperforated(0.4), 0.01).unwrap();
    assert!(mesh.h <= 0.01 + 1e-15, "{}", mesh.h);
    assert!(mesh.quality >= 30.0 - 1e-9, "{}", mesh.quality);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn meshes_valid_for_random_holes(n in 1u32..6, r in 0.03f64..0.12, y in 0.15f64..0.25, h_frac in 0.1f64..0.2) {
        let spec = CellSpec::new(0.4, n, HoleShape::disk([0.0, y], r, 0.4));
        let eps = 1.0 / n as f64;
        let mesh = mesh_cell(&spec, h_frac * eps * 2.0 * r).unwrap();
        prop_assert!(mesh.quality >= MIN_ANGLE_DEG);
        prop_assert!((mesh.total_area() - mesh.domain_area()).abs() < 1e-10);
        check_periodic(&mesh);
    }
}
