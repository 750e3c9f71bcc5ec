//! Planar p-Laplace oracle: regression baseline and agreement with the 3D solver.

use std::f64::consts::PI;
use std::path::PathBuf;

use pcurl_core::calculus::{cell_magnitude, curl};
use pcurl_core::dump;
use pcurl_core::harness::manufactured_source;
use pcurl_core::oracle2d::{
    compare_reduction, solve_plaplace, solve_plaplace_detailed, Grid2D, Scalar2DField,
};
use pcurl_core::solver::{solve, SolveResult, SolveStatus, SolverConfig};
use pcurl_core::{Array3, BoxDomain, EdgeField};

fn baseline_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/oracle_p3_unit_load_n64.field")
}

/// The p = 3 solution with unit load on a 64 x 64 grid is frozen on disk;
/// set `PCURL_BLESS=1` to regenerate it.
#[test]
fn unit_load_regression_baseline() {
    let g = Grid2D::unit_square(64).unwrap();
    let f = Scalar2DField::sample(g, |_, _| 1.0);
    let phi = solve_plaplace(&f, 3.0, 1e-11, &g).unwrap();
    let path = baseline_path();
    if std::env::var_os("PCURL_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        dump::write_node2d(&path, g.lengths(), g.cells(), phi.values()).unwrap();
    }
    let (header, data) = dump::read_raw(&path).expect("baseline missing; run with PCURL_BLESS=1");
    assert_eq!(header.kind, "node2d");
    assert_eq!(header.cells, vec![64, 64]);
    let stored = &data[0];
    let scale = phi.max_abs();
    let diff = stored
        .iter()
        .zip(phi.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-8 * scale, "baseline drift {diff}");
}

fn planar_result(phi: &Scalar2DField, g: &BoxDomain) -> SolveResult {
    let mut u = EdgeField::zeros(g);
    let e = u.z.extent();
    u.z = Array3::from_fn(e, |i, j, _| phi.get(i, j));
    let w = curl(&u, g).unwrap();
    let mag = cell_magnitude(&w, g).unwrap();
    SolveResult {
        u,
        curl_u: w,
        curl_mag: mag,
        energy: 0.0,
        projected_grad_norm: 0.0,
        weak_residual: 0.0,
        iterations: vec![0],
        terminal_eps: 0.0,
        status: SolveStatus::Converged,
        trace: vec![],
    }
}

#[test]
fn identical_fields_have_no_discrepancy() {
    let g2 = Grid2D::new([1.0, 1.5], [10, 12]).unwrap();
    let f = Scalar2DField::sample(g2, |x, y| 1.0 + x - y * y);
    let phi = solve_plaplace(&f, 2.5, 1e-9, &g2).unwrap();
    let g3 = BoxDomain::new([1.0, 1.5, 0.3], [10, 12, 3]).unwrap();
    let d = compare_reduction(&planar_result(&phi, &g3), &g3, &phi).unwrap();
    assert!(d <= 1e-12, "{d}");
}

#[test]
fn resolution_mismatch_is_rejected() {
    let g2 = Grid2D::unit_square(8).unwrap();
    let phi = Scalar2DField::zeros(g2);
    let g3 = BoxDomain::unit_cube(6).unwrap();
    assert!(compare_reduction(
        &planar_result(&Scalar2DField::zeros(Grid2D::unit_square(6).unwrap()), &g3),
        &g3,
        &phi
    )
    .is_err());
}

#[test]
fn poisson_case_agrees_with_3d_solver() {
    let n = 32;
    let g3 = BoxDomain::new([1.0, 1.0, 1.0], [n, n, 4]).unwrap();
    let r = solve(&manufactured_source(&g3), &SolverConfig::new(2.0), &g3).unwrap();
    let g2 = Grid2D::unit_square(n).unwrap();
    let f2 = Scalar2DField::sample(g2, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
    let phi = solve_plaplace(&f2, 2.0, 1e-10, &g2).unwrap();
    let d = compare_reduction(&r, &g3, &phi).unwrap();
    assert!(d <= 0.01, "{d}");
}

#[test]
fn p3_discrepancy_shrinks_under_refinement() {
    let mut last = f64::INFINITY;
    for n in [8, 16] {
        let g3 = BoxDomain::new([1.0, 1.0, 1.0], [n, n, 3]).unwrap();
        let mut f = EdgeField::sample(&g3, |q| [0.0, 0.0, (PI * q[0]).sin() * (PI * q[1]).sin()]);
        f.apply_constraint();
        let r = solve(&f, &SolverConfig::new(3.0), &g3).unwrap();
        let g2 = Grid2D::unit_square(n).unwrap();
        let f2 = Scalar2DField::sample(g2, |x, y| (PI * x).sin() * (PI * y).sin());
        let o = solve_plaplace_detailed(&f2, 3.0, 1e-10).unwrap();
        let d = compare_reduction(&r, &g3, &o.phi).unwrap();
        assert!(d < last, "N={n}: {d} !< {last}");
        last = d;
    }
    assert!(last < 0.02);
}
