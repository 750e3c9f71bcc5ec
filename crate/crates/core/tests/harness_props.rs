//! Estimate reports, sweeps and the manufactured convergence study.

use std::f64::consts::PI;

use pcurl_core::harness::{
    convergence_study, estimate_report, reports_csv, run_sweep, verify_linfty_estimate,
    verify_lp_estimate, SolverOverrides, SourceFamily, SweepSpec, CSV_HEADER,
};
use pcurl_core::BoxDomain;

fn spec(source: SourceFamily, p_values: Vec<f64>, resolutions: Vec<usize>) -> SweepSpec {
    SweepSpec {
        p_values,
        resolutions,
        lengths: [1.0; 3],
        source,
        seeds: vec![0],
        lambdas: vec![1.0],
        solver: SolverOverrides::default(),
    }
}

#[test]
fn manufactured_estimates_are_stable() {
    let s = spec(SourceFamily::Manufactured, vec![2.0], vec![16, 32]);
    let v = verify_linfty_estimate(&s).unwrap();
    assert!(v.flags.is_empty());
    let (coarse, fine) = (&v.reports[0], &v.reports[1]);
    assert_eq!(fine.cells, [32; 3]);
    assert!(
        (fine.norm_curl_inf / PI - 1.0).abs() <= 0.02,
        "{}",
        fine.norm_curl_inf
    );
    let growth = fine.c_emp_inf.unwrap() / coarse.c_emp_inf.unwrap() - 1.0;
    assert!(growth.abs() <= 0.05, "{growth}");

    let v = verify_lp_estimate(&s).unwrap();
    let fine = &v.reports[1];
    assert!(
        (fine.norm_curl_p / (PI / 2f64.sqrt()) - 1.0).abs() <= 0.02,
        "{}",
        fine.norm_curl_p
    );
    assert!(v.reports.iter().all(|r| r.norm_comparison_ok));
    assert!(v.flags.is_empty());
}

#[test]
fn ratios_are_invariant_under_source_scaling() {
    let mut s = spec(
        SourceFamily::RandomDivFree {
            smoothness: 2,
            amplitude: 1.0,
        },
        vec![1.5, 3.0],
        vec![8],
    );
    s.lambdas = vec![1.0, 4.0, 16.0];
    let reports = run_sweep(&s).unwrap();
    assert_eq!(reports.len(), 6);
    for p in [1.5, 3.0] {
        let group: Vec<_> = reports.iter().filter(|r| r.p == p).collect();
        let (ci, cp) = (group[0].c_emp_inf.unwrap(), group[0].c_emp_p.unwrap());
        for r in &group {
            assert!(r.converged());
            assert!(
                (r.c_emp_inf.unwrap() / ci - 1.0).abs() <= 1e-3,
                "p={p} lambda={}",
                r.lambda
            );
            assert!(
                (r.c_emp_p.unwrap() / cp - 1.0).abs() <= 1e-3,
                "p={p} lambda={}",
                r.lambda
            );
            assert!(r.norm_comparison_ok);
        }
    }
}

#[test]
fn sweeps_are_reproducible_and_ordered() {
    let mut s = spec(
        SourceFamily::RandomDivFree {
            smoothness: 1,
            amplitude: 2.0,
        },
        vec![3.0, 2.0],
        vec![8, 6],
    );
    s.seeds = vec![5, 1];
    let a = run_sweep(&s).unwrap();
    let b = run_sweep(&s).unwrap();
    assert_eq!(reports_csv(&a), reports_csv(&b));
    assert_eq!(a.len(), 8);
    let keys: Vec<_> = a.iter().map(|r| (r.seed, r.p, r.cells[0])).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    assert_eq!(keys, sorted);
    let csv = reports_csv(&a);
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn invalid_sweeps_are_rejected() {
    let base = spec(SourceFamily::Zero, vec![2.0], vec![4]);
    for broken in [
        SweepSpec {
            p_values: vec![],
            ..base.clone()
        },
        SweepSpec {
            p_values: vec![1.0],
            ..base.clone()
        },
        SweepSpec {
            resolutions: vec![],
            ..base.clone()
        },
        SweepSpec {
            resolutions: vec![1],
            ..base.clone()
        },
        SweepSpec {
            lambdas: vec![0.0],
            ..base.clone()
        },
        SweepSpec {
            seeds: vec![],
            ..base.clone()
        },
    ] {
        assert!(run_sweep(&broken).is_err(), "{broken:?}");
    }
}

#[test]
fn zero_source_ratio_is_undefined() {
    let g = BoxDomain::unit_cube(4).unwrap();
    let r = estimate_report(
        2.0,
        &g,
        &SourceFamily::Zero,
        0,
        1.0,
        &SolverOverrides::default(),
    );
    assert_eq!((r.c_emp_inf, r.c_emp_p), (None, None));
    assert!(reports_csv(&[r])
        .lines()
        .nth(1)
        .unwrap()
        .contains(",nan,nan,"));
}

#[test]
fn failures_are_recorded_per_configuration() {
    let mut s = spec(
        SourceFamily::RandomDivFree {
            smoothness: 2,
            amplitude: 1.0,
        },
        vec![3.0],
        vec![6, 8],
    );
    s.solver.max_iters = Some(2);
    let reports = run_sweep(&s).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| !r.converged() && r.error.is_some()));
}

#[test]
fn convergence_study_is_second_order() {
    let t = convergence_study(&[8, 16, 32], [1.0; 3], &SolverOverrides::default()).unwrap();
    assert_eq!(t.order_rows(), 2);
    for w in t.rows.windows(2) {
        assert!(w[1].err_u_max < w[0].err_u_max);
        assert!(w[1].err_u_l2 < w[0].err_u_l2);
        assert!(w[1].err_curl_max < w[0].err_curl_max);
        assert!(w[1].err_curl_l2 < w[0].err_curl_l2);
    }
    let last = t.rows.last().unwrap();
    assert!(last.order_curl_max.unwrap() >= 1.8, "{:?}", last);
    assert!(last.order_u_max.unwrap() >= 1.8, "{:?}", last);
}
