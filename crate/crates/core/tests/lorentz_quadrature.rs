//! Lorentz norms against brute-force rearrangement and adaptive quadrature.

use pcurl_core::lorentz::{
    distribution_function, lorentz_norm, lorentz_norm_inf, lp_norm, rearrangement, Exponent,
    MeasuredSample,
};
use pcurl_core::{BoxDomain, CellField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// f*(t) = inf { s >= 0 : μ{|f| > s} <= t }, searched over the sample values.
fn brute_rearranged(pairs: &[(f64, f64)], t: f64) -> f64 {
    let mu = |s: f64| {
        pairs
            .iter()
            .filter(|(v, _)| *v > s)
            .map(|(_, w)| w)
            .sum::<f64>()
    };
    let mut candidates: Vec<f64> = pairs.iter().map(|(v, _)| *v).chain([0.0]).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.into_iter().find(|&s| mu(s) <= t).unwrap()
}

fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    simpson(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        40,
    )
}

/// ∫_0^μ (t^{1/m} f*(t))^p dt/t, substituting t = s^q with q = 2m/p so the
/// integrand is smooth at the origin, integrated piecewise between the jumps.
fn quadrature_norm(pairs: &[(f64, f64)], m: f64, p: f64) -> f64 {
    let q = 2.0 * m / p;
    let mut breaks: Vec<f64> = vec![0.0];
    let mut values: Vec<f64> = pairs.iter().map(|(v, _)| *v).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values.dedup();
    for v in values {
        let t: f64 = pairs.iter().filter(|(x, _)| *x >= v).map(|(_, w)| w).sum();
        breaks.push(t.powf(1.0 / q));
    }
    let integrand = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let t = s.powf(q);
        q * s.powf(q * p / m - 1.0) * brute_rearranged(pairs, t).powf(p)
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            // stay strictly inside each piece so the step value is unambiguous
            let d = (b - a) * 1e-12;
            total += integrate(&integrand, a + d, b - d, 1e-13);
        }
    }
    total.powf(1.0 / p)
}

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let v = if ties {
                rng.gen_range(0..4) as f64
            } else {
                rng.gen_range(0.0..5.0)
            };
            (v, rng.gen_range(0.05..2.0))
        })
        .collect()
}

#[test]
fn closed_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..24 {
        let pairs = random_pairs(&mut rng, 1 + case % 6, case % 3 == 0);
        let s = MeasuredSample::new(pairs.clone()).unwrap();
        for (m, p) in [(3.0, 1.0), (2.0, 3.0), (1.5, 1.0), (4.0, 2.5)] {
            let exact = lorentz_norm(&s, m, p).unwrap();
            let quad = quadrature_norm(&pairs, m, p);
            assert!(
                (exact - quad).abs() <= 1e-8 * exact.max(1.0),
                "case {case} m={m} p={p}: {exact} vs {quad}"
            );
        }
    }
}

#[test]
fn rearrangement_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..30 {
        let pairs = random_pairs(&mut rng, 1 + case % 7, case % 2 == 0);
        let s = MeasuredSample::new(pairs.clone()).unwrap();
        let r = rearrangement(&s).unwrap();
        for k in 0..50 {
            let t = r.total_measure() * (k as f64 + 0.37) / 50.0;
            assert_eq!(r.eval(t), brute_rearranged(&pairs, t), "case {case} t={t}");
        }
        for level in [0.0, 0.5, 1.0, 2.0, 3.0, 4.9] {
            let direct: f64 = pairs
                .iter()
                .filter(|(v, _)| *v > level)
                .map(|(_, w)| w)
                .sum();
            assert!(
                (distribution_function(&s, level).unwrap() - direct).abs()
                    <= 1e-12 * (1.0 + direct)
            );
            assert!((r.distribution(level) - direct).abs() <= 1e-12 * (1.0 + direct));
        }
    }
}

#[test]
fn indicator_and_two_step_values() {
    let v = 8.0;
    let s = MeasuredSample::new([(1.0, v)]).unwrap();
    assert!((lorentz_norm(&s, 3.0, 1.0).unwrap() - 3.0 * v.powf(1.0 / 3.0)).abs() < 1e-12);
    let s = MeasuredSample::new([(2.0, 1.0), (1.0, 7.0)]).unwrap();
    assert_eq!(lorentz_norm(&s, 3.0, 1.0).unwrap(), 9.0);
    assert_eq!(lorentz_norm_inf(&s, 3.0).unwrap(), 2.0);
}

#[test]
fn cell_samples_carry_cell_volumes() {
    let g = BoxDomain::new([2.0, 1.0, 0.5], [4, 2, 2]).unwrap();
    let c = CellField::sample(&g, |q| q[0] + q[1]);
    let s = MeasuredSample::from_cells(&c, &g).unwrap();
    assert_eq!(s.len(), 16);
    assert!((s.total_measure() - 1.0).abs() < 1e-14);
    let l1 = lp_norm(&s, Exponent::Finite(1.0)).unwrap();
    let direct: f64 = c
        .values
        .data()
        .iter()
        .map(|v| v.abs() * g.cell_volume())
        .sum();
    assert!((l1 - direct).abs() < 1e-13);
}
