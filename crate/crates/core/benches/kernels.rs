//! Kernel timings.
//!
//! With the default `parallel` feature every kernel is measured twice: on
//! rayon's global pool and inside a one-thread pool. Building with
//! `--no-default-features` measures the sequential fallback; the group names
//! carry the build flavour so criterion keeps the baselines apart.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pcurl_core::calculus::{curl, curl_adjoint, divergence};
use pcurl_core::harness::make_random_divfree_source;
use pcurl_core::lorentz::{lorentz_norm, MeasuredSample};
use pcurl_core::solver::{energy, energy_gradient, poisson_solve, random_constrained};
use pcurl_core::{BoxDomain, NodeField};

const SIZES: [usize; 2] = [32, 64];

fn flavour() -> &'static str {
    if pcurl_core::par::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

/// Run `f` on the default pool and, in parallel builds, on one thread.
fn variants(mut f: impl FnMut(&str, &dyn Fn(&mut (dyn FnMut() + Send)))) {
    f(flavour(), &|body| body());
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        f("parallel-1-thread", &|body| pool.install(|| body()));
    }
}

fn operators(c: &mut Criterion) {
    for n in SIZES {
        let g = BoxDomain::unit_cube(n).unwrap();
        let u = random_constrained(&g, 1);
        let w = curl(&u, &g).unwrap();
        variants(|label, run| {
            let mut group = c.benchmark_group(format!("operators/{label}"));
            group.bench_with_input(BenchmarkId::new("curl", n), &n, |b, _| {
                b.iter(|| {
                    run(&mut || {
                        black_box(curl(&u, &g).unwrap());
                    })
                })
            });
            group.bench_with_input(BenchmarkId::new("curl_adjoint", n), &n, |b, _| {
                b.iter(|| {
                    run(&mut || {
                        black_box(curl_adjoint(&w, &g).unwrap());
                    })
                })
            });
            group.bench_with_input(BenchmarkId::new("divergence", n), &n, |b, _| {
                b.iter(|| {
                    run(&mut || {
                        black_box(divergence(&u, &g).unwrap());
                    })
                })
            });
            group.finish();
        });
    }
}

fn energy_kernels(c: &mut Criterion) {
    for n in SIZES {
        let g = BoxDomain::unit_cube(n).unwrap();
        let u = random_constrained(&g, 2);
        let f = random_constrained(&g, 3);
        variants(|label, run| {
            let mut group = c.benchmark_group(format!("energy/{label}"));
            group.bench_with_input(BenchmarkId::new("energy_p3", n), &n, |b, _| {
                b.iter(|| {
                    run(&mut || {
                        black_box(energy(&u, &f, 3.0, 1e-4, &g).unwrap());
                    })
                })
            });
            group.bench_with_input(BenchmarkId::new("gradient_p3", n), &n, |b, _| {
                b.iter(|| {
                    run(&mut || {
                        black_box(energy_gradient(&u, &f, 3.0, 1e-4, &g).unwrap());
                    })
                })
            });
            group.finish();
        });
    }
}

fn poisson(c: &mut Criterion) {
    let n = 32;
    let g = BoxDomain::unit_cube(n).unwrap();
    let rhs = NodeField::sample(&g, |q| (q[0] * 7.0).sin() * q[1] * (1.0 - q[2]));
    variants(|label, run| {
        let mut group = c.benchmark_group(format!("poisson/{label}"));
        group.sample_size(10);
        group.bench_with_input(BenchmarkId::new("cg", n), &n, |b, _| {
            b.iter(|| {
                run(&mut || {
                    black_box(poisson_solve(&rhs, &g, 1e-10).unwrap());
                })
            })
        });
        group.finish();
    });
}

fn sources_and_norms(c: &mut Criterion) {
    let g = BoxDomain::unit_cube(32).unwrap();
    let mut group = c.benchmark_group(format!("setup/{}", flavour()));
    group.sample_size(10);
    group.bench_function("random_source_32", |b| {
        b.iter(|| black_box(make_random_divfree_source(&g, 1, 2, 1.0).unwrap()))
    });
    let pairs: Vec<(f64, f64)> = (0..32768)
        .map(|k| (((k * 7919) % 1000) as f64, 1.0))
        .collect();
    let sample = MeasuredSample::new(pairs).unwrap();
    group.bench_function("lorentz_31_32768", |b| {
        b.iter(|| black_box(lorentz_norm(&sample, 3.0, 1.0).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    operators,
    energy_kernels,
    poisson,
    sources_and_norms
);
criterion_main!(benches);
