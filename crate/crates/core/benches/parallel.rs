//! Sequential versus rayon execution of the data-parallel kernels.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wap_homog::ap::{besicovitch_seminorm, from_fn, TrigPolynomial, TrigTerm};
use wap_homog::corrector::{estimate_effective, CorrectorOptions, DEFAULT_DELTAS};
use wap_homog::exec;
use wap_homog::fields::{Phase, QuasiPeriodicEnsemble};
use wap_homog::operators::{CoefficientField, EllipticOperator, PucciKind, ScalarField, SymMatrix};
use wap_homog::solver::{self, Method, SolveOptions};

const MODES: [(&str, bool); 2] = [("sequential", true), ("parallel", false)];

fn two_plus_sin() -> EllipticOperator {
    let profile = TrigPolynomial::new(1, 2.0, vec![TrigTerm::new(vec![1.0], 0.0, 1.0)]).unwrap();
    let e = QuasiPeriodicEnsemble::new(vec![vec![1.0]], vec![profile]).unwrap();
    EllipticOperator::linear(1, 1.0, 3.0, CoefficientField::Isotropic(ScalarField::Channel(Arc::new(e), 0))).unwrap()
}

fn corrector(c: &mut Criterion) {
    let op = two_plus_sin();
    let opts = CorrectorOptions::new(1e-2, 1e-6);
    let mut g = c.benchmark_group("effective_1d");
    g.sample_size(10);
    for (name, seq) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_sequential(seq);
            b.iter(|| estimate_effective(&op, &Phase::zero(1), &SymMatrix::scalar(1.0), &DEFAULT_DELTAS, &opts).unwrap())
        });
    }
    g.finish();
    exec::set_sequential(false);
}

fn pucci_solve(c: &mut Criterion) {
    let op = EllipticOperator::pucci(2, PucciKind::Plus, 1.0, 2.0).unwrap();
    let opts = SolveOptions {
        method: Method::Direct,
        ..SolveOptions::default()
    };
    let g_bc = |x: &[f64]| (3.0 * x[0]).sin() * x[1] + x[0] * x[0];
    let mut g = c.benchmark_group("pucci_2d_solve");
    g.sample_size(10);
    for (name, seq) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_sequential(seq);
            b.iter(|| solver::solve_dirichlet(&op, &Phase::zero(1), 1.0, &[0.0, 0.0], &[1.0, 1.0], &g_bc, 1.0 / 64.0, &opts).unwrap())
        });
    }
    g.finish();
    exec::set_sequential(false);
}

fn seminorm(c: &mut Criterion) {
    let f = from_fn(1, |y: &[f64]| y[0].cos() + (std::f64::consts::SQRT_2 * y[0]).sin());
    let mut g = c.benchmark_group("seminorm");
    g.sample_size(10);
    for (name, seq) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_sequential(seq);
            b.iter(|| besicovitch_seminorm(&f, 2.0, &[250.0, 500.0, 1000.0], 400_000, 1e-2).unwrap())
        });
    }
    g.finish();
    exec::set_sequential(false);
}

criterion_group!(benches, corrector, pucci_solve, seminorm);
criterion_main!(benches);
