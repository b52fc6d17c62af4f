use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nonlocal_heat::{
    assemble_diffusion, build_generator, build_grid, evaluate_phi, FieldSpec, ForcingSpec,
    GridFunction, PotentialSpec, ProblemSpec, SolverConfig, TimeProfile, WeightSpec,
};

fn line_problem(n: usize) -> ProblemSpec {
    let grid = build_grid(1, &[(0.0, 1.0)], &[n]).unwrap();
    let initial = FieldSpec::Sine {
        modes: vec![1],
        amplitude: 2.0,
    }
    .sample(&grid)
    .unwrap();
    let weight = WeightSpec::new(
        TimeProfile::Exponential {
            rate: 1.0,
            scale: 1.0,
        },
        GridFunction::constant(grid.clone(), 1.0),
    )
    .unwrap();
    ProblemSpec::new(
        grid,
        FieldSpec::Constant { value: 1.0 },
        PotentialSpec::Square { coeff: 1.0 },
        weight,
        ForcingSpec::zero(&initial),
        initial,
        2.0,
    )
    .unwrap()
}

fn resolvent_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("resolvent_solve");
    for &(dim, n) in &[(1, 256), (1, 4096), (2, 32), (2, 64)] {
        let ends = vec![(0.0, 1.0); dim];
        let grid = build_grid(dim, &ends, &vec![n; dim]).unwrap();
        let base = Arc::new(assemble_diffusion(grid.clone(), |_| 1.0).unwrap());
        let gen = build_generator(
            &base,
            &PotentialSpec::Square { coeff: 1.0 },
            &GridFunction::constant(grid.clone(), 0.5),
        )
        .unwrap();
        let res = gen.resolvent(1e-3).unwrap();
        let rhs = vec![1.0; grid.len()];
        group.bench_with_input(
            BenchmarkId::new(format!("{dim}d"), grid.len()),
            &rhs,
            |b, rhs| {
                b.iter(|| {
                    let mut v = rhs.clone();
                    res.apply_in_place(&mut v);
                    black_box(v)
                })
            },
        );
    }
    group.finish();
}

fn phi(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_phi");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    for n in [64, 256] {
        let problem = line_problem(n);
        let ubar = GridFunction::constant(problem.grid().clone(), 0.1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ubar, |b, u| {
            b.iter(|| evaluate_phi(black_box(u), &problem, &cfg).unwrap())
        });
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigenbasis");
    group.sample_size(10);
    for n in [64, 256] {
        let grid = build_grid(1, &[(0.0, 1.0)], &[n]).unwrap();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                let op = assemble_diffusion(grid.clone(), |x| 1.0 + x[0]).unwrap();
                black_box(op.spectral_bound().unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, resolvent_solve, phi, eigen);
criterion_main!(benches);
