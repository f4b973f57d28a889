use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use polariton_bench::desk_operator;
use polariton_core::operator::{apply_omega_sq, assemble_dense};
use polariton_core::perturbation::{kernel_l, KernelPath, KernelQuadrature};
use polariton_core::solver::{solve_all_columns, solve_ls};
use polariton_core::{BlockVector, Family, PhysicalConstants, RegularizationPolicy, Sign, SolveMethod};

fn operator_apply(c: &mut Criterion) {
    let op = desk_operator(2);
    let flat: Vec<Complex64> = (0..op.len()).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
    let x = BlockVector::from_flat(&flat, op.n_field());
    c.bench_function("apply_omega_sq", |b| b.iter(|| apply_omega_sq(&op, &x).unwrap()));
    c.bench_function("assemble_dense", |b| b.iter(|| assemble_dense(&op).unwrap()));
}

fn single_mode(c: &mut Criterion) {
    let op = desk_operator(1);
    let policy = RegularizationPolicy::complex_shift(Sign::Plus);
    let mut group = c.benchmark_group("solve_ls");
    for method in [SolveMethod::Structured, SolveMethod::Dense] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{method:?}")), &method, |b, m| {
            b.iter(|| solve_ls(&op, Family::E, 17, &policy, *m).unwrap())
        });
    }
    group.finish();
}

fn all_modes(c: &mut Criterion) {
    let policy = RegularizationPolicy::complex_shift(Sign::Plus);
    let mut group = c.benchmark_group("solve_all_columns");
    group.sample_size(10);
    for refine in [1, 2] {
        let op = desk_operator(refine);
        group.bench_with_input(BenchmarkId::from_parameter(op.len()), &op, |b, op| {
            b.iter(|| solve_all_columns(op, &policy, SolveMethod::Structured).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let consts = PhysicalConstants::natural();
    let r = [0.6, 0.2, -0.1];
    let mut quad = KernelQuadrature::auto(90.0, 0.7).unwrap();
    quad.window = Some(18.0);
    let mut group = c.benchmark_group("kernel_l");
    for path in [KernelPath::Direct, KernelPath::Decomposed] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{path:?}")), &path, |b, p| {
            b.iter(|| kernel_l(&quad, &consts, 1.0, [0.0; 3], r, Sign::Plus, *p).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, operator_apply, single_mode, all_modes, kernel);
criterion_main!(benches);
