use nalgebra::Matrix3;
use num_complex::Complex64;
use polariton_core::config::RunConfig;
use polariton_core::model::{epsilon_imag, DielectricAssignment};
use polariton_core::operator::{apply_omega_sq, assemble_dense};
use polariton_core::perturbation::{near_field_f, transverse_delta_far};
use polariton_core::quadrature::{gauss_legendre, richardson_weights};
use polariton_core::solver::solve_all;
use polariton_core::spectral::{direction, polarization_vectors};
use polariton_core::{
    build_grids, BlockVector, DielectricModel, GridConfig, MediumModel, OperatorHandle, PhysicalConstants,
    RegularizationPolicy, Sign, SolveMethod, Voxel,
};
use proptest::prelude::*;

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn small_operator(offset: [f64; 3], wp: f64, gamma: f64, scale: f64) -> OperatorHandle {
    let voxels = vec![
        Voxel { center: [0.0; 3], h: 0.3 },
        Voxel {
            center: [0.3 + offset[0], offset[1], offset[2]],
            h: 0.3,
        },
    ];
    let model = MediumModel::new(
        voxels,
        DielectricAssignment::Shared(DielectricModel::drude(wp, gamma)),
        PhysicalConstants::natural(),
    )
    .unwrap()
    .with_coupling_scale(scale);
    let grid = GridConfig {
        n_k: 3,
        n_theta: 2,
        n_eta: 2,
        n_nu: 3,
        k_max: 3.0,
        nu_min: 0.05,
        nu_max: 3.0,
    };
    let g = build_grids(&grid, &model, false).unwrap();
    OperatorHandle::new(model, g).unwrap()
}

fn block(op: &OperatorHandle, seed: &[f64]) -> BlockVector {
    let flat: Vec<Complex64> = (0..op.len())
        .map(|i| Complex64::new(seed[i % seed.len()] * (1.0 + i as f64).sin(), seed[(i + 1) % seed.len()]))
        .collect();
    BlockVector::from_flat(&flat, op.n_field())
}

fn trace(m: &Matrix3<f64>) -> f64 {
    m[(0, 0)] + m[(1, 1)] + m[(2, 2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn polarizations_are_orthonormal_and_transverse(theta in 0.0..std::f64::consts::PI, eta in 0.0..std::f64::consts::TAU) {
        let k = direction(theta, eta);
        let (p, m) = polarization_vectors(k).unwrap();
        prop_assert!((dot(p, p) - 1.0).abs() < 1e-12);
        prop_assert!((dot(m, m) - 1.0).abs() < 1e-12);
        prop_assert!(dot(p, m).abs() < 1e-12);
        prop_assert!(dot(p, k).abs() < 1e-12);
        prop_assert!(dot(m, k).abs() < 1e-12);
    }

    #[test]
    fn dipole_tensors_are_traceless_and_symmetric(
        x in -3.0..3.0f64, y in -3.0..3.0f64, z in 0.2..3.0f64, nu in 0.1..5.0f64,
    ) {
        let r = [x, y, z];
        let t = transverse_delta_far(r).unwrap();
        let f = near_field_f(&PhysicalConstants::natural(), nu, [0.0; 3], r).unwrap();
        for m in [t, f] {
            let s = m.amax();
            prop_assert!(trace(&m).abs() <= 1e-14 * s);
            prop_assert!((m - m.transpose()).amax() <= 1e-15 * s);
        }
        prop_assert!((f * (nu * nu) - t).amax() <= 1e-13 * t.amax());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials(n in 2usize..12, a in -2.0..0.0f64, len in 0.5..3.0f64, seed in proptest::collection::vec(-1.0..1.0f64, 24)) {
        let b = a + len;
        let rule = gauss_legendre(n, a, b).unwrap();
        let deg = 2 * n - 1;
        let coeffs = &seed[..=deg.min(23)];
        let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let exact: f64 = coeffs.iter().enumerate().map(|(k, c)| c * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0)).sum();
        let got = rule.integrate(p);
        prop_assert!((got - exact).abs() <= 1e-11 * (1.0 + exact.abs()), "{got} vs {exact}");
    }

    #[test]
    fn richardson_weights_reproduce_polynomials(e1 in 0.01..0.1f64, r2 in 0.1..0.9f64, r3 in 0.1..0.9f64, c0 in -1.0..1.0f64, c1 in -1.0..1.0f64, c2 in -1.0..1.0f64) {
        let etas = [e1, e1 * r2, e1 * r2 * r3];
        let w = richardson_weights(&etas);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let v: f64 = w.iter().zip(&etas).map(|(wi, e)| wi * (c0 + c1 * e + c2 * e * e)).sum();
        prop_assert!((v - c0).abs() < 1e-9);
    }

    #[test]
    fn permittivity_is_nonnegative(wp in 0.0..3.0f64, gamma in 0.01..2.0f64, w0 in 0.0..3.0f64, nu in 1e-3..10.0f64) {
        let m = DielectricModel::DrudeLorentz { terms: vec![polariton_core::LorentzTerm { plasma_freq: wp, damping: gamma, resonance: w0 }] };
        prop_assert!(epsilon_imag(&m, nu).unwrap() >= 0.0);
    }

    #[test]
    fn block_vector_flat_round_trip(seed in proptest::collection::vec(-1.0..1.0f64, 3..9), split in 0usize..10) {
        let flat: Vec<Complex64> = seed.iter().map(|x| Complex64::new(*x, -x * 0.5)).collect();
        let nf = split.min(flat.len());
        let b = BlockVector::from_flat(&flat, nf);
        prop_assert_eq!(b.to_flat(), flat);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn frequency_operator_is_self_adjoint(
        ox in 0.0..0.4f64, oy in -0.3..0.3f64, wp in 0.05..1.0f64, gamma in 0.1..1.0f64, scale in 0.0..2.0f64,
        sx in proptest::collection::vec(-1.0..1.0f64, 5), sy in proptest::collection::vec(-1.0..1.0f64, 5),
    ) {
        let op = small_operator([ox, oy, 0.0], wp, gamma, scale);
        let m = assemble_dense(&op).unwrap();
        prop_assert!((&m - m.transpose()).amax() <= 1e-12 * m.amax());
        let (x, y) = (block(&op, &sx), block(&op, &sy));
        let lhs = op.inner(&y, &apply_omega_sq(&op, &x).unwrap());
        let rhs = op.inner(&apply_omega_sq(&op, &y).unwrap(), &x);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn frequency_operator_is_linear(
        wp in 0.05..1.0f64, a_re in -2.0..2.0f64, a_im in -2.0..2.0f64,
        sx in proptest::collection::vec(-1.0..1.0f64, 4), sy in proptest::collection::vec(-1.0..1.0f64, 4),
    ) {
        let op = small_operator([0.0; 3], wp, 0.3, 1.0);
        let a = Complex64::new(a_re, a_im);
        let (x, y) = (block(&op, &sx), block(&op, &sy));
        let mut z = y.clone();
        z.axpy(a, &x);
        let lhs = apply_omega_sq(&op, &z).unwrap();
        let mut rhs = apply_omega_sq(&op, &y).unwrap();
        rhs.axpy(a, &apply_omega_sq(&op, &x).unwrap());
        let err = lhs.iter().zip(rhs.iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let s = rhs.iter().map(|p| p.norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * s);
    }

    #[test]
    fn opposite_signs_give_conjugate_eigenfunctions(wp in 0.05..0.5f64, gamma in 0.1..1.0f64, scale in 0.1..1.0f64) {
        let op = small_operator([0.0; 3], wp, gamma, scale);
        let plus = solve_all(&op, &RegularizationPolicy::complex_shift(Sign::Plus), SolveMethod::Structured).unwrap();
        let minus = solve_all(&op, &RegularizationPolicy::complex_shift(Sign::Minus), SolveMethod::Structured).unwrap();
        for (p, m) in plus.iter().zip(&minus) {
            let s = p.blocks.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let d = p.blocks.conj().iter().zip(m.blocks.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(d <= 1e-12 * s, "label {} deviates by {d:e}", p.index);
        }
    }

    #[test]
    fn config_round_trips_through_toml(seed in 0u64..1000, scale in 0.0..2.0f64, n_k in 1usize..20) {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml")).unwrap();
        let mut cfg = RunConfig::from_toml_str(&text).unwrap();
        cfg.seed = seed;
        cfg.medium.coupling_scale = scale;
        cfg.grid.n_k = n_k;
        let again = RunConfig::from_toml_str(&toml::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(again, cfg);
    }
}
