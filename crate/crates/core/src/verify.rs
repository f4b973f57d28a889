//! Property-test battery producing a machine-readable verdict.
//!
//! Every tolerance is a constant fixed here, before any check runs. Checks
//! execute sequentially in a fixed order and the verdict is keyed by check
//! name in a sorted map, so identical configurations give identical JSON.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::linalg::identity_defect;
use crate::model::{voxelize, DielectricModel, MediumModel, Shape};
use crate::observables::{
    bulk_identity_residual, efield_mode_map, free_field_coefficients, log_log_slope, spectral_report,
};
use crate::operator::{assemble_dense, OperatorHandle};
use crate::perturbation::{
    first_order_psi, kernel_l, omega_integral_g, pv_quadrature, transverse_delta_far, KernelPath, KernelQuadrature,
};
use crate::quadrature::gauss_legendre;
use crate::regularization::{singular_weights, Interp, RegularizationPolicy, Sign};
use crate::solver::{assemble_wave_operator, solve_all, solve_all_columns, SolveMethod, WaveOperatorMatrix};
use crate::spectral::{build_grids, GridConfig, Vec3};

pub const ZERO_COUPLING_TOL: f64 = 1e-14;
pub const ZERO_COUPLING_FIELD_TOL: f64 = 1e-12;
pub const SLOPE_TARGET: f64 = 2.0;
pub const SLOPE_TOL: f64 = 0.1;
pub const ORDER_SCALES: [f64; 3] = [0.1, 0.05, 0.025];
pub const UNITARITY_TOL: f64 = 1e-3;
pub const SIGN_SYMMETRY_FACTOR: f64 = 2.0;
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Agreement between the structured and dense solvers on the residual system.
pub const DENSE_AGREEMENT_TOL: f64 = 1e-8;
pub const KERNEL_TOL: f64 = 1e-6;
pub const DELTA_TOL: f64 = 1e-3;
/// Separation window (voxel lengths) and minimum `k_max d` for the delta check.
pub const DELTA_SEPARATIONS: [f64; 2] = [2.0, 10.0];
pub const DELTA_MIN_RESOLUTION: f64 = 50.0;
pub const PV_TOL: f64 = 1e-4;
pub const BULK_FLOOR: f64 = 0.5;
pub const DENSITY_TOL: f64 = 0.02;
pub const EIGEN_FLOOR: f64 = 1e-8;
pub const TWO_POINT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    /// Refinement or study series backing the verdict, if any.
    pub trend: Vec<f64>,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, value: f64, tol: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            pass,
            trend: Vec::new(),
            detail: String::new(),
        }
    }

    fn with_trend(mut self, trend: Vec<f64>) -> Self {
        self.trend = trend;
        self
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn failed(name: &str, tol: f64, err: &Error) -> Self {
        Self::new(name, f64::NAN, tol, false).with_detail(err.to_string())
    }
}

pub type Verdict = BTreeMap<String, CheckResult>;

/// Entry of the verdict JSON.
#[derive(Debug, Clone, Serialize)]
struct VerdictEntry<'a> {
    value: Option<f64>,
    tol: f64,
    pass: bool,
    trend: &'a [f64],
    #[serde(skip_serializing_if = "str::is_empty")]
    detail: &'a str,
}

/// `{name -> {value, tol, pass, trend}}`, keys sorted.
pub fn verdict_json(verdict: &Verdict) -> String {
    let map: BTreeMap<&str, VerdictEntry> = verdict
        .iter()
        .map(|(k, c)| {
            (
                k.as_str(),
                VerdictEntry {
                    value: c.value.is_finite().then_some(c.value),
                    tol: c.tol,
                    pass: c.pass,
                    trend: &c.trend,
                    detail: &c.detail,
                },
            )
        })
        .collect();
    serde_json::to_string_pretty(&map).expect("verdict serializes")
}

pub fn all_pass(verdict: &Verdict) -> bool {
    verdict.values().all(|c| c.pass)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn operator(model: MediumModel, grid: &GridConfig, cap: usize) -> Result<OperatorHandle> {
    let g = build_grids(grid, &model, false)?;
    Ok(OperatorHandle::new(model, g)?.with_dense_cap(cap))
}

fn desk_operator(cfg: &RunConfig, scale: f64, grid: &GridConfig) -> Result<OperatorHandle> {
    let m = cfg.medium.build()?;
    let s = m.coupling_scale * scale;
    operator(m.with_coupling_scale(s), grid, cfg.solver.dense_cap)
}

/// Unitarity and completeness defects of one wave operator.
pub fn check_orthonormality(w: &WaveOperatorMatrix, tol: f64) -> CheckResult {
    let value = w.unitarity_defect.max(w.completeness_defect);
    CheckResult::new("orthonormality", value, tol, value <= tol)
        .with_trend(vec![w.unitarity_defect, w.completeness_defect])
}

/// Zero coupling: the wave operator is the identity.
pub fn check_zero_coupling(cfg: &RunConfig) -> Result<CheckResult> {
    let op = desk_operator(cfg, 0.0, &cfg.grid)?;
    let w = assemble_wave_operator(&op, &cfg.solver.policy(), cfg.solver.method)?;
    let value = identity_defect(&w.matrix)
        .max(w.unitarity_defect)
        .max(w.completeness_defect);
    Ok(CheckResult::new(
        "zero_coupling_wave_operator",
        value,
        ZERO_COUPLING_TOL,
        value <= ZERO_COUPLING_TOL,
    ))
}

/// Zero coupling: the m-family field vanishes and the e-family is the free field.
pub fn check_zero_coupling_field(cfg: &RunConfig) -> Result<CheckResult> {
    let op = desk_operator(cfg, 0.0, &cfg.grid)?;
    let sols = solve_all(&op, &cfg.solver.policy(), cfg.solver.method)?;
    let pts = &cfg.verify.points;
    let map = efield_mode_map(&op, &sols, pts)?;
    let free = free_field_coefficients(&op, pts);
    let mut m_max = 0.0f64;
    for row in &map.m {
        for c in row {
            for z in c {
                m_max = m_max.max(z.norm());
            }
        }
    }
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (a, b) in map.e.iter().zip(&free) {
        for (x, y) in a.iter().zip(b) {
            for i in 0..3 {
                diff = diff.max((x[i] - y[i]).norm());
                scale = scale.max(y[i].norm());
            }
        }
    }
    let rel = if scale > 0.0 { diff / scale } else { diff };
    let value = rel.max(m_max);
    Ok(CheckResult::new(
        "zero_coupling_field_map",
        value,
        ZERO_COUPLING_FIELD_TOL,
        value <= ZERO_COUPLING_FIELD_TOL,
    )
    .with_detail(format!("m-family max {m_max:.3e}; e-family relative deviation {rel:.3e}")))
}

/// Distance between full and first-order eigenfunctions over every label,
/// in the symmetrized (unit-normalized) coordinates.
fn first_order_distance(op: &OperatorHandle, policy: &RegularizationPolicy, method: SolveMethod) -> Result<f64> {
    let (cols, _) = solve_all_columns(op, policy, method)?;
    let w = op.weights();
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut total = 0.0;
    for (col, x) in cols.iter().enumerate() {
        let (family, index) = if col < op.n_field() {
            (crate::solver::Family::E, col)
        } else {
            (crate::solver::Family::M, col - op.n_field())
        };
        let p1 = first_order_psi(op, family, index, policy)?;
        for ((xi, yi), s) in x.iter().zip(p1.blocks.iter()).zip(&sw) {
            total += (xi - yi * (s * sw[col])).norm_sqr();
        }
    }
    Ok(total.sqrt())
}

/// Log-log slope of `||psi_full - psi_first_order||` against the coupling scale.
pub fn check_order_scaling(cfg: &RunConfig) -> Result<CheckResult> {
    let policy = cfg.solver.policy();
    let mut errs = Vec::new();
    for s in ORDER_SCALES {
        let op = desk_operator(cfg, s, &cfg.grid)?;
        errs.push(first_order_distance(&op, &policy, cfg.solver.method)?);
    }
    let slope = log_log_slope(&ORDER_SCALES, &errs).unwrap_or(f64::NAN);
    let monotone = strictly_decreasing(&errs);
    let pass = monotone && (slope - SLOPE_TARGET).abs() <= SLOPE_TOL;
    Ok(CheckResult::new("order_scaling", slope, SLOPE_TOL, pass)
        .with_trend(errs)
        .with_detail(format!(
            "slope over scales {ORDER_SCALES:?} must be within {SLOPE_TOL} of {SLOPE_TARGET}; error curve monotone: {monotone}"
        )))
}

/// Unitarity and completeness over factor-2 refinements, plus the W+/W- comparison.
pub fn check_unitarity(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let policy = RegularizationPolicy::finite_shift(cfg.solver.unitarity_shift, Sign::Plus);
    let v = &cfg.verify;
    let (mut unit, mut compl) = (Vec::new(), Vec::new());
    let mut level = cfg.grid.clone();
    let mut first = None;
    for l in 0..v.refinement_levels {
        if l > 0 {
            level = level.refined(v.refinement_factor);
        }
        let op = desk_operator(cfg, 1.0, &level)?;
        let w = assemble_wave_operator(&op, &policy, cfg.solver.method)?;
        unit.push(w.unitarity_defect);
        compl.push(w.completeness_defect);
        if first.is_none() {
            let wm = assemble_wave_operator(&op, &policy.with_sign(Sign::Minus), cfg.solver.method)?;
            first = Some((w.unitarity_defect, wm.unitarity_defect));
        }
    }
    let last = unit.last().copied().unwrap_or(f64::NAN).max(compl.last().copied().unwrap_or(f64::NAN));
    let monotone = strictly_decreasing(&unit) && strictly_decreasing(&compl);
    let mut trend = unit.clone();
    trend.extend(&compl);
    let refinement = CheckResult::new("unitarity_refinement", last, UNITARITY_TOL, monotone && last <= UNITARITY_TOL)
        .with_trend(trend)
        .with_detail(format!(
            "trend lists {} unitarity defects then {} completeness defects; both must decrease",
            unit.len(),
            compl.len()
        ));
    let (dp, dm) = first.expect("at least one level");
    let ratio = if dp.min(dm) > 0.0 { dp.max(dm) / dp.min(dm) } else { 1.0 };
    let symmetry = CheckResult::new("unitarity_sign_symmetry", ratio, SIGN_SYMMETRY_FACTOR, ratio <= SIGN_SYMMETRY_FACTOR)
        .with_trend(vec![dp, dm]);
    Ok(vec![refinement, symmetry])
}

/// Largest eigen-residual on the desk system, cross-checked against dense LU.
pub fn check_eigen_residuals(cfg: &RunConfig) -> Result<CheckResult> {
    let op = desk_operator(cfg, 1.0, &cfg.grid)?;
    let policy = cfg.solver.policy();
    let sols = solve_all(&op, &policy, cfg.solver.method)?;
    let report = spectral_report(&op, &sols)?;
    let (a, _) = solve_all_columns(&op, &policy, cfg.solver.method)?;
    let (b, _) = solve_all_columns(&op, &policy, SolveMethod::Dense)?;
    let mut diff = 0.0f64;
    for (x, y) in a.iter().zip(&b) {
        let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let d = x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        diff = diff.max(d / scale);
    }
    let pass = report.max_residual <= RESIDUAL_TOL && diff <= DENSE_AGREEMENT_TOL;
    Ok(CheckResult::new("eigen_residual", report.max_residual, RESIDUAL_TOL, pass)
        .with_trend(vec![report.max_residual, diff])
        .with_detail(format!(
            "trend: max residual, max relative deviation from dense LU (tol {DENSE_AGREEMENT_TOL:e})"
        )))
}

fn random_directions(seed: u64, n: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).sqrt();
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

fn voxel_length(cfg: &RunConfig) -> Result<f64> {
    Ok(cfg.medium.build()?.voxels[0].h)
}

fn kernel_quadrature(k_max: f64, d_max: f64, ratio: f64) -> Result<KernelQuadrature> {
    let mut q = KernelQuadrature::auto(k_max, d_max)?;
    q.window = Some(k_max / ratio);
    Ok(q)
}

fn rel_max<T>(a: &nalgebra::Matrix3<T>, b: &nalgebra::Matrix3<T>, norm: impl Fn(T) -> f64) -> f64
where
    T: Copy + std::ops::Sub<Output = T>,
{
    let mut d = 0.0f64;
    let mut s = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        d = d.max(norm(*x - *y));
        s = s.max(norm(*y));
    }
    d / s
}

/// `L` by direct quadrature against `(nu^2/c^2)(G0 + F_nf)`.
pub fn check_kernel_paths(cfg: &RunConfig) -> Result<CheckResult> {
    let k = &cfg.verify.kernel;
    let h = voxel_length(cfg)?;
    let consts = cfg.medium.build()?.constants;
    let seps: Vec<f64> = k.separations.iter().map(|s| s * h).collect();
    let d_min = seps.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = seps.iter().copied().fold(0.0, f64::max);
    let quad = kernel_quadrature(k.resolution / d_min, d_max, k.window_ratio)?;
    let dirs = random_directions(cfg.seed, k.directions);
    let mut worst = 0.0f64;
    let mut trend = Vec::new();
    for &d in &seps {
        let mut at_d = 0.0f64;
        for &nu in &k.frequencies {
            for n in &dirs {
                let r = [d * n[0], d * n[1], d * n[2]];
                let a = kernel_l(&quad, &consts, nu, [0.0; 3], r, Sign::Plus, KernelPath::Direct)?;
                let b = kernel_l(&quad, &consts, nu, [0.0; 3], r, Sign::Plus, KernelPath::Decomposed)?;
                at_d = at_d.max(rel_max(&a, &b, |z: Complex64| z.norm()));
            }
        }
        trend.push(at_d);
        worst = worst.max(at_d);
    }
    Ok(CheckResult::new("kernel_l_paths", worst, KERNEL_TOL, worst <= KERNEL_TOL)
        .with_trend(trend)
        .with_detail("trend: worst relative deviation per separation"))
}

/// Radial integral of `g` against the far part of the transverse delta, with
/// a halved-cutoff control that must do worse.
pub fn check_transverse_delta(cfg: &RunConfig) -> Result<CheckResult> {
    let k = &cfg.verify.kernel;
    let h = voxel_length(cfg)?;
    let consts = cfg.medium.build()?.constants;
    let seps: Vec<f64> = k
        .separations
        .iter()
        .filter(|s| **s >= DELTA_SEPARATIONS[0] && **s <= DELTA_SEPARATIONS[1])
        .map(|s| s * h)
        .collect();
    if seps.is_empty() {
        return Err(Error::Config(format!(
            "no kernel separation inside {DELTA_SEPARATIONS:?} voxel lengths"
        )));
    }
    let d_min = seps.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = seps.iter().copied().fold(0.0, f64::max);
    let resolution = k.resolution.max(DELTA_MIN_RESOLUTION);
    let dirs = random_directions(cfg.seed.wrapping_add(1), k.directions);
    let run = |k_max: f64| -> Result<f64> {
        let quad = kernel_quadrature(k_max, d_max, k.window_ratio)?;
        let mut worst = 0.0f64;
        for &d in &seps {
            for n in &dirs {
                let r = [d * n[0], d * n[1], d * n[2]];
                let q = omega_integral_g(&quad, &consts, [0.0; 3], r)?;
                let e = transverse_delta_far(r)?;
                worst = worst.max(rel_max(&q, &e, |x: f64| x.abs()));
            }
        }
        Ok(worst)
    };
    let k_max = resolution / d_min;
    let full = run(k_max)?;
    let half = run(k_max / 2.0)?;
    Ok(CheckResult::new("transverse_delta", full, DELTA_TOL, full <= DELTA_TOL && half > full)
        .with_trend(vec![full, half])
        .with_detail(format!("k_max d_min = {resolution}; trend: full cutoff, halved cutoff")))
}

/// Extrapolated complex shifts against principal value plus delta term on
/// Gaussian test functions.
pub fn check_sokhotski_plemelj() -> Result<CheckResult> {
    let rule = gauss_legendre(64, 0.0, 4.0)?;
    let gaussians = [(1.0, 0.3), (2.0, 0.5), (1.5, 0.2)];
    let lambdas = [0.7, 1.3, 2.1, 3.3];
    let mut worst = 0.0f64;
    for sign in [Sign::Plus, Sign::Minus] {
        let shift = RegularizationPolicy::complex_shift(sign);
        for &(mu, s) in &gaussians {
            let f: Vec<f64> = rule.nodes.iter().map(|x| (-(x - mu) * (x - mu) / (2.0 * s * s)).exp()).collect();
            for &lam in &lambdas {
                let w = singular_weights(&rule, lam, &shift, Interp::Lagrange);
                let a: Complex64 = w.iter().zip(&f).map(|(wb, fb)| wb * fb).sum();
                let b = pv_quadrature(&f, lam, &rule, sign)?;
                worst = worst.max((a - b).norm() / b.norm());
            }
        }
    }
    Ok(CheckResult::new("sokhotski_plemelj", worst, PV_TOL, worst <= PV_TOL))
}

/// Ratio `||LHS - Im G0|| / ||Im G0||` over growing slabs.
pub fn check_bulk_identity(cfg: &RunConfig) -> Result<CheckResult> {
    let b = &cfg.verify.bulk;
    let consts = cfg.medium.build()?.constants;
    let mut ratios = Vec::new();
    for &t in &b.thicknesses {
        let shape = Shape::Slab {
            center: [0.0; 3],
            thickness: t,
            lateral: b.lateral,
        };
        let eps = DielectricModel::Constant {
            value: b.epsilon_imag,
            band: [0.0, 10.0 * b.nu],
        };
        let model = voxelize(&shape, b.h, eps, consts)?;
        let top = model.voxels.iter().map(|v| v.center[2] + v.h / 2.0).fold(f64::NEG_INFINITY, f64::max);
        let ra = [0.0, 0.0, top + b.height];
        let rb = [b.offset, 0.0, top + b.height];
        let d_min = (b.height + b.h / 2.0).min(b.offset);
        let d_max = model
            .voxels
            .iter()
            .map(|v| {
                let d = [v.center[0] - ra[0], v.center[1] - ra[1], v.center[2] - ra[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .fold(0.0, f64::max)
            + b.offset;
        let quad = kernel_quadrature(cfg.verify.kernel.resolution / d_min, d_max, cfg.verify.kernel.window_ratio)?;
        let r = bulk_identity_residual(&quad, &model, b.nu, ra, rb, Sign::Minus)?;
        ratios.push(r.ratio);
    }
    let pass = ratios[0] >= BULK_FLOOR && strictly_decreasing(&ratios);
    Ok(CheckResult::new("bulk_identity", ratios[0], BULK_FLOOR, pass)
        .with_trend(ratios)
        .with_detail("smallest medium must fail the identity (ratio >= tol); ratios must decrease as the slab grows"))
}

fn smoothed_l1(a: &[f64], b: &[f64], width: f64) -> f64 {
    let top = a.iter().chain(b).copied().fold(0.0, f64::max) + 5.0 * width;
    let n = 4000;
    let dens = |xs: &[f64], x: f64| -> f64 {
        xs.iter()
            .map(|l| (-(x - l) * (x - l) / (2.0 * width * width)).exp())
            .sum()
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let x = -5.0 * width + (top + 5.0 * width) * i as f64 / n as f64;
        let (p, q) = (dens(a, x), dens(b, x));
        num += (p - q).abs();
        den += q;
    }
    num / den
}

/// Dense eigendecomposition of the symmetrized `Omega^2` against the LS inventory.
pub fn check_dense_oracle(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let op = desk_operator(cfg, 1.0, &cfg.grid)?;
    let m = assemble_dense(&op)?;
    let eig = SymmetricEigen::new(m.clone());
    let scale = m.amax();
    let min = eig.eigenvalues.min() / scale;
    let floor = CheckResult::new("dense_min_eigenvalue", min, EIGEN_FLOOR, min >= -EIGEN_FLOOR);

    let policy = cfg.solver.policy();
    let sols = solve_all(&op, &policy, cfg.solver.method)?;
    let report = spectral_report(&op, &sols)?;
    let ls: Vec<f64> = report
        .e_family
        .iter()
        .map(|e| e.omega)
        .chain(report.m_family.iter().map(|e| e.nu))
        .collect();
    let dense: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    let l1 = smoothed_l1(&dense, &ls, cfg.verify.density_width);
    let density = CheckResult::new("dense_spectral_density", l1, DENSITY_TOL, l1 <= DENSITY_TOL)
        .with_detail(format!("Gaussian width {}", cfg.verify.density_width));

    // Two-point function of the field: sum over modes of w c(r) c(r')^dag
    // against B(r)^T [M^{-1/2}]_{field} B(r').
    let pts = &cfg.verify.points;
    let map = efield_mode_map(&op, &sols, pts)?;
    let inv_sqrt = {
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt()));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    };
    let nf = op.n_field();
    let k = &op.model.constants;
    let pref = -(k.hbar / (2.0 * k.eps0)).sqrt();
    let bmat: Vec<DMatrix<f64>> = pts
        .iter()
        .map(|&r| {
            DMatrix::from_fn(nf, 3, |kappa, i| {
                let phi = crate::spectral::basis_eval(&op.grid.field[kappa], r);
                op.field_weights()[kappa].sqrt() * pref * op.omega()[kappa] * phi[i]
            })
        })
        .collect();
    let xff = inv_sqrt.view((0, 0), (nf, nf)).into_owned();
    let (mut diff, mut mag) = (0.0f64, 0.0f64);
    for p in 0..pts.len() {
        for q in 0..pts.len() {
            let dense_t = bmat[p].transpose() * &xff * &bmat[q];
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (rows, w) in [(&map.e, &map.e_weights), (&map.m, &map.m_weights)] {
                        for (a, (b, wa)) in rows[p].iter().zip(rows[q].iter().zip(w.iter())) {
                            s += a[i] * b[j].conj() * *wa;
                        }
                    }
                    diff = diff.max((s - dense_t[(i, j)]).norm());
                    mag = mag.max(dense_t[(i, j)].abs());
                }
            }
        }
    }
    let rel = diff / mag;
    let two_point = CheckResult::new("dense_two_point", rel, TWO_POINT_TOL, rel <= TWO_POINT_TOL);
    Ok(vec![floor, density, two_point])
}

/// Runs every check in a fixed order. Configuration errors propagate; any
/// other failure is recorded as a failed check.
pub fn run_battery(cfg: &RunConfig) -> Result<Verdict> {
    cfg.validate()?;
    let mut out = Verdict::new();
    let mut record = |name: &str, tol: f64, r: Result<Vec<CheckResult>>| -> Result<()> {
        match r {
            Ok(list) => {
                for c in list {
                    out.insert(c.name.clone(), c);
                }
                Ok(())
            }
            Err(e) if e.is_input_error() => Err(e),
            Err(e) => {
                out.insert(name.into(), CheckResult::failed(name, tol, &e));
                Ok(())
            }
        }
    };
    record("zero_coupling_wave_operator", ZERO_COUPLING_TOL, check_zero_coupling(cfg).map(|c| vec![c]))?;
    record("zero_coupling_field_map", ZERO_COUPLING_FIELD_TOL, check_zero_coupling_field(cfg).map(|c| vec![c]))?;
    record("order_scaling", SLOPE_TOL, check_order_scaling(cfg).map(|c| vec![c]))?;
    record("unitarity_refinement", UNITARITY_TOL, check_unitarity(cfg))?;
    record("eigen_residual", RESIDUAL_TOL, check_eigen_residuals(cfg).map(|c| vec![c]))?;
    record("kernel_l_paths", KERNEL_TOL, check_kernel_paths(cfg).map(|c| vec![c]))?;
    record("transverse_delta", DELTA_TOL, check_transverse_delta(cfg).map(|c| vec![c]))?;
    record("sokhotski_plemelj", PV_TOL, check_sokhotski_plemelj().map(|c| vec![c]))?;
    record("bulk_identity", BULK_FLOOR, check_bulk_identity(cfg).map(|c| vec![c]))?;
    record("dense_oracle", TWO_POINT_TOL, check_dense_oracle(cfg))?;
    Ok(out)
}
