//! Physical outputs: electric-field mode coefficients at exterior points,
//! the two-family spectral inventory, the first-order field kernel, the
//! bulk Green-identity residual and the vanishing-medium / weak-coupling
//! studies.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MediumModel, Voxel};
use crate::operator::OperatorHandle;
use crate::perturbation::{green_vacuum, kernel_l, ComplexTensor, KernelPath, KernelQuadrature};
use crate::regularization::{RegularizationPolicy, Sign};
use crate::solver::{solve_all, Family, PolaritonEigenfunction, SolveMethod};
use crate::spectral::{basis_eval, build_grids, GridConfig, Parity, Polarization, Vec3};

pub type CVec3 = [Complex64; 3];

const ZERO3: CVec3 = [Complex64 { re: 0.0, im: 0.0 }; 3];

/// Rejects evaluation points inside the medium, listing every offending row.
pub fn validate_exterior(model: &MediumModel, points: &[Vec3]) -> Result<()> {
    let bad: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| model.voxel_containing(**p).is_some())
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::InteriorPoints(bad))
    }
}

/// Electric-field coefficient functions per (point, mode), split by family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldModeMap {
    pub points: Vec<Vec3>,
    pub sign: Sign,
    pub k_max: f64,
    pub nu_max: f64,
    /// `e[p][kappa]`: coefficient of the e-family mode with label `kappa`.
    pub e: Vec<Vec<CVec3>>,
    /// `m[p][m]`: coefficient of the m-family mode with medium label `m`.
    pub m: Vec<Vec<CVec3>>,
    /// Measure weights of the e- and m-family modes.
    pub e_weights: Vec<f64>,
    pub m_weights: Vec<f64>,
}

fn weighted_norm(rows: &[Vec<CVec3>], w: &[f64]) -> f64 {
    rows.iter()
        .flat_map(|row| row.iter().zip(w))
        .map(|(c, wi)| wi * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

impl FieldModeMap {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Measure-weighted norm `sqrt(sum w |coeff|^2)` of the e-family array.
    pub fn e_norm(&self) -> f64 {
        weighted_norm(&self.e, &self.e_weights)
    }

    /// Measure-weighted norm of the m-family array.
    pub fn m_norm(&self) -> f64 {
        weighted_norm(&self.m, &self.m_weights)
    }

    /// Weighted distance of the e-family array from the free-field coefficients.
    pub fn e_deviation(&self, free: &[Vec<CVec3>]) -> f64 {
        let diff: Vec<Vec<CVec3>> = self
            .e
            .iter()
            .zip(free)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| [x[0] - y[0], x[1] - y[1], x[2] - y[2]])
                    .collect()
            })
            .collect();
        weighted_norm(&diff, &self.e_weights)
    }

    /// Sum over all modes of both families at each point.
    pub fn totals(&self) -> Vec<CVec3> {
        self.e
            .iter()
            .zip(&self.m)
            .map(|(e, m)| {
                let mut t = ZERO3;
                for c in e.iter().chain(m) {
                    for i in 0..3 {
                        t[i] += c[i];
                    }
                }
                t
            })
            .collect()
    }
}

/// `beta_kappa(r) = -sqrt(hbar / (2 eps0)) omega_kappa phi_kappa(r)` for every field label.
fn beta_table(op: &OperatorHandle, r: Vec3) -> Vec<Vec3> {
    let k = &op.model.constants;
    let pref = -(k.hbar / (2.0 * k.eps0)).sqrt();
    op.grid
        .field
        .iter()
        .zip(op.omega())
        .map(|(l, w)| {
            let phi = basis_eval(l, r);
            [pref * w * phi[0], pref * w * phi[1], pref * w * phi[2]]
        })
        .collect()
}

/// `sum_kappa w_kappa beta_kappa(r) lambda^{-1/2} u(kappa)`.
fn mode_coefficient(op: &OperatorHandle, beta: &[Vec3], psi: &PolaritonEigenfunction) -> CVec3 {
    let mut c = ZERO3;
    for ((b, w), u) in beta.iter().zip(op.field_weights()).zip(&psi.blocks.u) {
        if *u == Complex64::new(0.0, 0.0) {
            continue;
        }
        let s = u * *w;
        for i in 0..3 {
            c[i] += s * b[i];
        }
    }
    let f = 1.0 / psi.lambda.sqrt();
    [c[0] * f, c[1] * f, c[2] * f]
}

/// Field coefficients of every solved mode at every exterior point.
pub fn efield_mode_map(
    op: &OperatorHandle,
    solutions: &[PolaritonEigenfunction],
    points: &[Vec3],
) -> Result<FieldModeMap> {
    validate_exterior(&op.model, points)?;
    let (mut e_modes, mut m_modes): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
    for s in solutions {
        match s.family {
            Family::E => e_modes.push(s),
            Family::M => m_modes.push(s),
        }
    }
    e_modes.sort_by_key(|s| s.index);
    m_modes.sort_by_key(|s| s.index);
    if e_modes.len() != op.n_field()
        || m_modes.len() != op.n_medium()
        || e_modes.iter().enumerate().any(|(i, s)| s.index != i)
        || m_modes.iter().enumerate().any(|(i, s)| s.index != i)
    {
        return Err(Error::ColumnFailures(missing_modes(op, solutions)));
    }
    let sign = solutions.first().map(|s| s.sign).unwrap_or(Sign::Plus);
    let rows: Vec<(Vec<CVec3>, Vec<CVec3>)> = points
        .par_iter()
        .map(|&r| {
            let beta = beta_table(op, r);
            (
                e_modes.iter().map(|s| mode_coefficient(op, &beta, s)).collect(),
                m_modes.iter().map(|s| mode_coefficient(op, &beta, s)).collect(),
            )
        })
        .collect();
    let (e, m) = rows.into_iter().unzip();
    Ok(FieldModeMap {
        points: points.to_vec(),
        sign,
        k_max: op.grid.config.k_max,
        nu_max: op.grid.config.nu_max,
        e,
        m,
        e_weights: op.field_weights().to_vec(),
        m_weights: op.medium_weights().to_vec(),
    })
}

/// Free-field coefficients `-sqrt(hbar omega / (2 eps0)) phi_kappa(r)`.
pub fn free_field_coefficients(op: &OperatorHandle, points: &[Vec3]) -> Vec<Vec<CVec3>> {
    let k = &op.model.constants;
    points
        .iter()
        .map(|&r| {
            op.grid
                .field
                .iter()
                .zip(op.omega())
                .map(|(l, w)| {
                    let s = -(k.hbar * w / (2.0 * k.eps0)).sqrt();
                    let phi = basis_eval(l, r);
                    [0, 1, 2].map(|i| Complex64::new(s * phi[i], 0.0))
                })
                .collect()
        })
        .collect()
}

/// First-order m-family field kernel
/// `sqrt(hbar mu0 / (pi c^2)) nu^2 eps_i^{1/2}(nu, r') (G0 + F_nf)`,
/// written as `sqrt(hbar / (pi eps0)) eps_i^{1/2} L` so that either kernel
/// path can be used. The coupling scale of the model multiplies `eps_i^{1/2}`.
#[allow(clippy::too_many_arguments)]
pub fn first_order_field_kernel(
    quad: &KernelQuadrature,
    model: &MediumModel,
    nu: f64,
    r_prime: Vec3,
    r: Vec3,
    sign: Sign,
    path: KernelPath,
) -> Result<ComplexTensor> {
    validate_exterior(model, &[r])?;
    let v = model
        .voxel_containing(r_prime)
        .ok_or_else(|| Error::Domain(format!("source point {r_prime:?} is outside the medium")))?;
    let eps = model.epsilon_imag_at(v, nu)?;
    if eps == 0.0 {
        return Ok(ComplexTensor::zeros());
    }
    let k = &model.constants;
    let pref = (k.hbar / (std::f64::consts::PI * k.eps0)).sqrt() * model.coupling_scale * eps.sqrt();
    Ok(kernel_l(quad, k, nu, r_prime, r, sign, path)? * Complex64::new(pref, 0.0))
}

/// Both sides of the bulk Green identity with the vacuum kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BulkIdentity {
    pub lhs: [[Complex64; 3]; 3],
    pub rhs: [[Complex64; 3]; 3],
    pub residual: [[Complex64; 3]; 3],
    /// `||lhs - rhs||_F / ||rhs||_F`.
    pub ratio: f64,
}

fn to_array(t: &ComplexTensor) -> [[Complex64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| t[(i, j)]))
}

fn frobenius(t: &ComplexTensor) -> f64 {
    t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `LHS = (nu^2/c^2) sum_voxels h^3 eps_i G0^T(r, rA) G0^*(r, rB)` against
/// `RHS = Im G0(rA, rB)`, the vacuum kernel standing in for the full Green
/// tensor at first order.
pub fn bulk_identity_residual(
    quad: &KernelQuadrature,
    model: &MediumModel,
    nu: f64,
    r_a: Vec3,
    r_b: Vec3,
    sign: Sign,
) -> Result<BulkIdentity> {
    validate_exterior(model, &[r_a, r_b])?;
    let k = &model.constants;
    let s2 = model.coupling_scale * model.coupling_scale;
    let terms: Vec<Result<ComplexTensor>> = model
        .voxels
        .par_iter()
        .enumerate()
        .map(|(v, vx)| {
            let eps = model.epsilon_imag_at(v, nu)? * s2;
            if eps == 0.0 {
                return Ok(ComplexTensor::zeros());
            }
            let ga = green_vacuum(quad, k, nu, vx.center, r_a, sign)?;
            let gb = green_vacuum(quad, k, nu, vx.center, r_b, sign)?;
            Ok(ga.transpose() * gb.conjugate() * Complex64::new(eps * vx.h.powi(3), 0.0))
        })
        .collect();
    let mut lhs = ComplexTensor::zeros();
    for t in terms {
        lhs += t?;
    }
    lhs *= Complex64::new(nu * nu / (k.c * k.c), 0.0);
    let g_ab = green_vacuum(quad, k, nu, r_a, r_b, sign)?;
    let rhs = g_ab.map(|z| Complex64::new(z.im, 0.0));
    let residual = lhs - rhs;
    let ratio = frobenius(&residual) / frobenius(&rhs);
    Ok(BulkIdentity {
        lhs: to_array(&lhs),
        rhs: to_array(&rhs),
        residual: to_array(&residual),
        ratio,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EModeEntry {
    pub index: usize,
    pub omega: f64,
    pub theta: f64,
    pub eta: f64,
    pub polarization: Polarization,
    pub parity: Parity,
    pub norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MModeEntry {
    pub index: usize,
    pub nu: f64,
    pub voxel: usize,
    pub j: usize,
    pub norm: f64,
    pub residual: f64,
}

/// Two-family inventory of the diagonalized frequency operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub e_family: Vec<EModeEntry>,
    pub m_family: Vec<MModeEntry>,
    pub max_residual: f64,
}

fn missing_modes(op: &OperatorHandle, solutions: &[PolaritonEigenfunction]) -> Vec<usize> {
    let mut seen = vec![false; op.len()];
    for s in solutions {
        let i = match s.family {
            Family::E => s.index,
            Family::M => op.n_field() + s.index,
        };
        if i < seen.len() {
            seen[i] = true;
        }
    }
    seen.iter().enumerate().filter(|(_, s)| !**s).map(|(i, _)| i).collect()
}

pub fn spectral_report(op: &OperatorHandle, solutions: &[PolaritonEigenfunction]) -> Result<SpectralReport> {
    let missing = missing_modes(op, solutions);
    if !missing.is_empty() {
        return Err(Error::ColumnFailures(missing));
    }
    let mut e_family = Vec::with_capacity(op.n_field());
    let mut m_family = Vec::with_capacity(op.n_medium());
    for s in solutions {
        let norm = op.norm(&s.blocks);
        match s.family {
            Family::E => {
                let l = &op.grid.field[s.index];
                e_family.push(EModeEntry {
                    index: s.index,
                    omega: s.lambda,
                    theta: l.theta,
                    eta: l.eta,
                    polarization: l.polarization,
                    parity: l.parity,
                    norm,
                    residual: s.residual,
                });
            }
            Family::M => {
                let l = &op.grid.medium[s.index];
                m_family.push(MModeEntry {
                    index: s.index,
                    nu: s.lambda,
                    voxel: l.voxel,
                    j: l.j,
                    norm,
                    residual: s.residual,
                });
            }
        }
    }
    e_family.sort_by_key(|e| e.index);
    m_family.sort_by_key(|e| e.index);
    if e_family.len() != op.n_field() || m_family.len() != op.n_medium() {
        return Err(Error::ColumnFailures(Vec::new()));
    }
    let max_residual = solutions.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(SpectralReport {
        e_family,
        m_family,
        max_residual,
    })
}

/// One row of a vanishing-medium or weak-coupling study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub scale: f64,
    pub m_norm: f64,
    pub e_deviation: f64,
}

/// Which knob a study turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    /// Multiplies the coupling function by `scale`.
    Coupling,
    /// Multiplies the medium volume by `scale` (voxels and their offsets from
    /// the centroid shrink by `scale^{1/3}`).
    Volume,
}

/// Medium with its volume multiplied by `scale` about its centroid.
pub fn scaled_volume(model: &MediumModel, scale: f64) -> Result<MediumModel> {
    if !(scale > 0.0) {
        return Err(Error::Config(format!("volume scale must be positive, got {scale}")));
    }
    let n = model.voxels.len() as f64;
    let centroid = [0, 1, 2].map(|i| model.voxels.iter().map(|v| v.center[i]).sum::<f64>() / n);
    let f = scale.cbrt();
    let voxels = model
        .voxels
        .iter()
        .map(|v| Voxel {
            center: [0, 1, 2].map(|i| centroid[i] + f * (v.center[i] - centroid[i])),
            h: v.h * f,
        })
        .collect();
    Ok(MediumModel {
        voxels,
        ..model.clone()
    })
}

/// Family norms of the field map as the coupling or the volume is scaled.
pub fn limit_study(
    model: &MediumModel,
    grid: &GridConfig,
    kind: StudyKind,
    scales: &[f64],
    points: &[Vec3],
    policy: &RegularizationPolicy,
    method: SolveMethod,
) -> Result<Vec<StudyRow>> {
    if scales.len() < 3 {
        return Err(Error::Config(format!("a study needs at least 3 scales, got {}", scales.len())));
    }
    scales
        .iter()
        .map(|&s| {
            let m = match kind {
                StudyKind::Coupling => {
                    if !(s >= 0.0) {
                        return Err(Error::Config(format!("coupling scale must be nonnegative, got {s}")));
                    }
                    model.clone().with_coupling_scale(model.coupling_scale * s)
                }
                StudyKind::Volume => scaled_volume(model, s)?,
            };
            let g = build_grids(grid, &m, false)?;
            let op = OperatorHandle::new(m, g)?;
            let sols = solve_all(&op, policy, method)?;
            let map = efield_mode_map(&op, &sols, points)?;
            let free = free_field_coefficients(&op, points);
            Ok(StudyRow {
                scale: s,
                m_norm: map.m_norm(),
                e_deviation: map.e_deviation(&free),
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x` over rows with both positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
