//! Closed-form first-order objects: first-order eigenfunctions, the mode sum
//! `g(omega; r', r)`, the vacuum kernel `G0`, the near-field tensor `F_nf`,
//! the far part of the transverse delta and the kernel `L`.
//!
//! Radial integrals run over `k = omega / c` on `[0, k_max]`. The mode sum is
//! oscillatory and does not decay in `k`, so raw truncation converges only in
//! the mean. A [`KernelQuadrature`] may carry a Gaussian window
//! `chi(k) = exp(-(k / k_c)^2)`; windowing in `k` is a Gaussian smoothing in
//! space, which is undone exactly for Helmholtz solutions through the
//! mean-value property (`smooth(f) = chi(q) f` when `(Delta + q^2) f = 0`
//! near the point) and leaves harmonic `d^-3` fields unchanged up to a
//! tail of order `exp(-(k_c d)^2 / 4)`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::PhysicalConstants;
use crate::operator::{BlockVector, OperatorHandle};
use crate::quadrature::{gauss_legendre, GaussRule};
use crate::regularization::{singular_weights, Interp, Regularization, RegularizationPolicy, Sign};
use crate::solver::{effective_lambda, flat_index, label_lambda, shell_diagonal, Family, PolaritonEigenfunction};
use crate::spectral::{basis_norm, direction, polarization_vectors, SpectralGrid, Vec3};

pub type RealTensor = Matrix3<f64>;
pub type ComplexTensor = Matrix3<Complex64>;

/// Ratio `k_max / k_c` of the default window.
pub const WINDOW_RATIO: f64 = 5.0;

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn separation(r_prime: Vec3, r: Vec3) -> Result<(f64, Vec3)> {
    let d = sub(r, r_prime);
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(n > 0.0) {
        return Err(Error::Singular(format!("coincident points {r_prime:?}")));
    }
    Ok((n, [d[0] / n, d[1] / n, d[2] / n]))
}

fn dipole_pattern(n: Vec3) -> RealTensor {
    RealTensor::from_fn(|i, j| if i == j { 1.0 } else { 0.0 } - 3.0 * n[i] * n[j])
}

fn complexify(t: &RealTensor) -> ComplexTensor {
    t.map(|x| Complex64::new(x, 0.0))
}

/// Far part of the transverse delta, `-(I - 3 n n) / (4 pi |dr|^3)`.
///
/// The contact term `(2/3) I delta(dr)` never contributes at exterior points
/// and is not represented.
pub fn transverse_delta_far(dr: Vec3) -> Result<RealTensor> {
    let (d, n) = separation([0.0; 3], dr)?;
    Ok(dipole_pattern(n) * (-1.0 / (4.0 * PI * d.powi(3))))
}

/// Near-field tensor `F_nf = -c^2 (I - 3 n n) / (4 pi nu^2 d^3)`.
pub fn near_field_f(constants: &PhysicalConstants, nu: f64, r_prime: Vec3, r: Vec3) -> Result<RealTensor> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    let (d, n) = separation(r_prime, r)?;
    let c = constants.c;
    Ok(dipole_pattern(n) * (-c * c / (4.0 * PI * nu * nu * d.powi(3))))
}

/// Angular quadrature used for the mode sum `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AngularFrame {
    /// Polar axis along `r - r'`; the azimuthal and polarization sums are done
    /// analytically and only the polar integral is sampled.
    Aligned { polar: GaussRule },
    /// Explicit sum over the grid's `(theta, eta)` product rule, both
    /// polarizations and both parities.
    Grid { polar: GaussRule, azimuth: GaussRule },
}

/// Radial and angular rules, window and regularization for kernel integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadrature {
    pub radial: GaussRule,
    pub frame: AngularFrame,
    /// Window scale `k_c`; `None` means plain truncation at `k_max`.
    pub window: Option<f64>,
    pub interp: Interp,
    pub regularization: Regularization,
}

impl KernelQuadrature {
    /// Aligned frame with node counts sized for separations up to `d_max`.
    pub fn auto(k_max: f64, d_max: f64) -> Result<Self> {
        let x = k_max * d_max;
        let n_radial = (0.7 * x).ceil() as usize + 32;
        let n_polar = (0.75 * x).ceil() as usize + 24;
        Self::aligned(k_max, n_radial, n_polar, Some(k_max / WINDOW_RATIO))
    }

    pub fn aligned(k_max: f64, n_radial: usize, n_polar: usize, window: Option<f64>) -> Result<Self> {
        Ok(Self {
            radial: gauss_legendre(n_radial, 0.0, k_max)?,
            frame: AngularFrame::Aligned {
                polar: gauss_legendre(n_polar, 0.0, PI / 2.0)?,
            },
            window,
            interp: Interp::Lagrange,
            regularization: Regularization::PvSplit,
        })
    }

    /// The rules of a spectral grid, unwindowed, with the solver's
    /// nearest-shell pole rule.
    pub fn from_grid(grid: &SpectralGrid, regularization: Regularization) -> Self {
        Self {
            radial: grid.radial.clone(),
            frame: AngularFrame::Grid {
                polar: grid.polar.clone(),
                azimuth: grid.azimuth.clone(),
            },
            window: None,
            interp: Interp::Nearest,
            regularization,
        }
    }

    pub fn k_max(&self) -> f64 {
        self.radial.b
    }

    fn chi(&self, k: f64) -> f64 {
        match self.window {
            Some(kc) => (-(k / kc).powi(2)).exp(),
            None => 1.0,
        }
    }

    /// Magnitude bound on the neglected part of a radial integral at separation `d`.
    pub fn tail_estimate(&self, d: f64) -> f64 {
        match self.window {
            Some(kc) => {
                let u = kc * d;
                (1.0 + u.powi(3)) * (-u * u / 4.0).exp()
            }
            None => self.k_max() / (2.0 * PI * PI * d * d),
        }
    }

    fn policy(&self, sign: Sign) -> RegularizationPolicy {
        RegularizationPolicy {
            variant: self.regularization.clone(),
            sign,
        }
    }

    /// `sum_b W_b h(k_b)` for `int_0^kmax h(k) / (k^2 - q^2 + sign i0) dk`.
    fn singular_sum(&self, q: f64, sign: Sign, h: &[RealTensor]) -> ComplexTensor {
        let w = singular_weights(&self.radial, q, &self.policy(sign), self.interp);
        let mut out = ComplexTensor::zeros();
        for (wb, hb) in w.iter().zip(h) {
            out += hb.map(|x| wb * x);
        }
        out
    }
}

/// `g(omega; r', r) = sum_{d^omega} phi(r') (x) phi(r)` at `omega = c k`,
/// including the measure factor `omega^2 / c^3`.
pub fn g_tensor(quad: &KernelQuadrature, c: f64, k: f64, r_prime: Vec3, r: Vec3) -> Result<RealTensor> {
    let (d, n) = separation(r_prime, r)?;
    let pref = k * k / c;
    match &quad.frame {
        AngularFrame::Aligned { polar } => {
            let x = k * d;
            let (mut a, mut b) = (0.0, 0.0);
            for (&t, &w) in polar.nodes.iter().zip(&polar.weights) {
                let (s, ct) = t.sin_cos();
                let f = w * s * (x * ct).cos();
                a += f * (1.0 + ct * ct);
                b += f * (1.0 - 3.0 * ct * ct);
            }
            let nn = RealTensor::from_fn(|i, j| n[i] * n[j]);
            Ok((RealTensor::identity() * a + nn * b) * (pref / (4.0 * PI * PI)))
        }
        AngularFrame::Grid { polar, azimuth } => {
            let b2 = basis_norm() * basis_norm();
            let mut out = RealTensor::zeros();
            for (&t, &wt) in polar.nodes.iter().zip(&polar.weights) {
                for (&e, &we) in azimuth.nodes.iter().zip(&azimuth.weights) {
                    let dir = direction(t, e);
                    let kv = [k * dir[0], k * dir[1], k * dir[2]];
                    let p1 = kv[0] * r_prime[0] + kv[1] * r_prime[1] + kv[2] * r_prime[2];
                    let p2 = kv[0] * r[0] + kv[1] * r[1] + kv[2] * r[2];
                    let parity = p1.cos() * p2.cos() + p1.sin() * p2.sin();
                    let (ep, em) = polarization_vectors(dir)?;
                    let s = wt * t.sin() * we * parity * b2;
                    for eps in [ep, em] {
                        out += RealTensor::from_fn(|i, j| eps[i] * eps[j]) * s;
                    }
                }
            }
            Ok(out * pref)
        }
    }
}

fn sampled<F: Fn(f64) -> f64>(quad: &KernelQuadrature, c: f64, r_prime: Vec3, r: Vec3, radial: F) -> Result<Vec<RealTensor>> {
    quad.radial
        .nodes
        .iter()
        .map(|&k| Ok(g_tensor(quad, c, k, r_prime, r)? * (c * radial(k) * quad.chi(k))))
        .collect()
}

/// `int d omega g(omega; r', r)` as a windowed radial quadrature (no de-smearing).
pub fn omega_integral_g(quad: &KernelQuadrature, constants: &PhysicalConstants, r_prime: Vec3, r: Vec3) -> Result<RealTensor> {
    let h = sampled(quad, constants.c, r_prime, r, |_| 1.0)?;
    Ok(h.iter()
        .zip(&quad.radial.weights)
        .fold(RealTensor::zeros(), |acc, (hb, w)| acc + hb * *w))
}

/// Vacuum kernel `c^2 int d omega g / (omega^2 - nu^2 + sign i0)`.
///
/// `Sign::Plus` gives the outgoing kernel `G0^-`; `Sign::Minus` its conjugate.
pub fn green_vacuum(
    quad: &KernelQuadrature,
    constants: &PhysicalConstants,
    nu: f64,
    r_prime: Vec3,
    r: Vec3,
    sign: Sign,
) -> Result<ComplexTensor> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    let c = constants.c;
    let q = nu / c;
    let h = sampled(quad, c, r_prime, r, |_| 1.0)?;
    let raw = quad.singular_sum(q, sign, &h);
    if quad.window.is_none() {
        return Ok(raw);
    }
    let f = complexify(&near_field_f(constants, nu, r_prime, r)?);
    Ok((raw + f) / Complex64::new(quad.chi(q), 0.0) - f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelPath {
    /// Regularized quadrature of `int d omega omega^2 g / (omega^2 - nu^2 + i0)`.
    Direct,
    /// `(nu^2 / c^2) (G0 + F_nf)`.
    Decomposed,
}

/// Kernel `L(nu; r', r)` by either evaluation path.
pub fn kernel_l(
    quad: &KernelQuadrature,
    constants: &PhysicalConstants,
    nu: f64,
    r_prime: Vec3,
    r: Vec3,
    sign: Sign,
    path: KernelPath,
) -> Result<ComplexTensor> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    let c = constants.c;
    match path {
        KernelPath::Direct => {
            let q = nu / c;
            let h = sampled(quad, c, r_prime, r, |k| k * k)?;
            Ok(quad.singular_sum(q, sign, &h) / Complex64::new(quad.chi(q), 0.0))
        }
        KernelPath::Decomposed => {
            let g0 = green_vacuum(quad, constants, nu, r_prime, r, sign)?;
            let f = complexify(&near_field_f(constants, nu, r_prime, r)?);
            Ok((g0 + f) * Complex64::new(nu * nu / (c * c), 0.0))
        }
    }
}

/// `int_rule f(x) / (x^2 - lambda^2 + sign i0) dx` from samples of `f` at the
/// rule's nodes: singularity subtraction on the interpolant plus the
/// analytic principal value and the explicit delta term.
pub fn pv_quadrature(f: &[f64], lambda: f64, rule: &GaussRule, sign: Sign) -> Result<Complex64> {
    if f.len() != rule.len() {
        return Err(Error::ShapeMismatch {
            expected: rule.len(),
            got: f.len(),
        });
    }
    if !rule.contains_open(lambda) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside ({}, {})",
            rule.a, rule.b
        )));
    }
    let w = singular_weights(rule, lambda, &RegularizationPolicy::pv_split(sign), Interp::Lagrange);
    Ok(w.iter().zip(f).map(|(wb, fb)| wb * fb).sum())
}

/// First-order eigenfunction `phi - R0 V phi` from the closed forms.
pub fn first_order_psi(
    op: &OperatorHandle,
    family: Family,
    index: usize,
    policy: &RegularizationPolicy,
) -> Result<PolaritonEigenfunction> {
    policy.validate()?;
    let col = flat_index(op, family, index)?;
    let lambda = label_lambda(op, col);
    let d = shell_diagonal(op, effective_lambda(op, lambda, policy), policy);
    let nf = op.n_field();
    let mut blocks = BlockVector::zeros(nf, op.n_medium());
    match family {
        Family::E => {
            let omega = op.omega()[index];
            let t = op.overlap_row(index);
            blocks.u[index] = Complex64::new(1.0 / op.field_weights()[index], 0.0);
            for m in 0..op.n_medium() {
                blocks.v[m] = -d.medium(op, m) * (omega * t[op.vj_of(m)] * op.alpha_of(m));
            }
        }
        Family::M => {
            let vj = op.vj_of(index);
            let a0 = op.alpha_of(index);
            let h3 = op.voxel_volume(op.grid.medium[index].voxel);
            for kappa in 0..nf {
                blocks.u[kappa] = -d.field(op, kappa) * (op.omega()[kappa] * op.overlap_row(kappa)[vj] * a0);
            }
            blocks.v[index] = Complex64::new(1.0 / op.medium_weights()[index], 0.0);
            for m in 0..op.n_medium() {
                if op.vj_of(m) == vj {
                    blocks.v[m] -= d.medium(op, m) * (op.alpha_of(m) * a0 / h3);
                }
            }
        }
    }
    Ok(PolaritonEigenfunction {
        family,
        index,
        lambda,
        blocks,
        sign: policy.sign,
        residual: f64::NAN,
    })
}
