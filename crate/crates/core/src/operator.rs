//! Discretized frequency operators `Omega0^2` and `V`.
//!
//! Vectors live in natural coordinates (values at labels); the inner product
//! carries the quadrature weights, `<y, x> = sum_a w_a conj(y_a) x_a`. The
//! dense form is symmetrized by `W^{1/2} M W^{-1/2}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MediumModel;
use crate::spectral::{basis_eval, SpectralGrid};

/// A state split into its field block `u` and medium block `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl BlockVector {
    pub fn zeros(n_field: usize, n_medium: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); n_field],
            v: vec![Complex64::new(0.0, 0.0); n_medium],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.u.iter().chain(self.v.iter())
    }

    pub fn to_flat(&self) -> Vec<Complex64> {
        self.iter().copied().collect()
    }

    pub fn from_flat(flat: &[Complex64], n_field: usize) -> Self {
        Self {
            u: flat[..n_field].to_vec(),
            v: flat[n_field..].to_vec(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            u: self.u.iter().map(|z| z.conj()).collect(),
            v: self.v.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn axpy(&mut self, a: Complex64, x: &BlockVector) {
        for (s, o) in self.u.iter_mut().zip(&x.u) {
            *s += a * o;
        }
        for (s, o) in self.v.iter_mut().zip(&x.v) {
            *s += a * o;
        }
    }
}

/// Read-only handle on a medium and its grid with the overlap table
/// `T[kappa, voxel, j] = phi_kappa(r_voxel)_j` and the coupling values cached.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    pub model: MediumModel,
    pub grid: SpectralGrid,
    pub dense_cap: usize,
    omega: Vec<f64>,
    field_weight: Vec<f64>,
    medium_weight: Vec<f64>,
    /// `alpha / sqrt(eps0)` indexed by `nu_index * n_vox + voxel`.
    alpha: Vec<f64>,
    overlap: Vec<f64>,
    voxel_volume: Vec<f64>,
}

pub const DEFAULT_DENSE_CAP: usize = 4000;

impl OperatorHandle {
    pub fn new(model: MediumModel, grid: SpectralGrid) -> Result<Self> {
        if grid.n_voxels != model.voxels.len() {
            return Err(Error::GridMismatch(format!(
                "grid built for {} voxels, medium has {}",
                grid.n_voxels,
                model.voxels.len()
            )));
        }
        let nvj = 3 * grid.n_voxels;
        let mut overlap = vec![0.0; grid.n_field() * nvj];
        for (kappa, label) in grid.field.iter().enumerate() {
            for (v, vx) in model.voxels.iter().enumerate() {
                let phi = basis_eval(label, vx.center);
                overlap[kappa * nvj + 3 * v..kappa * nvj + 3 * v + 3].copy_from_slice(&phi);
            }
        }
        let mut alpha = Vec::with_capacity(grid.nu_rule.len() * grid.n_voxels);
        for &nu in &grid.nu_rule.nodes {
            for v in 0..grid.n_voxels {
                alpha.push(model.rescaled_alpha(v, nu)?);
            }
        }
        Ok(Self {
            omega: (0..grid.n_field()).map(|k| grid.omega(k)).collect(),
            field_weight: grid.field.iter().map(|l| l.weight).collect(),
            medium_weight: grid.medium.iter().map(|l| l.weight).collect(),
            voxel_volume: model.voxels.iter().map(|v| v.h.powi(3)).collect(),
            alpha,
            overlap,
            model,
            grid,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn n_field(&self) -> usize {
        self.grid.n_field()
    }

    pub fn n_medium(&self) -> usize {
        self.grid.n_medium()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn n_vj(&self) -> usize {
        3 * self.grid.n_voxels
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn field_weights(&self) -> &[f64] {
        &self.field_weight
    }

    pub fn medium_weights(&self) -> &[f64] {
        &self.medium_weight
    }

    pub fn voxel_volume(&self, v: usize) -> f64 {
        self.voxel_volume[v]
    }

    /// Row of the overlap table for field label `kappa`, laid out as `3 * voxel + j`.
    pub fn overlap_row(&self, kappa: usize) -> &[f64] {
        let nvj = self.n_vj();
        &self.overlap[kappa * nvj..(kappa + 1) * nvj]
    }

    /// Rescaled coupling of medium label `m`.
    pub fn alpha_of(&self, m: usize) -> f64 {
        let l = &self.grid.medium[m];
        self.alpha[l.nu_index * self.grid.n_voxels + l.voxel]
    }

    /// Position `3 * voxel + j` of medium label `m` in the overlap layout.
    pub fn vj_of(&self, m: usize) -> usize {
        let l = &self.grid.medium[m];
        3 * l.voxel + l.j
    }

    /// Eigenvalue `lambda^2` of the uncoupled operator at a flat index.
    pub fn omega0_sq(&self, idx: usize) -> f64 {
        if idx < self.n_field() {
            self.omega[idx] * self.omega[idx]
        } else {
            let nu = self.grid.medium[idx - self.n_field()].nu;
            nu * nu
        }
    }

    /// Quadrature weights of all labels, field block first.
    pub fn weights(&self) -> Vec<f64> {
        self.field_weight
            .iter()
            .chain(&self.medium_weight)
            .copied()
            .collect()
    }

    fn check(&self, x: &BlockVector) -> Result<()> {
        if x.u.len() != self.n_field() {
            return Err(Error::ShapeMismatch {
                expected: self.n_field(),
                got: x.u.len(),
            });
        }
        if x.v.len() != self.n_medium() {
            return Err(Error::ShapeMismatch {
                expected: self.n_medium(),
                got: x.v.len(),
            });
        }
        Ok(())
    }

    /// Weighted inner product `<y, x>`.
    pub fn inner(&self, y: &BlockVector, x: &BlockVector) -> Complex64 {
        let f: Complex64 = y
            .u
            .iter()
            .zip(&x.u)
            .zip(&self.field_weight)
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum();
        let m: Complex64 = y
            .v
            .iter()
            .zip(&x.v)
            .zip(&self.medium_weight)
            .map(|((a, b), w)| a.conj() * b * *w)
            .sum();
        f + m
    }

    pub fn norm(&self, x: &BlockVector) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// `sum_nu w_nu h^3 alpha(nu, r) v(nu, r, j)` for every `(voxel, j)`.
    pub(crate) fn medium_moments(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_vj()];
        for (m, val) in v.iter().enumerate() {
            out[self.vj_of(m)] += self.medium_weight[m] * self.alpha_of(m) * val;
        }
        out
    }

    /// `sum_kappa w_kappa omega_kappa T[kappa, (voxel, j)] u(kappa)`.
    pub(crate) fn field_moments(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_vj()];
        for (kappa, val) in u.iter().enumerate() {
            if *val == Complex64::new(0.0, 0.0) {
                continue;
            }
            let s = self.field_weight[kappa] * self.omega[kappa] * val;
            for (o, t) in out.iter_mut().zip(self.overlap_row(kappa)) {
                *o += s * *t;
            }
        }
        out
    }
}

pub fn apply_omega0_sq(op: &OperatorHandle, x: &BlockVector) -> Result<BlockVector> {
    op.check(x)?;
    Ok(BlockVector {
        u: x.u.iter().zip(op.omega()).map(|(z, w)| z * (w * w)).collect(),
        v: x
            .v
            .iter()
            .zip(&op.grid.medium)
            .map(|(z, l)| z * (l.nu * l.nu))
            .collect(),
    })
}

/// Applies the coupling `V = [[0, B], [B^T, A]]`.
pub fn apply_coupling_v(op: &OperatorHandle, x: &BlockVector) -> Result<BlockVector> {
    op.check(x)?;
    let mv = op.medium_moments(&x.v);
    let fu = op.field_moments(&x.u);
    let u = (0..op.n_field())
        .map(|kappa| {
            let s: Complex64 = op
                .overlap_row(kappa)
                .iter()
                .zip(&mv)
                .map(|(t, m)| m * *t)
                .sum();
            s * op.omega()[kappa]
        })
        .collect();
    let v = (0..op.n_medium())
        .map(|m| {
            let vj = op.vj_of(m);
            let h3 = op.voxel_volume(op.grid.medium[m].voxel);
            op.alpha_of(m) * (fu[vj] + mv[vj] / h3)
        })
        .collect();
    Ok(BlockVector { u, v })
}

/// `(Omega0^2 + V) x`.
pub fn apply_omega_sq(op: &OperatorHandle, x: &BlockVector) -> Result<BlockVector> {
    let mut y = apply_coupling_v(op, x)?;
    let d = apply_omega0_sq(op, x)?;
    y.axpy(Complex64::new(1.0, 0.0), &d);
    Ok(y)
}

/// Dense symmetrized `W^{1/2} (Omega0^2 + V) W^{-1/2}`.
pub fn assemble_dense(op: &OperatorHandle) -> Result<DMatrix<f64>> {
    let n = op.len();
    if n > op.dense_cap {
        return Err(Error::DenseCap {
            n,
            cap: op.dense_cap,
            suggestion: suggest_reduction(op),
        });
    }
    let nf = op.n_field();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for kappa in 0..nf {
        m[(kappa, kappa)] = op.omega()[kappa] * op.omega()[kappa];
    }
    for (i, l) in op.grid.medium.iter().enumerate() {
        m[(nf + i, nf + i)] = l.nu * l.nu;
    }
    for mi in 0..op.n_medium() {
        let a = op.medium_weights()[mi].sqrt() * op.alpha_of(mi);
        let vj = op.vj_of(mi);
        for kappa in 0..nf {
            let s = op.field_weights()[kappa].sqrt() * op.omega()[kappa] * op.overlap_row(kappa)[vj] * a;
            m[(kappa, nf + mi)] = s;
            m[(nf + mi, kappa)] = s;
        }
        let inu = op.grid.medium[mi].nu_index;
        let wn = op.grid.nu_rule.weights[inu];
        for mj in 0..op.n_medium() {
            if op.vj_of(mj) == vj {
                let wn2 = op.grid.nu_rule.weights[op.grid.medium[mj].nu_index];
                m[(nf + mi, nf + mj)] += (wn * wn2).sqrt() * op.alpha_of(mi) * op.alpha_of(mj);
            }
        }
    }
    Ok(m)
}

/// Human-readable hint for shrinking a grid below the dense cap.
pub fn suggest_reduction(op: &OperatorHandle) -> String {
    let c = &op.grid.config;
    let per_k = c.n_theta * c.n_eta * 4;
    let medium = op.n_medium();
    let budget = op.dense_cap.saturating_sub(medium);
    let n_k = (budget / per_k.max(1)).max(1);
    format!(
        "reduce n_k to at most {n_k} (currently {}) or shrink the angular grid ({} x {}) or medium ({} labels)",
        c.n_k, c.n_theta, c.n_eta, medium
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DielectricAssignment, DielectricModel, PhysicalConstants, Voxel};
    use crate::spectral::{build_grids, GridConfig};

    fn handle(scale: f64) -> OperatorHandle {
        let model = MediumModel::new(
            vec![
                Voxel { center: [0.0; 3], h: 1.0 },
                Voxel { center: [1.0, 0.0, 0.0], h: 1.0 },
            ],
            DielectricAssignment::Shared(DielectricModel::drude(1.0, 0.1)),
            PhysicalConstants::natural(),
        )
        .unwrap()
        .with_coupling_scale(scale);
        let cfg = GridConfig {
            n_k: 3,
            n_theta: 2,
            n_eta: 2,
            n_nu: 3,
            k_max: 2.0,
            nu_min: 0.2,
            nu_max: 1.8,
        };
        let grid = build_grids(&cfg, &model, false).unwrap();
        OperatorHandle::new(model, grid).unwrap()
    }

    fn unit(op: &OperatorHandle, i: usize) -> BlockVector {
        let mut x = BlockVector::zeros(op.n_field(), op.n_medium());
        if i < op.n_field() {
            x.u[i] = Complex64::new(1.0, 0.0);
        } else {
            x.v[i - op.n_field()] = Complex64::new(1.0, 0.0);
        }
        x
    }

    #[test]
    fn dense_matches_matrix_free() {
        let op = handle(1.0);
        let m = assemble_dense(&op).unwrap();
        let w = op.weights();
        for i in 0..op.len() {
            let y = apply_omega_sq(&op, &unit(&op, i)).unwrap().to_flat();
            for r in 0..op.len() {
                let expected = m[(r, i)] * (w[i] / w[r]).sqrt();
                assert!((y[r].re - expected).abs() < 1e-12 * (1.0 + expected.abs()), "{r},{i}");
                assert_eq!(y[r].im, 0.0);
            }
        }
        assert!((&m - m.transpose()).amax() < 1e-15);
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        let op = handle(0.0);
        let m = assemble_dense(&op).unwrap();
        for i in 0..op.len() {
            for j in 0..op.len() {
                let d = if i == j { op.omega0_sq(i) } else { 0.0 };
                assert_eq!(m[(i, j)], d);
            }
        }
    }

    #[test]
    fn cap_refusal() {
        let op = handle(1.0).with_dense_cap(10);
        assert!(matches!(assemble_dense(&op), Err(Error::DenseCap { .. })));
    }

    #[test]
    fn shape_checked() {
        let op = handle(1.0);
        assert!(apply_coupling_v(&op, &BlockVector::zeros(1, 1)).is_err());
    }
}
