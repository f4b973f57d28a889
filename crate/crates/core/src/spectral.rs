//! Real transverse plane-wave basis and the grids discretizing both continua.
//!
//! Field labels run over radial `k`, half-sphere directions `(theta, eta)`,
//! two polarizations and the cos/sin parity pair. Medium labels run over the
//! frequency `nu`, the voxel and the Cartesian orientation `j`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::model::MediumModel;
use crate::quadrature::{gauss_legendre, GaussRule};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Normalization `1 / (2 pi^{3/2})` of the real plane waves.
pub fn basis_norm() -> f64 {
    1.0 / (2.0 * PI.powf(1.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// Unit vector for polar angle `theta` and azimuth `eta`.
pub fn direction(theta: f64, eta: f64) -> Vec3 {
    [theta.sin() * eta.cos(), theta.sin() * eta.sin(), theta.cos()]
}

/// Transverse polarization pair `(e_plus, e_minus)` for a propagation direction.
///
/// `e_plus = normalize(k x z)`, falling back to `k x x` near the poles, and
/// `e_minus = k x e_plus`.
pub fn polarization_vectors(dir: Vec3) -> Result<(Vec3, Vec3)> {
    let n = norm(dir);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain("polarization of a zero direction".into()));
    }
    let k = [dir[0] / n, dir[1] / n, dir[2] / n];
    let axis = if k[2].abs() > 1.0 - 1e-12 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let p = cross(k, axis);
    let pn = norm(p);
    let plus = [p[0] / pn, p[1] / pn, p[2] / pn];
    Ok((plus, cross(k, plus)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldLabel {
    pub k: f64,
    pub theta: f64,
    pub eta: f64,
    pub polarization: Polarization,
    pub parity: Parity,
    pub weight: f64,
    pub radial_index: usize,
    pub polar_index: usize,
    pub azimuth_index: usize,
    /// Polarization vector and wave vector, cached at build time.
    pub epsilon: Vec3,
    pub wave_vector: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumLabel {
    pub nu: f64,
    pub voxel: usize,
    pub j: usize,
    pub weight: f64,
    pub nu_index: usize,
}

/// Evaluates `phi_kappa(r)`.
pub fn basis_eval(label: &FieldLabel, r: Vec3) -> Vec3 {
    let phase = dot(label.wave_vector, r);
    let f = basis_norm()
        * match label.parity {
            Parity::Cos => phase.cos(),
            Parity::Sin => phase.sin(),
        };
    [label.epsilon[0] * f, label.epsilon[1] * f, label.epsilon[2] * f]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_k: usize,
    pub n_theta: usize,
    pub n_eta: usize,
    pub n_nu: usize,
    pub k_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
}

impl GridConfig {
    /// Same grid with radial and frequency node counts multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_k: self.n_k * factor,
            n_nu: self.n_nu * factor,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub config: GridConfig,
    pub c: f64,
    pub n_voxels: usize,
    pub radial: GaussRule,
    pub polar: GaussRule,
    pub azimuth: GaussRule,
    pub nu_rule: GaussRule,
    pub field: Vec<FieldLabel>,
    pub medium: Vec<MediumLabel>,
}

impl SpectralGrid {
    pub fn n_field(&self) -> usize {
        self.field.len()
    }

    pub fn n_medium(&self) -> usize {
        self.medium.len()
    }

    pub fn len(&self) -> usize {
        self.field.len() + self.medium.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn omega(&self, kappa: usize) -> f64 {
        self.c * self.field[kappa].k
    }

    pub fn field_index(
        &self,
        radial: usize,
        polar: usize,
        azimuth: usize,
        pol: Polarization,
        parity: Parity,
    ) -> usize {
        let c = &self.config;
        let p = matches!(pol, Polarization::Minus) as usize;
        let q = matches!(parity, Parity::Sin) as usize;
        (((radial * c.n_theta + polar) * c.n_eta + azimuth) * 2 + p) * 2 + q
    }

    pub fn medium_index(&self, nu_index: usize, voxel: usize, j: usize) -> usize {
        (nu_index * self.n_voxels + voxel) * 3 + j
    }

    /// Quadrature weights of all labels, field block first.
    pub fn weights(&self) -> Vec<f64> {
        self.field
            .iter()
            .map(|l| l.weight)
            .chain(self.medium.iter().map(|l| l.weight))
            .collect()
    }
}

/// Builds the Gauss-Legendre grids for a medium.
///
/// With `pv_mode` set, coincidence of a frequency node with a field node
/// `c k` is rejected, since the principal-value split is singular there.
pub fn build_grids(config: &GridConfig, model: &MediumModel, pv_mode: bool) -> Result<SpectralGrid> {
    for (name, n) in [
        ("n_k", config.n_k),
        ("n_theta", config.n_theta),
        ("n_eta", config.n_eta),
        ("n_nu", config.n_nu),
    ] {
        if n == 0 {
            return Err(Error::Config(format!("{name} must be positive")));
        }
    }
    if !(config.k_max > 0.0) {
        return Err(Error::Config(format!("k_max must be positive, got {}", config.k_max)));
    }
    if !(config.nu_min > 0.0 && config.nu_max > config.nu_min) {
        return Err(Error::Config(format!(
            "need 0 < nu_min < nu_max, got [{}, {}]",
            config.nu_min, config.nu_max
        )));
    }
    let c = model.constants.c;
    let radial = gauss_legendre(config.n_k, 0.0, config.k_max)?;
    let polar = gauss_legendre(config.n_theta, 0.0, FRAC_PI_2)?;
    let azimuth = gauss_legendre(config.n_eta, 0.0, 2.0 * PI)?;
    let nu_rule = gauss_legendre(config.n_nu, config.nu_min, config.nu_max)?;

    if pv_mode {
        let mut collisions = Vec::new();
        for &k in &radial.nodes {
            for &nu in &nu_rule.nodes {
                if (c * k - nu).abs() <= 1e-12 * nu {
                    collisions.push(format!("omega = {} vs nu = {nu}", c * k));
                }
            }
        }
        if !collisions.is_empty() {
            return Err(Error::Config(format!(
                "coincident field and medium nodes: {}",
                collisions.join(", ")
            )));
        }
    }

    let mut field = Vec::with_capacity(config.n_k * config.n_theta * config.n_eta * 4);
    for (ik, (&k, &wk)) in radial.nodes.iter().zip(&radial.weights).enumerate() {
        for (it, (&theta, &wt)) in polar.nodes.iter().zip(&polar.weights).enumerate() {
            for (ie, (&eta, &we)) in azimuth.nodes.iter().zip(&azimuth.weights).enumerate() {
                let dir = direction(theta, eta);
                let (ep, em) = polarization_vectors(dir)?;
                let weight = wk * k * k * wt * theta.sin() * we;
                for (polarization, epsilon) in [(Polarization::Plus, ep), (Polarization::Minus, em)] {
                    for parity in [Parity::Cos, Parity::Sin] {
                        field.push(FieldLabel {
                            k,
                            theta,
                            eta,
                            polarization,
                            parity,
                            weight,
                            radial_index: ik,
                            polar_index: it,
                            azimuth_index: ie,
                            epsilon,
                            wave_vector: [k * dir[0], k * dir[1], k * dir[2]],
                        });
                    }
                }
            }
        }
    }

    let n_voxels = model.voxels.len();
    let mut medium = Vec::with_capacity(config.n_nu * n_voxels * 3);
    for (inu, (&nu, &wn)) in nu_rule.nodes.iter().zip(&nu_rule.weights).enumerate() {
        for (voxel, vx) in model.voxels.iter().enumerate() {
            for j in 0..3 {
                medium.push(MediumLabel {
                    nu,
                    voxel,
                    j,
                    weight: wn * vx.h.powi(3),
                    nu_index: inu,
                });
            }
        }
    }

    Ok(SpectralGrid {
        config: config.clone(),
        c,
        n_voxels,
        radial,
        polar,
        azimuth,
        nu_rule,
        field,
        medium,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DielectricAssignment, DielectricModel, PhysicalConstants, Voxel};

    fn one_voxel() -> MediumModel {
        MediumModel::new(
            vec![Voxel { center: [0.0; 3], h: 1.0 }],
            DielectricAssignment::Shared(DielectricModel::drude(1.0, 0.1)),
            PhysicalConstants::natural(),
        )
        .unwrap()
    }

    fn config() -> GridConfig {
        GridConfig {
            n_k: 4,
            n_theta: 3,
            n_eta: 4,
            n_nu: 2,
            k_max: 2.0,
            nu_min: 0.2,
            nu_max: 1.5,
        }
    }

    #[test]
    fn label_counts() {
        let g = build_grids(&config(), &one_voxel(), false).unwrap();
        assert_eq!(g.n_field(), 192);
        assert_eq!(g.n_medium(), 6);
    }

    #[test]
    fn index_maps_are_inverse() {
        let g = build_grids(&config(), &one_voxel(), false).unwrap();
        for (i, l) in g.field.iter().enumerate() {
            let idx = g.field_index(l.radial_index, l.polar_index, l.azimuth_index, l.polarization, l.parity);
            assert_eq!(idx, i);
        }
        for (i, l) in g.medium.iter().enumerate() {
            assert_eq!(g.medium_index(l.nu_index, l.voxel, l.j), i);
        }
    }

    #[test]
    fn angular_weights_sum_to_half_sphere() {
        let g = build_grids(&config(), &one_voxel(), false).unwrap();
        let polar: f64 = g.polar.nodes.iter().zip(&g.polar.weights).map(|(t, w)| w * t.sin()).sum();
        let az: f64 = g.azimuth.weights.iter().sum();
        assert!((polar - 1.0).abs() < 1e-5);
        assert!((az - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn pole_fallback() {
        let (p, m) = polarization_vectors([0.0, 0.0, 1.0]).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert!(dot(p, m).abs() < 1e-15);
        assert!(polarization_vectors([0.0; 3]).is_err());
    }

    #[test]
    fn basis_values_at_origin() {
        let g = build_grids(&config(), &one_voxel(), false).unwrap();
        let c = g.field.iter().find(|l| l.parity == Parity::Cos).unwrap();
        let v = basis_eval(c, [0.0; 3]);
        for i in 0..3 {
            assert!((v[i] - c.epsilon[i] * basis_norm()).abs() < 1e-16);
        }
        let s = g.field.iter().find(|l| l.parity == Parity::Sin).unwrap();
        assert_eq!(basis_eval(s, [0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn collision_detected_in_pv_mode() {
        let g = build_grids(&config(), &one_voxel(), false).unwrap();
        let mut cfg = config();
        // Choose the frequency band so that its first node equals a field node.
        let k = g.radial.nodes[1];
        let probe = gauss_legendre(cfg.n_nu, 0.0, 1.0).unwrap();
        let t = probe.nodes[0];
        cfg.nu_min = 0.1;
        cfg.nu_max = 0.1 + (k - 0.1) / t;
        let err = build_grids(&cfg, &one_voxel(), true);
        assert!(matches!(err, Err(Error::Config(ref m)) if m.contains("coincident")), "{err:?}");
        assert!(build_grids(&cfg, &one_voxel(), false).is_ok());
    }
}
