//! Medium geometry, dielectric response and the field-medium coupling.
//!
//! The medium is a union of cubic voxels on a regular lattice. Each voxel
//! carries the imaginary part of the permittivity, from which the coupling
//! function `alpha(r, nu) = sqrt(2 eps0 nu eps_i(r, nu) / pi)` follows.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    #[default]
    Natural,
    Si,
}

/// Vacuum permittivity, permeability, speed of light and reduced Planck constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub eps0: f64,
    pub mu0: f64,
    pub c: f64,
    pub hbar: f64,
    pub unit_system: UnitSystem,
}

impl PhysicalConstants {
    /// Relative tolerance on `eps0 mu0 c^2 = 1`.
    pub const CONSISTENCY_TOL: f64 = 1e-9;

    pub fn new(eps0: f64, mu0: f64, c: f64, hbar: f64, unit_system: UnitSystem) -> Result<Self> {
        for (name, v) in [("eps0", eps0), ("mu0", mu0), ("c", c), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        let product = eps0 * mu0 * c * c;
        if (product - 1.0).abs() > Self::CONSISTENCY_TOL {
            return Err(Error::Domain(format!(
                "eps0 * mu0 * c^2 = {product}, expected 1"
            )));
        }
        Ok(Self {
            eps0,
            mu0,
            c,
            hbar,
            unit_system,
        })
    }

    pub fn natural() -> Self {
        Self {
            eps0: 1.0,
            mu0: 1.0,
            c: 1.0,
            hbar: 1.0,
            unit_system: UnitSystem::Natural,
        }
    }

    /// CODATA 2018 values; `eps0` is derived so the product constraint is exact.
    pub fn si() -> Self {
        let c = 299_792_458.0;
        let mu0 = 1.256_637_062_12e-6;
        Self {
            eps0: 1.0 / (mu0 * c * c),
            mu0,
            c,
            hbar: 1.054_571_817e-34,
            unit_system: UnitSystem::Si,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::natural()
    }
}

/// One damped oscillator term of a Drude-Lorentz response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzTerm {
    pub plasma_freq: f64,
    pub damping: f64,
    #[serde(default)]
    pub resonance: f64,
}

/// Imaginary part of the relative permittivity as a function of frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DielectricModel {
    /// Constant value inside `[band[0], band[1]]`, zero elsewhere.
    Constant { value: f64, band: [f64; 2] },
    DrudeLorentz { terms: Vec<LorentzTerm> },
    /// Piecewise-linear table, zero outside the tabulated range.
    Tabulated { nu: Vec<f64>, values: Vec<f64> },
}

impl DielectricModel {
    pub fn drude(plasma_freq: f64, damping: f64) -> Self {
        DielectricModel::DrudeLorentz {
            terms: vec![LorentzTerm {
                plasma_freq,
                damping,
                resonance: 0.0,
            }],
        }
    }

    /// Construction-time checks. With `strict_positivity` the model must be
    /// strictly positive for every `nu > 0`.
    pub fn validate(&self, strict_positivity: bool) -> Result<()> {
        match self {
            DielectricModel::Constant { value, band } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::Config(format!("constant eps_i must be >= 0, got {value}")));
                }
                if !(band[0] >= 0.0 && band[1] > band[0]) {
                    return Err(Error::Config(format!("invalid band {band:?}")));
                }
                if strict_positivity {
                    return Err(Error::Config(
                        "constant model vanishes outside its band; strict positivity impossible".into(),
                    ));
                }
            }
            DielectricModel::DrudeLorentz { terms } => {
                if terms.is_empty() {
                    return Err(Error::Config("Drude-Lorentz model needs at least one term".into()));
                }
                for t in terms {
                    if !(t.plasma_freq >= 0.0 && t.damping >= 0.0 && t.resonance >= 0.0) {
                        return Err(Error::Config(format!("negative oscillator parameter in {t:?}")));
                    }
                    if t.resonance == 0.0 && t.damping == 0.0 && t.plasma_freq > 0.0 {
                        return Err(Error::Config("undamped Drude term has no absorption".into()));
                    }
                }
                if strict_positivity
                    && !terms.iter().any(|t| t.plasma_freq > 0.0 && t.damping > 0.0)
                {
                    return Err(Error::Config("no absorbing oscillator term".into()));
                }
            }
            DielectricModel::Tabulated { nu, values } => {
                if nu.len() != values.len() || nu.len() < 2 {
                    return Err(Error::Config("tabulated model needs >= 2 matching points".into()));
                }
                if nu.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("tabulated nu grid must increase strictly".into()));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::Config(format!("negative tabulated eps_i value {v}")));
                }
                if strict_positivity {
                    return Err(Error::Config(
                        "tabulated model vanishes outside its grid; strict positivity impossible".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `eps_i(nu)` for a dielectric model.
pub fn epsilon_imag(model: &DielectricModel, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {nu}")));
    }
    let value = match model {
        DielectricModel::Constant { value, band } => {
            if nu >= band[0] && nu <= band[1] {
                *value
            } else {
                0.0
            }
        }
        DielectricModel::DrudeLorentz { terms } => terms
            .iter()
            .map(|t| {
                let wp2 = t.plasma_freq * t.plasma_freq;
                let detuning = t.resonance * t.resonance - nu * nu;
                wp2 * t.damping * nu / (detuning * detuning + t.damping * t.damping * nu * nu)
            })
            .sum(),
        DielectricModel::Tabulated { nu: grid, values } => {
            let last = grid.len() - 1;
            if nu < grid[0] || nu > grid[last] {
                0.0
            } else {
                let i = grid.partition_point(|&g| g <= nu).clamp(1, last);
                let t = (nu - grid[i - 1]) / (grid[i] - grid[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    };
    Ok(value)
}

/// Geometry from which the voxel lattice is cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Box { center: [f64; 3], size: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Finite slab of thickness along z and lateral extent along x and y.
    Slab {
        center: [f64; 3],
        thickness: f64,
        lateral: [f64; 2],
    },
}

impl Shape {
    fn center(&self) -> [f64; 3] {
        match self {
            Shape::Box { center, .. } | Shape::Sphere { center, .. } | Shape::Slab { center, .. } => {
                *center
            }
        }
    }

    fn half_extent(&self) -> [f64; 3] {
        match self {
            Shape::Box { size, .. } => [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0],
            Shape::Sphere { radius, .. } => [*radius; 3],
            Shape::Slab {
                thickness, lateral, ..
            } => [lateral[0] / 2.0, lateral[1] / 2.0, thickness / 2.0],
        }
    }

    pub fn smallest_dimension(&self) -> f64 {
        let e = self.half_extent();
        2.0 * e[0].min(e[1]).min(e[2])
    }

    pub fn volume(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            _ => {
                let e = self.half_extent();
                8.0 * e[0] * e[1] * e[2]
            }
        }
    }

    pub fn surface_area(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            _ => {
                let e = self.half_extent();
                8.0 * (e[0] * e[1] + e[1] * e[2] + e[0] * e[2])
            }
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let c = self.center();
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        match self {
            Shape::Sphere { radius, .. } => d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius,
            _ => {
                let e = self.half_extent();
                (0..3).all(|i| d[i].abs() <= e[i])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let e = self.half_extent();
        if e.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("shape dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Voxel {
    pub center: [f64; 3],
    pub h: f64,
}

impl Voxel {
    /// Closed-cube membership.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= self.h / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DielectricAssignment {
    Shared(DielectricModel),
    PerVoxel(Vec<DielectricModel>),
}

/// Voxelized medium with its dielectric response and unit system.
///
/// `coupling_scale` multiplies the coupling function everywhere; it is 1 for
/// the physical model and is varied only by perturbative scaling studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumModel {
    pub voxels: Vec<Voxel>,
    pub dielectric: DielectricAssignment,
    pub constants: PhysicalConstants,
    pub coupling_scale: f64,
}

impl MediumModel {
    pub fn new(
        voxels: Vec<Voxel>,
        dielectric: DielectricAssignment,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        if voxels.is_empty() {
            return Err(Error::EmptyMedium("no voxels".into()));
        }
        if voxels.iter().any(|v| !(v.h > 0.0)) {
            return Err(Error::Config("voxel edge length must be positive".into()));
        }
        for (i, a) in voxels.iter().enumerate() {
            for b in &voxels[i + 1..] {
                let sep = (0..3)
                    .map(|k| (a.center[k] - b.center[k]).abs() - (a.h + b.h) / 2.0)
                    .fold(f64::NEG_INFINITY, f64::max);
                if sep < -1e-12 * a.h.max(b.h) {
                    return Err(Error::Config(format!(
                        "voxels at {:?} and {:?} overlap",
                        a.center, b.center
                    )));
                }
            }
        }
        match &dielectric {
            DielectricAssignment::Shared(m) => m.validate(false)?,
            DielectricAssignment::PerVoxel(ms) => {
                if ms.len() != voxels.len() {
                    return Err(Error::ShapeMismatch {
                        expected: voxels.len(),
                        got: ms.len(),
                    });
                }
                for m in ms {
                    m.validate(false)?;
                }
            }
        }
        Ok(Self {
            voxels,
            dielectric,
            constants,
            coupling_scale: 1.0,
        })
    }

    pub fn with_coupling_scale(mut self, scale: f64) -> Self {
        self.coupling_scale = scale;
        self
    }

    pub fn total_volume(&self) -> f64 {
        self.voxels.iter().map(|v| v.h.powi(3)).sum()
    }

    pub fn voxel_containing(&self, r: [f64; 3]) -> Option<usize> {
        self.voxels.iter().position(|v| v.contains(r))
    }

    pub fn dielectric_of(&self, voxel: usize) -> &DielectricModel {
        match &self.dielectric {
            DielectricAssignment::Shared(m) => m,
            DielectricAssignment::PerVoxel(ms) => &ms[voxel],
        }
    }

    pub fn epsilon_imag_at(&self, voxel: usize, nu: f64) -> Result<f64> {
        epsilon_imag(self.dielectric_of(voxel), nu)
    }

    /// Coupling of a voxel including `coupling_scale`.
    pub fn alpha_voxel(&self, voxel: usize, nu: f64) -> Result<f64> {
        let eps = self.epsilon_imag_at(voxel, nu)?;
        Ok(self.coupling_scale * (2.0 * self.constants.eps0 * nu * eps / PI).sqrt())
    }

    /// Coupling with the permittivity of vacuum absorbed, `alpha / sqrt(eps0)`,
    /// which is the form entering the frequency operator.
    pub fn rescaled_alpha(&self, voxel: usize, nu: f64) -> Result<f64> {
        Ok(self.alpha_voxel(voxel, nu)? / self.constants.eps0.sqrt())
    }
}

/// Coupling function at a position; zero outside every voxel.
pub fn coupling_alpha(model: &MediumModel, r: [f64; 3], nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {nu}")));
    }
    match model.voxel_containing(r) {
        Some(v) => model.alpha_voxel(v, nu),
        None => Ok(0.0),
    }
}

/// Cell-centred lattice `center + (i + 1/2) h` restricted to the shape.
pub fn lattice_points(shape: &Shape, h: f64) -> Vec<[f64; 3]> {
    let c = shape.center();
    let e = shape.half_extent();
    let range = |k: usize| {
        let n = (e[k] / h).ceil() as i64 + 1;
        -n..n
    };
    let mut points = Vec::new();
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let p = [
                    c[0] + (i as f64 + 0.5) * h,
                    c[1] + (j as f64 + 0.5) * h,
                    c[2] + (k as f64 + 0.5) * h,
                ];
                if shape.contains(p) {
                    points.push(p);
                }
            }
        }
    }
    points
}

/// Cuts a shape into voxels of edge `h`, including a voxel iff its centre is inside.
pub fn voxelize(
    shape: &Shape,
    h: f64,
    dielectric: DielectricModel,
    constants: PhysicalConstants,
) -> Result<MediumModel> {
    shape.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("voxel edge must be positive, got {h}")));
    }
    if h > shape.smallest_dimension() {
        return Err(Error::EmptyMedium(format!(
            "voxel edge {h} exceeds the smallest shape dimension {}",
            shape.smallest_dimension()
        )));
    }
    let voxels: Vec<Voxel> = lattice_points(shape, h)
        .into_iter()
        .map(|center| Voxel { center, h })
        .collect();
    if voxels.is_empty() {
        return Err(Error::EmptyMedium(format!("no lattice point of edge {h} inside {shape:?}")));
    }
    MediumModel::new(voxels, DielectricAssignment::Shared(dielectric), constants)
}
