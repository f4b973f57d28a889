//! Run configuration read from a sectioned TOML file.
//!
//! Every table rejects unknown keys so that typos fail validation instead of
//! silently falling back to defaults.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{voxelize, DielectricModel, MediumModel, PhysicalConstants, Shape, UnitSystem, Voxel};
use crate::model::DielectricAssignment;
use crate::observables::StudyKind;
use crate::operator::DEFAULT_DENSE_CAP;
use crate::regularization::{Regularization, RegularizationPolicy, Sign};
use crate::solver::SolveMethod;
use crate::spectral::{GridConfig, Vec3};

fn default_seed() -> u64 {
    42
}

fn one() -> f64 {
    1.0
}

/// Medium geometry: either a shape cut at resolution `h` or an explicit voxel list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    #[serde(default)]
    pub geometry: Option<Shape>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub voxels: Option<Vec<Voxel>>,
    pub dielectric: DielectricModel,
    #[serde(default = "one")]
    pub coupling_scale: f64,
    #[serde(default)]
    pub units: UnitSystem,
}

impl MediumSection {
    pub fn build(&self) -> Result<MediumModel> {
        let constants = match self.units {
            UnitSystem::Natural => PhysicalConstants::natural(),
            UnitSystem::Si => PhysicalConstants::si(),
        };
        if !(self.coupling_scale >= 0.0 && self.coupling_scale.is_finite()) {
            return Err(Error::Config(format!(
                "medium.coupling_scale must be nonnegative, got {}",
                self.coupling_scale
            )));
        }
        let model = match (&self.geometry, self.h, &self.voxels) {
            (Some(shape), Some(h), None) => voxelize(shape, h, self.dielectric.clone(), constants)?,
            (None, None, Some(v)) => {
                MediumModel::new(v.clone(), DielectricAssignment::Shared(self.dielectric.clone()), constants)?
            }
            _ => {
                return Err(Error::Config(
                    "medium needs either `geometry` with `h` or an explicit `voxels` list".into(),
                ))
            }
        };
        Ok(model.with_coupling_scale(self.coupling_scale))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub regularization: Regularization,
    #[serde(default)]
    pub sign: Sign,
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default = "SolverSection::default_cap")]
    pub dense_cap: usize,
    #[serde(default = "SolverSection::default_born_order")]
    pub born_max_order: usize,
    #[serde(default = "SolverSection::default_born_tol")]
    pub born_tol: f64,
    /// Absolute shift used when assembling wave operators for unitarity checks.
    #[serde(default = "SolverSection::default_unitarity_shift")]
    pub unitarity_shift: f64,
}

impl SolverSection {
    fn default_cap() -> usize {
        DEFAULT_DENSE_CAP
    }
    fn default_born_order() -> usize {
        50
    }
    fn default_born_tol() -> f64 {
        1e-12
    }
    fn default_unitarity_shift() -> f64 {
        0.2
    }

    pub fn policy(&self) -> RegularizationPolicy {
        RegularizationPolicy {
            variant: self.regularization.clone(),
            sign: self.sign,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            regularization: Regularization::default(),
            sign: Sign::default(),
            method: SolveMethod::default(),
            dense_cap: Self::default_cap(),
            born_max_order: Self::default_born_order(),
            born_tol: Self::default_born_tol(),
            unitarity_shift: Self::default_unitarity_shift(),
        }
    }
}

/// Kernel identity checks: separations are in units of the voxel edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub separations: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `k_max` times the smallest separation.
    pub resolution: f64,
    pub window_ratio: f64,
    /// Seeded random directions per separation.
    pub directions: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            separations: vec![2.0, 5.0, 10.0],
            frequencies: vec![0.3, 1.0, 3.0],
            resolution: 60.0,
            window_ratio: crate::perturbation::WINDOW_RATIO,
            directions: 3,
        }
    }
}

/// Slab family for the bulk-identity study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BulkSection {
    pub thicknesses: Vec<f64>,
    pub lateral: [f64; 2],
    pub h: f64,
    pub epsilon_imag: f64,
    pub nu: f64,
    /// Height of the evaluation points above the slab surface.
    pub height: f64,
    /// Lateral offset between the two evaluation points.
    pub offset: f64,
}

impl Default for BulkSection {
    fn default() -> Self {
        Self {
            thicknesses: vec![0.5, 1.0, 2.0],
            lateral: [2.0, 2.0],
            h: 0.25,
            epsilon_imag: 0.05,
            nu: 2.0,
            height: 0.5,
            offset: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub kind: StudyKind,
    pub scales: Vec<f64>,
    pub points: Vec<Vec3>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            kind: StudyKind::Coupling,
            scales: vec![0.1, 0.05, 0.025],
            points: vec![[0.0, 0.0, 1.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub refinement_levels: usize,
    pub refinement_factor: usize,
    /// Gaussian width of the smoothed spectral densities (frequency units).
    pub density_width: f64,
    /// Exterior points for the dense two-point comparison.
    pub points: Vec<Vec3>,
    pub kernel: KernelSection,
    pub bulk: BulkSection,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            refinement_levels: 3,
            refinement_factor: 2,
            density_width: 0.1,
            points: vec![[0.0, 0.0, 1.0], [0.7, 0.4, -0.6]],
            kernel: KernelSection::default(),
            bulk: BulkSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "OutputSection::default_dir")]
    pub dir: String,
}

impl OutputSection {
    fn default_dir() -> String {
        "out".into()
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: Self::default_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
    pub medium: MediumSection,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything that can be checked without running a solve.
    pub fn validate(&self) -> Result<()> {
        self.medium.build()?;
        let g = &self.grid;
        if [g.n_k, g.n_theta, g.n_eta, g.n_nu].contains(&0) {
            return Err(Error::Config("grid node counts must be positive".into()));
        }
        if !(g.k_max > 0.0 && g.nu_max > g.nu_min && g.nu_min >= 0.0) {
            return Err(Error::Config(format!(
                "grid cutoffs must satisfy k_max > 0 and 0 <= nu_min < nu_max, got {g:?}"
            )));
        }
        self.solver.policy().validate()?;
        if !(self.solver.unitarity_shift > 0.0) {
            return Err(Error::Config("solver.unitarity_shift must be positive".into()));
        }
        if let SolveMethod::Gmres { restart, tol, max_iter } = self.solver.method {
            if restart == 0 || max_iter == 0 || !(tol > 0.0) {
                return Err(Error::Config("gmres needs positive restart, tol and max_iter".into()));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        let v = &self.verify;
        if v.refinement_levels < 2 || v.refinement_factor < 2 {
            return Err(Error::Config("refinement needs >= 2 levels and factor >= 2".into()));
        }
        if !(v.density_width > 0.0) {
            return Err(Error::Config("verify.density_width must be positive".into()));
        }
        let k = &v.kernel;
        if k.separations.is_empty() || k.separations.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("kernel separations must be positive".into()));
        }
        if k.frequencies.is_empty() || k.frequencies.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("kernel frequencies must be positive".into()));
        }
        if !(k.resolution > 0.0 && k.window_ratio > 0.0) || k.directions == 0 {
            return Err(Error::Config("kernel resolution, window_ratio and directions must be positive".into()));
        }
        let b = &v.bulk;
        if b.thicknesses.len() < 3 || b.thicknesses.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("bulk thicknesses need >= 3 increasing values".into()));
        }
        if !(b.h > 0.0 && b.epsilon_imag > 0.0 && b.nu > 0.0 && b.height > 0.0) {
            return Err(Error::Config("bulk h, epsilon_imag, nu and height must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[medium]
voxels = [{ center = [0.0, 0.0, 0.0], h = 0.3 }]
dielectric = { model = "drude-lorentz", terms = [{ plasma_freq = 0.1, damping = 0.3 }] }

[grid]
n_k = 4
n_theta = 2
n_eta = 3
n_nu = 4
k_max = 3.0
nu_min = 0.05
nu_max = 3.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.solver.sign, Sign::Plus);
        assert_eq!(cfg.medium.build().unwrap().voxels.len(), 1);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("n_k = 4", "n_k = 4\nn_kk = 5");
        let err = RunConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("n_kk"), "{err}");
    }

    #[test]
    fn shape_geometry() {
        let text = MINIMAL.replace(
            "voxels = [{ center = [0.0, 0.0, 0.0], h = 0.3 }]",
            "geometry = { shape = \"box\", center = [0.0, 0.0, 0.0], size = [0.6, 0.6, 0.6] }\nh = 0.3",
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.medium.build().unwrap().voxels.len(), 8);
    }
}
