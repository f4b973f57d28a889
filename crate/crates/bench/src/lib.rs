//! Fixtures shared by the benchmarks.

use polariton_core::model::DielectricAssignment;
use polariton_core::{build_grids, DielectricModel, GridConfig, MediumModel, OperatorHandle, PhysicalConstants, Voxel};

/// Two-voxel weakly absorbing medium on the desk grid, radial and frequency
/// node counts multiplied by `refine`.
pub fn desk_operator(refine: usize) -> OperatorHandle {
    let voxels = vec![
        Voxel { center: [0.0; 3], h: 0.3 },
        Voxel { center: [0.3, 0.0, 0.0], h: 0.3 },
    ];
    let model = MediumModel::new(
        voxels,
        DielectricAssignment::Shared(DielectricModel::drude(0.1, 0.3)),
        PhysicalConstants::natural(),
    )
    .expect("valid medium");
    let grid = GridConfig {
        n_k: 6,
        n_theta: 2,
        n_eta: 4,
        n_nu: 6,
        k_max: 3.0,
        nu_min: 0.05,
        nu_max: 3.0,
    }
    .refined(refine);
    let g = build_grids(&grid, &model, false).expect("valid grid");
    OperatorHandle::new(model, g).expect("valid operator")
}
