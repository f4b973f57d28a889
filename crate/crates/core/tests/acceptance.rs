//! Acceptance criteria 1-10 on the desk configuration. Prints one line per
//! criterion and exits nonzero if any fails.
//!
//! Tolerances are literals here, independent of the constants in `verify`, so
//! loosening a battery constant cannot turn this suite green.

use polariton_core::config::RunConfig;
use polariton_core::solver::{solve_all, uncoupled};
use polariton_core::verify::{run_battery, verdict_json, CheckResult, Verdict};
use polariton_core::{build_grids, OperatorHandle};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

fn desk() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    RunConfig::from_path(&path).expect("desk config")
}

fn get<'a>(v: &'a Verdict, name: &str) -> &'a CheckResult {
    v.get(name).unwrap_or_else(|| panic!("missing check {name}"))
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Solved eigenfunctions at zero coupling against the uncoupled ones.
fn zero_coupling_eigenfunctions(cfg: &RunConfig) -> f64 {
    let model = cfg.medium.build().unwrap().with_coupling_scale(0.0);
    let grid = build_grids(&cfg.grid, &model, false).unwrap();
    let op = OperatorHandle::new(model, grid).unwrap();
    let sols = solve_all(&op, &cfg.solver.policy(), cfg.solver.method).unwrap();
    let mut worst = 0.0f64;
    for s in &sols {
        let phi = uncoupled(&op, s.family, s.index).unwrap();
        let scale = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in s.blocks.iter().zip(phi.iter()) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    worst
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn main() -> ExitCode {
    let cfg = desk();
    let mut lines = Vec::new();

    let t = Instant::now();
    let verdict = run_battery(&cfg).expect("battery runs");
    let battery_secs = t.elapsed().as_secs_f64();

    // 1. Zero coupling.
    let eig = zero_coupling_eigenfunctions(&cfg);
    let w = get(&verdict, "zero_coupling_wave_operator");
    let f = get(&verdict, "zero_coupling_field_map");
    lines.push(Line {
        id: 1,
        name: "zero-coupling exactness",
        pass: eig <= 1e-14 && w.value <= 1e-14 && f.value <= 1e-12,
        detail: format!(
            "eigenfunctions {eig:.2e} (<= 1e-14), W defect {:.2e} (<= 1e-14), field map {:.2e} (<= 1e-12)",
            w.value, f.value
        ),
    });

    // 2. First-order scaling.
    let model = cfg.medium.build().unwrap();
    let n = build_grids(&cfg.grid, &model, false).unwrap().len();
    let o = get(&verdict, "order_scaling");
    lines.push(Line {
        id: 2,
        name: "first-order scaling",
        pass: (1..=8).contains(&model.voxels.len())
            && n <= 2000
            && (1.9..=2.1).contains(&o.value)
            && decreasing(&o.trend),
        detail: format!(
            "slope {:.4} in [1.9, 2.1] over scales {{0.1, 0.05, 0.025}}; {} voxels, N = {n}",
            o.value,
            model.voxels.len()
        ),
    });

    // 3. Unitarity over three factor-2 refinements.
    let u = get(&verdict, "unitarity_refinement");
    let (unit, compl) = u.trend.split_at(u.trend.len() / 2);
    lines.push(Line {
        id: 3,
        name: "unitarity under refinement",
        pass: unit.len() == 3
            && decreasing(unit)
            && decreasing(compl)
            && unit[2] <= 1e-3
            && compl[2] <= 1e-3,
        detail: format!("W^dag W - I: {}; W W^dag - I: {}; final <= 1e-3", sci(unit), sci(compl)),
    });

    // 4. Eigen-residuals.
    let r = get(&verdict, "eigen_residual");
    lines.push(Line {
        id: 4,
        name: "eigen-residuals",
        pass: r.value <= 1e-6 && r.trend[1] <= 1e-8,
        detail: format!(
            "max residual {:.2e} (<= 1e-6); structured vs dense LU {:.2e}",
            r.value, r.trend[1]
        ),
    });

    // 5. Kernel identity.
    let k = get(&verdict, "kernel_l_paths");
    lines.push(Line {
        id: 5,
        name: "kernel identity L = (nu^2/c^2)(G0 + F)",
        pass: k.value <= 1e-6 && cfg.verify.kernel.separations.iter().all(|s| *s >= 2.0),
        detail: format!("max relative deviation {:.2e} (<= 1e-6)", k.value),
    });

    // 6. Transverse delta.
    let d = get(&verdict, "transverse_delta");
    lines.push(Line {
        id: 6,
        name: "transverse-delta completeness",
        pass: d.value <= 1e-3 && cfg.verify.kernel.resolution >= 50.0,
        detail: format!(
            "max relative deviation {:.2e} (<= 1e-3); halved cutoff {:.2e}",
            d.value, d.trend[1]
        ),
    });

    // 7. Sokhotski-Plemelj.
    let s = get(&verdict, "sokhotski_plemelj");
    lines.push(Line {
        id: 7,
        name: "shift extrapolation vs principal value",
        pass: s.value <= 1e-4,
        detail: format!("max relative deviation {:.2e} (<= 1e-4)", s.value),
    });

    // 8. Bulk identity failure.
    let b = get(&verdict, "bulk_identity");
    lines.push(Line {
        id: 8,
        name: "bulk-identity failure",
        pass: b.trend.len() == 3 && b.trend[0] >= 0.5 && decreasing(&b.trend),
        detail: format!("ratios {:.4?} (first >= 0.5, decreasing) over thicknesses {:?}", b.trend, cfg.verify.bulk.thicknesses),
    });

    // 9. Dense oracle.
    let dens = get(&verdict, "dense_spectral_density");
    let min = get(&verdict, "dense_min_eigenvalue");
    lines.push(Line {
        id: 9,
        name: "dense-oracle equivalence",
        pass: n <= 500 && dens.value <= 0.02 && min.value >= -1e-8,
        detail: format!(
            "density L1 {:.2e} (<= 0.02); min eigenvalue / ||M|| {:.2e} (>= -1e-8); N = {n}",
            dens.value, min.value
        ),
    });

    // 10. Determinism.
    let again = run_battery(&cfg).expect("battery runs");
    let (a, b) = (verdict_json(&verdict), verdict_json(&again));
    lines.push(Line {
        id: 10,
        name: "determinism",
        pass: a.as_bytes() == b.as_bytes(),
        detail: format!("two battery runs, {} bytes of verdict JSON", a.len()),
    });

    println!("acceptance: battery {battery_secs:.1} s");
    let mut ok = true;
    for l in &lines {
        ok &= l.pass;
        println!(
            "criterion {:>2} {}  {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
