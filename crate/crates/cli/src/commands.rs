//! Subcommand bodies.

use num_complex::Complex64;
use polariton_core::config::RunConfig;
use polariton_core::observables::{efield_mode_map, limit_study as run_limit_study, log_log_slope, spectral_report};
use polariton_core::regularization::Regularization;
use polariton_core::solver::{solve_all, Family};
use polariton_core::verify::{all_pass, check_dense_oracle, run_battery, CheckResult, Verdict};
use polariton_core::{build_grids, OperatorHandle};
use serde_json::json;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::output::{fmt, read_points, sha256_hex, write_json, CsvOut};

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad points file, interior points, unwritable output.
    Input(String),
    Solver(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Solver(m) => f.write_str(m),
        }
    }
}

impl From<polariton_core::Error> for CliError {
    fn from(e: polariton_core::Error) -> Self {
        match e {
            polariton_core::Error::InteriorPoints(rows) => {
                let rows: Vec<usize> = rows.iter().map(|r| r + 1).collect();
                CliError::Input(format!("evaluation points inside the medium at data rows {rows:?}"))
            }
            e if e.is_input_error() => CliError::Input(e.to_string()),
            e => CliError::Solver(e.to_string()),
        }
    }
}

pub enum Outcome {
    Success,
    ChecksFailed,
}

pub struct Context {
    pub command: &'static str,
    pub cfg: RunConfig,
    pub config_path: PathBuf,
    pub hash: String,
    pub out: PathBuf,
    pub workers: usize,
    started: Instant,
}

impl Context {
    /// Reads and validates the config, sizes the thread pool and creates the
    /// output directory. The directory is `--out`, then `POLARITON_OUT`, then
    /// the config's `output.dir`.
    pub fn load(
        command: &'static str,
        config: Option<&Path>,
        out: Option<PathBuf>,
        workers: Option<usize>,
    ) -> Result<Self, CliError> {
        let path = config.ok_or_else(|| CliError::Input("--config <path> is required".into()))?;
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Input(format!("config {} is not UTF-8", path.display())))?;
        let cfg = RunConfig::from_toml_str(&text)?;
        let workers = match workers.or(cfg.workers) {
            Some(0) => return Err(CliError::Input("--workers must be positive".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot start {workers} workers: {e}")))?;
        let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        Ok(Self {
            command,
            cfg,
            config_path: path.to_path_buf(),
            hash: sha256_hex(&bytes),
            out,
            workers,
            started: Instant::now(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn operator(&self) -> Result<OperatorHandle, CliError> {
        let model = self.cfg.medium.build()?;
        let pv = matches!(self.cfg.solver.regularization, Regularization::PvSplit);
        let grid = build_grids(&self.cfg.grid, &model, pv)?;
        Ok(OperatorHandle::new(model, grid)?.with_dense_cap(self.cfg.solver.dense_cap))
    }

    /// The only file with a timestamp.
    fn manifest(&self, outputs: &[&str], summary: serde_json::Value) -> Result<(), CliError> {
        let value = json!({
            "command": self.command,
            "config_path": self.config_path.display().to_string(),
            "config_sha256": self.hash,
            "config": self.cfg,
            "versions": {
                "polariton": env!("CARGO_PKG_VERSION"),
            },
            "workers": self.workers,
            "outputs": outputs,
            "summary": summary,
            "timings": { "total_seconds": self.started.elapsed().as_secs_f64() },
            "timestamp": chrono::Utc::now().to_rfc3339(),
        });
        write_json(&self.path("manifest.json"), &value)
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::E => "e",
        Family::M => "m",
    }
}

pub fn solve(ctx: &Context) -> Result<Outcome, CliError> {
    let op = ctx.operator()?;
    let sols = solve_all(&op, &ctx.cfg.solver.policy(), ctx.cfg.solver.method)?;
    let report = spectral_report(&op, &sols)?;

    let mut modes = CsvOut::create(
        &ctx.path("modes.csv"),
        &ctx.hash,
        &["family", "index", "lambda", "theta", "eta", "polarization", "parity", "voxel", "component", "norm", "residual"],
    )?;
    for e in &report.e_family {
        modes.row([
            "e".to_string(),
            e.index.to_string(),
            fmt(e.omega),
            fmt(e.theta),
            fmt(e.eta),
            format!("{:?}", e.polarization).to_lowercase(),
            format!("{:?}", e.parity).to_lowercase(),
            String::new(),
            String::new(),
            fmt(e.norm),
            fmt(e.residual),
        ])?;
    }
    for m in &report.m_family {
        modes.row([
            "m".to_string(),
            m.index.to_string(),
            fmt(m.nu),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            m.voxel.to_string(),
            m.j.to_string(),
            fmt(m.norm),
            fmt(m.residual),
        ])?;
    }
    modes.finish()?;

    let mut blocks = CsvOut::create(&ctx.path("blocks.csv"), &ctx.hash, &["family", "index", "entry", "re", "im"])?;
    for s in &sols {
        for (entry, z) in s.blocks.iter().enumerate() {
            blocks.row([
                family_name(s.family).to_string(),
                s.index.to_string(),
                entry.to_string(),
                fmt(z.re),
                fmt(z.im),
            ])?;
        }
    }
    blocks.finish()?;

    println!(
        "solved {} e-family and {} m-family modes; max residual {:.3e}",
        report.e_family.len(),
        report.m_family.len(),
        report.max_residual
    );
    ctx.manifest(
        &["modes.csv", "blocks.csv"],
        json!({
            "n_field": op.n_field(),
            "n_medium": op.n_medium(),
            "max_residual": report.max_residual,
        }),
    )?;
    Ok(Outcome::Success)
}

fn norm3(c: &[Complex64; 3]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

pub fn field_map(ctx: &Context, points_path: &Path) -> Result<Outcome, CliError> {
    let points = read_points(points_path)?;
    let op = ctx.operator()?;
    polariton_core::observables::validate_exterior(&op.model, &points)?;
    let sols = solve_all(&op, &ctx.cfg.solver.policy(), ctx.cfg.solver.method)?;
    let map = efield_mode_map(&op, &sols, &points)?;
    let lambda_of = |family: Family, index: usize| -> f64 {
        match family {
            Family::E => sols[index].lambda,
            Family::M => sols[op.n_field() + index].lambda,
        }
    };

    let mut rows = CsvOut::create(
        &ctx.path("field_map.csv"),
        &ctx.hash,
        &[
            "point", "x", "y", "z", "family", "mode", "lambda", "weight", "ex_re", "ex_im", "ey_re", "ey_im", "ez_re",
            "ez_im",
        ],
    )?;
    for (p, r) in points.iter().enumerate() {
        for (family, coeffs, weights) in [(Family::E, &map.e[p], &map.e_weights), (Family::M, &map.m[p], &map.m_weights)] {
            for (i, (c, w)) in coeffs.iter().zip(weights.iter()).enumerate() {
                let mut rec = vec![
                    p.to_string(),
                    fmt(r[0]),
                    fmt(r[1]),
                    fmt(r[2]),
                    family_name(family).to_string(),
                    i.to_string(),
                    fmt(lambda_of(family, i)),
                    fmt(*w),
                ];
                for z in c {
                    rec.push(fmt(z.re));
                    rec.push(fmt(z.im));
                }
                rows.row(rec)?;
            }
        }
    }
    rows.finish()?;

    let totals = map.totals();
    let mut summary = CsvOut::create(
        &ctx.path("field_summary.csv"),
        &ctx.hash,
        &[
            "point", "x", "y", "z", "e_norm", "m_norm", "total_x_re", "total_x_im", "total_y_re", "total_y_im",
            "total_z_re", "total_z_im",
        ],
    )?;
    for (p, r) in points.iter().enumerate() {
        let e: f64 = map.e[p].iter().zip(&map.e_weights).map(|(c, w)| w * norm3(c)).sum();
        let m: f64 = map.m[p].iter().zip(&map.m_weights).map(|(c, w)| w * norm3(c)).sum();
        let mut rec = vec![p.to_string(), fmt(r[0]), fmt(r[1]), fmt(r[2]), fmt(e.sqrt()), fmt(m.sqrt())];
        for z in &totals[p] {
            rec.push(fmt(z.re));
            rec.push(fmt(z.im));
        }
        summary.row(rec)?;
    }
    summary.finish()?;

    println!(
        "field map: {} points x {} modes; e-family norm {:.6e}, m-family norm {:.6e}",
        points.len(),
        op.len(),
        map.e_norm(),
        map.m_norm()
    );
    ctx.manifest(
        &["field_map.csv", "field_summary.csv"],
        json!({
            "points_file": points_path.display().to_string(),
            "n_points": points.len(),
            "n_modes": op.len(),
            "e_norm": map.e_norm(),
            "m_norm": map.m_norm(),
        }),
    )?;
    Ok(Outcome::Success)
}

fn verdict_value(ctx: &Context, verdict: &Verdict) -> serde_json::Value {
    let checks: serde_json::Value = serde_json::from_str(&polariton_core::verify::verdict_json(verdict))
        .expect("verdict json parses");
    json!({
        "config_sha256": ctx.hash,
        "pass": all_pass(verdict),
        "checks": checks,
    })
}

fn print_checks(verdict: &Verdict) {
    for c in verdict.values() {
        println!(
            "{} {:<28} value={:.6e} tol={:.1e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tol
        );
    }
}

fn finish_checks(ctx: &Context, verdict: &Verdict, file: &str) -> Result<Outcome, CliError> {
    write_json(&ctx.path(file), &verdict_value(ctx, verdict))?;
    print_checks(verdict);
    let failed: Vec<&str> = verdict.values().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    ctx.manifest(&[file], json!({ "pass": failed.is_empty(), "failed": failed }))?;
    Ok(if failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::ChecksFailed
    })
}

pub fn verify(ctx: &Context) -> Result<Outcome, CliError> {
    let verdict = run_battery(&ctx.cfg)?;
    finish_checks(ctx, &verdict, "verdict.json")
}

pub fn oracle_compare(ctx: &Context) -> Result<Outcome, CliError> {
    let verdict: Verdict = check_dense_oracle(&ctx.cfg)?
        .into_iter()
        .map(|c: CheckResult| (c.name.clone(), c))
        .collect();
    finish_checks(ctx, &verdict, "oracle.json")
}

/// Slope between consecutive rows; NaN where either value is not positive.
fn local_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN];
    for i in 1..x.len() {
        out.push(log_log_slope(&x[i - 1..=i], &y[i - 1..=i]).unwrap_or(f64::NAN));
    }
    out
}

pub fn limit_study(ctx: &Context) -> Result<Outcome, CliError> {
    let s = &ctx.cfg.study;
    let model = ctx.cfg.medium.build()?;
    let rows = run_limit_study(
        &model,
        &ctx.cfg.grid,
        s.kind,
        &s.scales,
        &s.points,
        &ctx.cfg.solver.policy(),
        ctx.cfg.solver.method,
    )?;
    let scales: Vec<f64> = rows.iter().map(|r| r.scale).collect();
    let m: Vec<f64> = rows.iter().map(|r| r.m_norm).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.e_deviation).collect();
    let (m_local, e_local) = (local_slopes(&scales, &m), local_slopes(&scales, &e));
    let mut out = CsvOut::create(
        &ctx.path("limit_study.csv"),
        &ctx.hash,
        &["scale", "m_norm", "e_deviation", "m_slope", "e_slope"],
    )?;
    for i in 0..rows.len() {
        out.row([fmt(scales[i]), fmt(m[i]), fmt(e[i]), fmt(m_local[i]), fmt(e_local[i])])?;
    }
    out.finish()?;
    let m_fit = log_log_slope(&scales, &m);
    let e_fit = log_log_slope(&scales, &e);
    println!(
        "{} study over {} scales: m-family slope {}, e-deviation slope {}",
        format!("{:?}", s.kind).to_lowercase(),
        rows.len(),
        m_fit.map_or("n/a".into(), |v| format!("{v:.4}")),
        e_fit.map_or("n/a".into(), |v| format!("{v:.4}"))
    );
    ctx.manifest(
        &["limit_study.csv"],
        json!({ "kind": s.kind, "m_slope": m_fit, "e_slope": e_fit }),
    )?;
    Ok(Outcome::Success)
}
