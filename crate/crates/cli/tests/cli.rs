use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polariton"));
    c.env_remove("POLARITON_OUT");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn desk() -> PathBuf {
    configs().join("desk.toml")
}

fn desk_text() -> String {
    std::fs::read_to_string(desk()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of one of our CSV files (comment line and header skipped).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn solve_writes_modes_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve"], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert!(manifest["timestamp"].is_string());
    let hash = manifest["config_sha256"].as_str().unwrap();
    for f in ["modes.csv", "blocks.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("# config_sha256={hash}"));
    }
    let (_, rows) = read_csv(&dir.path().join("modes.csv"));
    assert_eq!(rows.len(), 228);
}

#[test]
fn solve_outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve"], &desk(), a.path()).status.code(), Some(0));
    assert_eq!(run(&["solve", "--workers", "2"], &desk(), b.path()).status.code(), Some(0));
    for f in ["modes.csv", "blocks.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn unknown_config_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &desk_text().replace("[grid]", "[grid]\nn_kk = 3"));
    let o = run(&["solve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_kk"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &dir.path().join("absent.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dense_cap_exceeded_exits_3_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cap.toml",
        &desk_text().replace("[solver]", "[solver]\ndense_cap = 100"),
    );
    let o = run(&["solve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("reduce n_k"), "{}", stderr(&o));
}

#[test]
fn zero_workers_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--workers", "0"], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from_env");
    let flag_out = dir.path().join("from_flag");
    let o = bin()
        .args(["solve", "--config"])
        .arg(desk())
        .env("POLARITON_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(env_out.join("modes.csv").exists());
    let o = bin()
        .args(["solve", "--config"])
        .arg(desk())
        .arg("--out")
        .arg(&flag_out)
        .env("POLARITON_OUT", dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_out.join("modes.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn field_map_interior_points_exit_2_listing_rows() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "p.csv", "x,y,z\n0,0,1\n0.1,0,0\n0.3,0.05,0\n");
    let o = run(&["field-map", "--points", pts.to_str().unwrap()], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[2, 3]"), "{}", stderr(&o));
}

#[test]
fn field_map_requires_xyz_header() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "p.csv", "a,b,c\n0,0,1\n");
    let o = run(&["field-map", "--points", pts.to_str().unwrap()], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("x,y,z"));
}

#[test]
fn field_map_single_point_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "p.csv", "x,y,z\n0,0,1\n");
    let o = run(&["field-map", "--points", pts.to_str().unwrap()], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("field_map.csv"));
    assert_eq!(rows.len(), 228);
}

#[test]
fn field_map_zero_coupling_has_zero_m_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.toml",
        &desk_text().replace("[medium]", "[medium]\ncoupling_scale = 0.0"),
    );
    let pts = write(dir.path(), "p.csv", "x,y,z\n0,0,1\n0.7,0.4,-0.6\n");
    let o = run(&["field-map", "--points", pts.to_str().unwrap()], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("field_map.csv"));
    let fam = col(&header, "family");
    let first = col(&header, "ex_re");
    let mut m_rows = 0;
    for r in rows.iter().filter(|r| r[fam] == "m") {
        m_rows += 1;
        for v in &r[first..] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
    assert_eq!(m_rows, 2 * 36);
}

#[test]
fn field_map_csv_resums_to_totals() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "p.csv", "x,y,z\n0,0,1\n0.7,0.4,-0.6\n-1.5,0.2,0.3\n");
    let o = run(&["field-map", "--points", pts.to_str().unwrap()], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("field_map.csv"));
    let p = col(&header, "point");
    let first = col(&header, "ex_re");
    let mut sums = [[0.0f64; 6]; 3];
    for r in &rows {
        let i: usize = r[p].parse().unwrap();
        for k in 0..6 {
            sums[i][k] += r[first + k].parse::<f64>().unwrap();
        }
    }
    let (sh, srows) = read_csv(&dir.path().join("field_summary.csv"));
    let t0 = col(&sh, "total_x_re");
    for (i, r) in srows.iter().enumerate() {
        let scale = (0..6).map(|k| r[t0 + k].parse::<f64>().unwrap().abs()).fold(0.0, f64::max);
        for k in 0..6 {
            let t: f64 = r[t0 + k].parse().unwrap();
            assert!((sums[i][k] - t).abs() <= 1e-12 * scale, "point {i} component {k}: {} vs {t}", sums[i][k]);
        }
    }
}

#[test]
fn limit_study_needs_three_scales() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &format!("{}\n[study]\nscales = [0.1, 0.05]\n", desk_text()),
    );
    let o = run(&["limit-study"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn limit_study_coupling_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &format!("{}\n[study]\nkind = \"coupling\"\nscales = [0.1, 0.05, 0.025, 0.0]\n", desk_text()),
    );
    let o = run(&["limit-study"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("limit_study.csv"));
    let (ms, es) = (col(&header, "m_slope"), col(&header, "e_slope"));
    for r in &rows[1..3] {
        assert!((r[ms].parse::<f64>().unwrap() - 1.0).abs() < 0.05);
        assert!((r[es].parse::<f64>().unwrap() - 2.0).abs() < 0.05);
    }
    let zero = &rows[3];
    assert_eq!(zero[col(&header, "m_norm")].parse::<f64>().unwrap(), 0.0);
    assert!(zero[col(&header, "e_deviation")].parse::<f64>().unwrap() < 1e-14);
}

#[test]
fn limit_study_volume_shrinks_m_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &format!("{}\n[study]\nkind = \"volume\"\nscales = [1.0, 0.5, 0.25]\n", desk_text()),
    );
    let o = run(&["limit-study"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("limit_study.csv"));
    let m: Vec<f64> = rows.iter().map(|r| r[col(&header, "m_norm")].parse().unwrap()).collect();
    assert!(m.windows(2).all(|w| w[1] < w[0]), "{m:?}");
}

#[test]
fn oracle_compare_passes_on_desk() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["oracle-compare"], &desk(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["checks"]["dense_spectral_density"]["value"].as_f64().unwrap() <= 0.02);
}

#[test]
fn verify_desk_passes_and_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &desk(), a.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["verify"], &desk(), b.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.path().join("verdict.json")).unwrap(),
        std::fs::read(b.path().join("verdict.json")).unwrap()
    );
}

#[test]
fn verify_coarse_grid_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &configs().join("coarse.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
    assert_eq!(v["checks"]["unitarity_refinement"]["pass"], false);
}
