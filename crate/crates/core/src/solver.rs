//! Lippmann-Schwinger solves `(I + R0(lambda) V) psi = phi` for both families,
//! Born partial sums, the discrete wave operator and the scattering matrix.
//!
//! Internally every solve runs in symmetrized coordinates
//! `x~_a = sqrt(w_a) x_a`, where `V~` is a real symmetric matrix and the
//! uncoupled eigenfunction of label `a` is the unit vector `e_a` (up to the
//! factor `sqrt(w_a)` relating it to the delta-normalized `phi_a`).
//!
//! Because the field-field block of `V` vanishes and the field-medium block
//! factors through the voxel overlap table, the default `Structured` method
//! eliminates the field block exactly and solves a `3 N_vox` system per
//! eigenvalue shell.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gmres, identity_defect, pivot_rcond, CMatrix};
use crate::operator::{apply_coupling_v, apply_omega0_sq, assemble_dense, BlockVector, OperatorHandle};
use crate::quadrature::GaussRule;
use crate::regularization::{resolvent_diagonal, Regularization, RegularizationPolicy, Sign};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative distance below which `lambda` is treated as sitting on a node.
const NODE_COINCIDENCE: f64 = 1e-12;
/// Relative perturbation applied to `lambda` when it sits on a node.
pub const TIE_BREAK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    E,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolveMethod {
    /// Exact elimination of the field block; the default.
    #[default]
    Structured,
    /// LU of the full `N x N` system.
    Dense,
    /// Matrix-free restarted GMRES.
    Gmres {
        restart: usize,
        tol: f64,
        max_iter: usize,
    },
}

/// Resolvent diagonal at one `lambda`, per radial node and per frequency node.
#[derive(Debug, Clone)]
pub struct ShellDiagonal {
    pub lambda: f64,
    pub radial: Vec<Complex64>,
    pub nu: Vec<Complex64>,
    /// Nodes carrying the on-shell remainder, excluded from residuals.
    pub near_radial: Option<usize>,
    pub near_nu: Option<usize>,
}

impl ShellDiagonal {
    pub fn field(&self, op: &OperatorHandle, kappa: usize) -> Complex64 {
        self.radial[op.grid.field[kappa].radial_index]
    }

    pub fn medium(&self, op: &OperatorHandle, m: usize) -> Complex64 {
        self.nu[op.grid.medium[m].nu_index]
    }

    pub fn is_near(&self, op: &OperatorHandle, idx: usize) -> bool {
        if idx < op.n_field() {
            Some(op.grid.field[idx].radial_index) == self.near_radial
        } else {
            Some(op.grid.medium[idx - op.n_field()].nu_index) == self.near_nu
        }
    }
}

fn near_node(rule: &GaussRule, x: f64, policy: &RegularizationPolicy) -> Option<usize> {
    match policy.variant {
        Regularization::FiniteShift { .. } => None,
        _ if rule.contains_open(x) => Some(rule.nearest(x)),
        _ => None,
    }
}

/// Resolvent diagonal `(Omega0^2 - lambda^2 + sign i0)^{-1}` on the grid.
pub fn shell_diagonal(op: &OperatorHandle, lambda: f64, policy: &RegularizationPolicy) -> ShellDiagonal {
    let c = op.grid.c;
    // The radial rule lives in k; an absolute shift in omega^2 is eta / c^2 there.
    let radial_policy = match policy.variant {
        Regularization::FiniteShift { eta } => RegularizationPolicy::finite_shift(eta / (c * c), policy.sign),
        _ => policy.clone(),
    };
    let lk = lambda / c;
    let radial = resolvent_diagonal(&op.grid.radial, lk, &radial_policy)
        .into_iter()
        .map(|d| d / (c * c))
        .collect();
    ShellDiagonal {
        lambda,
        radial,
        nu: resolvent_diagonal(&op.grid.nu_rule, lambda, policy),
        near_radial: near_node(&op.grid.radial, lk, policy),
        near_nu: near_node(&op.grid.nu_rule, lambda, policy),
    }
}

/// Node of either sub-grid coinciding with `lambda`, if any.
fn coinciding_node(op: &OperatorHandle, lambda: f64) -> Option<f64> {
    let c = op.grid.c;
    op.grid
        .radial
        .nodes
        .iter()
        .map(|k| c * k)
        .chain(op.grid.nu_rule.nodes.iter().copied())
        .find(|x| (x - lambda).abs() <= NODE_COINCIDENCE * lambda)
}

/// Applies the free resolvent to a block vector.
pub fn resolvent_solve(
    op: &OperatorHandle,
    lambda: f64,
    rhs: &BlockVector,
    policy: &RegularizationPolicy,
) -> Result<BlockVector> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    policy.validate()?;
    if rhs.u.len() != op.n_field() || rhs.v.len() != op.n_medium() {
        return Err(Error::ShapeMismatch {
            expected: op.len(),
            got: rhs.len(),
        });
    }
    if matches!(policy.variant, Regularization::PvSplit) {
        if let Some(node) = coinciding_node(op, lambda) {
            return Err(Error::SingularNode { lambda, node });
        }
    }
    let d = shell_diagonal(op, lambda, policy);
    Ok(BlockVector {
        u: rhs
            .u
            .iter()
            .enumerate()
            .map(|(k, z)| z * d.field(op, k))
            .collect(),
        v: rhs
            .v
            .iter()
            .enumerate()
            .map(|(m, z)| z * d.medium(op, m))
            .collect(),
    })
}

/// A coupled generalized eigenfunction in natural (delta-normalized) coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolaritonEigenfunction {
    pub family: Family,
    /// Position of the label within its family.
    pub index: usize,
    pub lambda: f64,
    pub blocks: BlockVector,
    pub sign: Sign,
    /// `||(Omega^2 - lambda^2) psi|| / ||psi||` outside the on-shell nodes.
    pub residual: f64,
}

/// Flat index of a label in the full label list.
pub fn flat_index(op: &OperatorHandle, family: Family, index: usize) -> Result<usize> {
    match family {
        Family::E if index < op.n_field() => Ok(index),
        Family::M if index < op.n_medium() => Ok(op.n_field() + index),
        _ => Err(Error::Domain(format!("label {index} out of range for family {family:?}"))),
    }
}

/// Eigenvalue carried by a flat label index.
pub fn label_lambda(op: &OperatorHandle, idx: usize) -> f64 {
    op.omega0_sq(idx).sqrt()
}

/// Lambda actually used for a solve, after the tie-break rule.
pub(crate) fn effective_lambda(op: &OperatorHandle, lambda: f64, policy: &RegularizationPolicy) -> f64 {
    if matches!(policy.variant, Regularization::PvSplit) {
        if let Some(node) = coinciding_node(op, lambda) {
            let moved = lambda * (1.0 + TIE_BREAK);
            warn!("lambda = {lambda} sits on grid node {node}; perturbed to {moved}");
            return moved;
        }
    }
    lambda
}

fn sqrt_weights(op: &OperatorHandle) -> Vec<f64> {
    op.weights().iter().map(|w| w.sqrt()).collect()
}

/// `V~ x` in symmetrized coordinates.
pub fn apply_v_sym(op: &OperatorHandle, x: &[Complex64]) -> Vec<Complex64> {
    let sw = sqrt_weights(op);
    let nat: Vec<Complex64> = x.iter().zip(&sw).map(|(z, s)| z / *s).collect();
    let y = apply_coupling_v(op, &BlockVector::from_flat(&nat, op.n_field())).expect("conforming vector");
    y.iter().zip(&sw).map(|(z, s)| z * *s).collect()
}

/// Per-label resolvent diagonal in flat order.
fn expand_diagonal(op: &OperatorHandle, d: &ShellDiagonal) -> Vec<Complex64> {
    (0..op.n_field())
        .map(|k| d.field(op, k))
        .chain((0..op.n_medium()).map(|m| d.medium(op, m)))
        .collect()
}

/// Eliminated system for one shell: `(I - C Sigma) y = C P^T r`.
struct StructuredShell<'a> {
    op: &'a OperatorHandle,
    diag: Vec<Complex64>,
    a: Vec<f64>,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    c_mat: CMatrix,
}

impl<'a> StructuredShell<'a> {
    fn new(op: &'a OperatorHandle, d: &ShellDiagonal) -> Result<Self> {
        let nvj = op.n_vj();
        let nf = op.n_field();
        let diag = expand_diagonal(op, d);
        let mut gamma = CMatrix::zeros(nvj, nvj);
        for kappa in 0..nf {
            let s = diag[kappa] * (op.field_weights()[kappa] * op.omega()[kappa] * op.omega()[kappa]);
            if s == ZERO {
                continue;
            }
            let t = op.overlap_row(kappa);
            for j in 0..nvj {
                let sj = s * t[j];
                for i in 0..nvj {
                    gamma[(i, j)] += sj * t[i];
                }
            }
        }
        for v in 0..op.grid.n_voxels {
            for j in 0..3 {
                gamma[(3 * v + j, 3 * v + j)] -= ONE / op.voxel_volume(v);
            }
        }
        let a: Vec<f64> = (0..op.n_medium())
            .map(|m| op.medium_weights()[m].sqrt() * op.alpha_of(m))
            .collect();
        let mut sigma = vec![ZERO; nvj];
        for m in 0..op.n_medium() {
            sigma[op.vj_of(m)] += diag[nf + m] * (a[m] * a[m]);
        }
        let mut k = CMatrix::identity(nvj, nvj);
        for j in 0..nvj {
            for i in 0..nvj {
                k[(i, j)] -= gamma[(i, j)] * sigma[j];
            }
        }
        let lu = k.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem {
                rcond: 0.0,
                detail: format!("reduced system at lambda = {}", d.lambda),
            });
        }
        Ok(Self {
            op,
            diag,
            a,
            lu,
            c_mat: gamma,
        })
    }

    /// Solves for the symmetrized column of label `col`.
    fn solve_unit(&self, col: usize) -> Result<Vec<Complex64>> {
        let op = self.op;
        let nf = op.n_field();
        let nvj = op.n_vj();
        let nm = op.n_medium();
        // r = phi_v - D_m B^T phi_u
        let mut r = vec![ZERO; nm];
        if col < nf {
            let s = op.field_weights()[col].sqrt() * op.omega()[col];
            let t = op.overlap_row(col);
            for m in 0..nm {
                r[m] = -self.diag[nf + m] * (self.a[m] * s * t[op.vj_of(m)]);
            }
        } else {
            r[col - nf] = ONE;
        }
        let mut p = nalgebra::DVector::<Complex64>::zeros(nvj);
        for m in 0..nm {
            p[op.vj_of(m)] += r[m] * self.a[m];
        }
        let rhs = &self.c_mat * &p;
        let y = self.lu.solve(&rhs).ok_or_else(|| Error::SingularSystem {
            rcond: 0.0,
            detail: format!("reduced solve for column {col}"),
        })?;
        let mut out = vec![ZERO; nf + nm];
        let mut q = vec![ZERO; nvj];
        for m in 0..nm {
            let vj = op.vj_of(m);
            let val = r[m] + self.diag[nf + m] * self.a[m] * y[vj];
            out[nf + m] = val;
            q[vj] += self.a[m] * val;
        }
        for kappa in 0..nf {
            let s: Complex64 = op.overlap_row(kappa).iter().zip(&q).map(|(t, qv)| qv * *t).sum();
            let bv = s * (op.field_weights()[kappa].sqrt() * op.omega()[kappa]);
            out[kappa] = -self.diag[kappa] * bv;
        }
        if col < nf {
            out[col] += ONE;
        }
        Ok(out)
    }
}

/// Dense symmetrized `V~` (real).
fn dense_coupling(op: &OperatorHandle) -> Result<DMatrix<f64>> {
    let mut m = assemble_dense(op)?;
    for i in 0..op.len() {
        m[(i, i)] -= op.omega0_sq(i);
    }
    Ok(m)
}

struct DenseShell {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl DenseShell {
    fn new(op: &OperatorHandle, vt: &DMatrix<f64>, d: &ShellDiagonal) -> Result<Self> {
        let n = op.len();
        let diag = expand_diagonal(op, d);
        let a = CMatrix::from_fn(n, n, |i, j| {
            let base = diag[i] * vt[(i, j)];
            if i == j {
                base + ONE
            } else {
                base
            }
        });
        let lu = a.lu();
        let rcond = pivot_rcond(lu.u().diagonal().iter().copied());
        if !lu.is_invertible() || rcond < 1e-15 {
            return Err(Error::SingularSystem {
                rcond,
                detail: format!("dense system at lambda = {}", d.lambda),
            });
        }
        Ok(Self { lu, n })
    }

    fn solve_unit(&self, col: usize) -> Result<Vec<Complex64>> {
        let mut e = nalgebra::DVector::<Complex64>::zeros(self.n);
        e[col] = ONE;
        let x = self.lu.solve(&e).ok_or_else(|| Error::SingularSystem {
            rcond: 0.0,
            detail: format!("dense solve for column {col}"),
        })?;
        Ok(x.iter().copied().collect())
    }
}

fn gmres_unit(
    op: &OperatorHandle,
    d: &ShellDiagonal,
    col: usize,
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let diag = expand_diagonal(op, d);
    let mut b = vec![ZERO; op.len()];
    b[col] = ONE;
    let out = gmres(
        |x| {
            let vx = apply_v_sym(op, x);
            x.iter()
                .zip(vx.iter().zip(&diag))
                .map(|(xi, (v, di))| xi + di * v)
                .collect()
        },
        &b,
        restart,
        tol,
        max_iter,
    )?;
    Ok(out.x)
}

/// Residual `||(Omega~^2 - lambda^2) x||` restricted to off-shell labels, over `||x||`.
pub fn eigen_residual_sym(op: &OperatorHandle, x: &[Complex64], d: &ShellDiagonal, lambda: f64) -> f64 {
    let vx = apply_v_sym(op, x);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (xi, vi)) in x.iter().zip(&vx).enumerate() {
        den += xi.norm_sqr();
        if d.is_near(op, i) {
            continue;
        }
        let r = xi * (op.omega0_sq(i) - lambda * lambda) + vi;
        num += r.norm_sqr();
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// One group of labels sharing an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shell {
    Radial(usize),
    Nu(usize),
}

fn shell_columns(op: &OperatorHandle, shell: Shell) -> Vec<usize> {
    match shell {
        Shell::Radial(ik) => (0..op.n_field())
            .filter(|&k| op.grid.field[k].radial_index == ik)
            .collect(),
        Shell::Nu(inu) => (0..op.n_medium())
            .filter(|&m| op.grid.medium[m].nu_index == inu)
            .map(|m| op.n_field() + m)
            .collect(),
    }
}

fn shell_lambda(op: &OperatorHandle, shell: Shell) -> f64 {
    match shell {
        Shell::Radial(ik) => op.grid.c * op.grid.radial.nodes[ik],
        Shell::Nu(inu) => op.grid.nu_rule.nodes[inu],
    }
}

/// Symmetrized solution columns with their residuals, for a set of flat indices
/// that share one eigenvalue.
fn solve_columns(
    op: &OperatorHandle,
    lambda: f64,
    cols: &[usize],
    policy: &RegularizationPolicy,
    method: SolveMethod,
    dense_v: Option<&DMatrix<f64>>,
) -> Result<Vec<(usize, Vec<Complex64>, f64)>> {
    let used = effective_lambda(op, lambda, policy);
    let d = shell_diagonal(op, used, policy);
    let mut out = Vec::with_capacity(cols.len());
    match method {
        SolveMethod::Structured => {
            let s = StructuredShell::new(op, &d)?;
            for &col in cols {
                let x = s.solve_unit(col)?;
                let r = eigen_residual_sym(op, &x, &d, lambda);
                out.push((col, x, r));
            }
        }
        SolveMethod::Dense => {
            let owned;
            let vt = match dense_v {
                Some(v) => v,
                None => {
                    owned = dense_coupling(op)?;
                    &owned
                }
            };
            let s = DenseShell::new(op, vt, &d)?;
            for &col in cols {
                let x = s.solve_unit(col)?;
                let r = eigen_residual_sym(op, &x, &d, lambda);
                out.push((col, x, r));
            }
        }
        SolveMethod::Gmres {
            restart,
            tol,
            max_iter,
        } => {
            for &col in cols {
                let x = gmres_unit(op, &d, col, restart, tol, max_iter)?;
                let r = eigen_residual_sym(op, &x, &d, lambda);
                out.push((col, x, r));
            }
        }
    }
    Ok(out)
}

fn to_eigenfunction(
    op: &OperatorHandle,
    col: usize,
    x: &[Complex64],
    residual: f64,
    sign: Sign,
) -> PolaritonEigenfunction {
    let w = op.weights();
    let sa = w[col].sqrt();
    let nat: Vec<Complex64> = x.iter().zip(&w).map(|(z, wx)| z / (wx.sqrt() * sa)).collect();
    let nf = op.n_field();
    let (family, index) = if col < nf {
        (Family::E, col)
    } else {
        (Family::M, col - nf)
    };
    PolaritonEigenfunction {
        family,
        index,
        lambda: label_lambda(op, col),
        blocks: BlockVector::from_flat(&nat, nf),
        sign,
        residual,
    }
}

/// Solves the Lippmann-Schwinger equation for one label.
pub fn solve_ls(
    op: &OperatorHandle,
    family: Family,
    index: usize,
    policy: &RegularizationPolicy,
    method: SolveMethod,
) -> Result<PolaritonEigenfunction> {
    policy.validate()?;
    let col = flat_index(op, family, index)?;
    let lambda = label_lambda(op, col);
    let (_, x, r) = solve_columns(op, lambda, &[col], policy, method, None)?
        .pop()
        .expect("one column");
    Ok(to_eigenfunction(op, col, &x, r, policy.sign))
}

/// Uncoupled eigenfunction `phi_a` in natural coordinates.
pub fn uncoupled(op: &OperatorHandle, family: Family, index: usize) -> Result<BlockVector> {
    let col = flat_index(op, family, index)?;
    let mut x = BlockVector::zeros(op.n_field(), op.n_medium());
    let w = op.weights()[col];
    if col < op.n_field() {
        x.u[col] = Complex64::new(1.0 / w, 0.0);
    } else {
        x.v[col - op.n_field()] = Complex64::new(1.0 / w, 0.0);
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct BornResult {
    pub eigenfunction: PolaritonEigenfunction,
    pub order: usize,
    pub converged: bool,
    /// Relative size of each added term.
    pub trace: Vec<f64>,
}

/// Partial sums of `psi = sum_n (-R0 V)^n phi`.
pub fn born_series(
    op: &OperatorHandle,
    family: Family,
    index: usize,
    policy: &RegularizationPolicy,
    max_order: usize,
    tol: f64,
) -> Result<BornResult> {
    policy.validate()?;
    let col = flat_index(op, family, index)?;
    let lambda = label_lambda(op, col);
    let used = effective_lambda(op, lambda, policy);
    let d = shell_diagonal(op, used, policy);
    let phi = uncoupled(op, family, index)?;
    let mut sum = phi.clone();
    let mut term = phi;
    let mut trace = Vec::new();
    let mut order = 0;
    let mut converged = false;
    for n in 1..=max_order {
        let vt = apply_coupling_v(op, &term)?;
        term = BlockVector {
            u: vt.u.iter().enumerate().map(|(k, z)| -z * d.field(op, k)).collect(),
            v: vt.v.iter().enumerate().map(|(m, z)| -z * d.medium(op, m)).collect(),
        };
        let rel = op.norm(&term) / op.norm(&sum);
        trace.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        sum.axpy(ONE, &term);
        order = n;
    }
    let sw = sqrt_weights(op);
    let sa = sw[col];
    let x: Vec<Complex64> = sum.iter().zip(&sw).map(|(z, s)| z * (s * sa)).collect();
    let residual = eigen_residual_sym(op, &x, &d, lambda);
    Ok(BornResult {
        eigenfunction: PolaritonEigenfunction {
            family,
            index,
            lambda,
            blocks: sum,
            sign: policy.sign,
            residual,
        },
        order,
        converged,
        trace,
    })
}

/// Columns of the wave operator in symmetrized coordinates.
#[derive(Debug, Clone)]
pub struct WaveOperatorMatrix {
    pub matrix: CMatrix,
    pub sign: Sign,
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `max |W^dag W - I|`.
    pub unitarity_defect: f64,
    /// `max |W W^dag - I|`.
    pub completeness_defect: f64,
    /// `max |W Omega0^2 W^dag - Omega^2|` (only under the dense cap).
    pub conjugation_defect: Option<f64>,
}

impl WaveOperatorMatrix {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn all_shells(op: &OperatorHandle) -> Vec<Shell> {
    (0..op.grid.radial.len())
        .map(Shell::Radial)
        .chain((0..op.grid.nu_rule.len()).map(Shell::Nu))
        .collect()
}

/// Column index, symmetrized column and its residual.
type SolvedColumn = (usize, Vec<Complex64>, f64);

/// Solves every label; returns symmetrized columns and residuals in flat order.
pub fn solve_all_columns(
    op: &OperatorHandle,
    policy: &RegularizationPolicy,
    method: SolveMethod,
) -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
    policy.validate()?;
    let n = op.len();
    if n > op.dense_cap {
        return Err(Error::DenseCap {
            n,
            cap: op.dense_cap,
            suggestion: crate::operator::suggest_reduction(op),
        });
    }
    let dense_v = match method {
        SolveMethod::Dense => Some(dense_coupling(op)?),
        _ => None,
    };
    let shells = all_shells(op);
    let results: Vec<(Vec<usize>, Result<Vec<SolvedColumn>>)> = shells
        .par_iter()
        .map(|&s| {
            let cols = shell_columns(op, s);
            let r = solve_columns(op, shell_lambda(op, s), &cols, policy, method, dense_v.as_ref());
            (cols, r)
        })
        .collect();
    let mut columns = vec![Vec::new(); n];
    let mut residuals = vec![0.0; n];
    let mut failed = Vec::new();
    for (cols, r) in results {
        match r {
            Ok(list) => {
                for (col, x, res) in list {
                    columns[col] = x;
                    residuals[col] = res;
                }
            }
            Err(e) => {
                warn!("shell solve failed: {e}");
                failed.extend(cols);
            }
        }
    }
    if !failed.is_empty() {
        failed.sort_unstable();
        return Err(Error::ColumnFailures(failed));
    }
    Ok((columns, residuals))
}

/// Every coupled eigenfunction in natural coordinates.
pub fn solve_all(
    op: &OperatorHandle,
    policy: &RegularizationPolicy,
    method: SolveMethod,
) -> Result<Vec<PolaritonEigenfunction>> {
    let (cols, res) = solve_all_columns(op, policy, method)?;
    Ok(cols
        .iter()
        .zip(&res)
        .enumerate()
        .map(|(i, (x, r))| to_eigenfunction(op, i, x, *r, policy.sign))
        .collect())
}

/// Assembles `W` with its unitarity, completeness and conjugation defects.
pub fn assemble_wave_operator(
    op: &OperatorHandle,
    policy: &RegularizationPolicy,
    method: SolveMethod,
) -> Result<WaveOperatorMatrix> {
    let (cols, residuals) = solve_all_columns(op, policy, method)?;
    let n = op.len();
    let matrix = CMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let lambdas: Vec<f64> = (0..n).map(|i| label_lambda(op, i)).collect();
    let wh = matrix.adjoint();
    let unitarity_defect = identity_defect(&(&wh * &matrix));
    let completeness_defect = identity_defect(&(&matrix * &wh));
    let conjugation_defect = match assemble_dense(op) {
        Ok(m) => {
            let mut wl = matrix.clone();
            for j in 0..n {
                let l2 = lambdas[j] * lambdas[j];
                for i in 0..n {
                    wl[(i, j)] *= l2;
                }
            }
            let conj = &wl * &wh;
            let mut d = 0.0f64;
            for j in 0..n {
                for i in 0..n {
                    d = d.max((conj[(i, j)] - m[(i, j)]).norm());
                }
            }
            Some(d)
        }
        Err(_) => None,
    };
    Ok(WaveOperatorMatrix {
        matrix,
        sign: policy.sign,
        lambdas,
        residuals,
        unitarity_defect,
        completeness_defect,
        conjugation_defect,
    })
}

#[derive(Debug, Clone)]
pub struct ScatteringMatrix {
    pub matrix: CMatrix,
    pub unitarity_defect: f64,
}

impl ScatteringMatrix {
    /// Largest entry coupling labels whose eigenvalues differ by more than `gap`.
    pub fn off_shell_max(&self, lambdas: &[f64], gap: f64) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.matrix.ncols() {
            for i in 0..self.matrix.nrows() {
                if (lambdas[i] - lambdas[j]).abs() > gap {
                    m = m.max(self.matrix[(i, j)].norm());
                }
            }
        }
        m
    }
}

/// `S = W_plus^dag W_minus`.
pub fn scattering_matrix(w_plus: &WaveOperatorMatrix, w_minus: &WaveOperatorMatrix) -> Result<ScatteringMatrix> {
    if w_plus.matrix.shape() != w_minus.matrix.shape() || w_plus.lambdas != w_minus.lambdas {
        return Err(Error::GridMismatch("wave operators built on different grids".into()));
    }
    let s = w_plus.matrix.adjoint() * &w_minus.matrix;
    let unitarity_defect = identity_defect(&(s.adjoint() * &s));
    Ok(ScatteringMatrix {
        matrix: s,
        unitarity_defect,
    })
}

/// `Omega^2 psi - lambda^2 psi` in natural coordinates, for diagnostics.
pub fn eigen_defect(op: &OperatorHandle, psi: &PolaritonEigenfunction) -> Result<BlockVector> {
    let mut y = apply_coupling_v(op, &psi.blocks)?;
    let d = apply_omega0_sq(op, &psi.blocks)?;
    y.axpy(ONE, &d);
    y.axpy(Complex64::new(-psi.lambda * psi.lambda, 0.0), &psi.blocks);
    Ok(y)
}
