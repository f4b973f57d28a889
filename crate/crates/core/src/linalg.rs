//! Small dense helpers and a restarted GMRES for complex systems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `max |A - I|` over all entries.
pub fn identity_defect(a: &CMatrix) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = if i == j { a[(i, j)] - c(1.0) } else { a[(i, j)] };
            m = m.max(d.norm());
        }
    }
    m
}

/// Crude reciprocal condition estimate from the pivots of an LU factor.
pub fn pivot_rcond(u_diag: impl Iterator<Item = Complex64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in u_diag {
        lo = lo.min(d.norm());
        hi = hi.max(d.norm());
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Outcome of a GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Restarted GMRES for `A x = b` with `A` given as a closure.
pub fn gmres<F>(apply: F, b: &[Complex64], restart: usize, tol: f64, max_iter: usize) -> Result<GmresOutcome>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![c(0.0); n];
    let mut trace = Vec::new();
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            trace,
        });
    }
    let m = restart.max(1).min(n.max(1));
    let mut iterations = 0;
    while iterations < max_iter {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        trace.push(beta / bnorm);
        if beta / bnorm <= tol {
            return Ok(GmresOutcome {
                x,
                iterations,
                trace,
            });
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![c(0.0); m]; m + 1];
        let mut cs = vec![c(0.0); m];
        let mut sn = vec![c(0.0); m];
        let mut g = vec![c(0.0); m + 1];
        g[0] = c(beta);
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            let mut w = apply(&basis[k]);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(v, &w);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = c(wn);
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k].norm_sqr() + h[k + 1][k].norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = c(denom);
            h[k + 1][k] = c(0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            let res = g[k + 1].norm() / bnorm;
            trace.push(res);
            if res <= tol || wn == 0.0 || iterations >= max_iter {
                break;
            }
            basis.push(w.iter().map(|z| z / wn).collect());
        }
        let mut y = vec![c(0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
    let ax = apply(&x);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let res = norm(&r) / bnorm;
    trace.push(res);
    if res <= tol {
        Ok(GmresOutcome {
            x,
            iterations,
            trace,
        })
    } else {
        Err(Error::NotConverged { iterations, trace })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmres_solves_small_complex_system() {
        let a = CMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                Complex64::new(3.0 + i as f64, 0.5)
            } else {
                Complex64::new(0.1 * (i + 2 * j) as f64 / 6.0, -0.05)
            }
        });
        let b: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let out = gmres(
            |x| {
                let v = nalgebra::DVector::from_column_slice(x);
                (&a * v).iter().copied().collect()
            },
            &b,
            3,
            1e-13,
            200,
        )
        .unwrap();
        let ax = &a * nalgebra::DVector::from_column_slice(&out.x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).norm() < 1e-11);
        }
    }
}
