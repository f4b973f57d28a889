//! Gauss-Legendre rules, barycentric interpolation weights and
//! Richardson extrapolation coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A quadrature rule on `[a, b]` together with barycentric interpolation
/// weights for its nodes (defined up to a common factor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub barycentric: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &n) in self.nodes.iter().enumerate() {
            if (n - x).abs() < (self.nodes[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    pub fn contains_open(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }
}

/// Legendre polynomial `P_n(t)` and its derivative.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule on `[a, b]`, nodes ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::Config("quadrature needs at least one node".into()));
    }
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Config(format!("invalid interval [{a}, {b}]")));
    }
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let weight = 2.0 / ((1.0 - x * x) * dp * dp);
        t[i] = -x;
        t[n - 1 - i] = x;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let barycentric = t
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(j, (&tj, &wj))| {
            let s = ((1.0 - tj * tj) * wj).sqrt();
            if j % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect();
    Ok(GaussRule {
        a,
        b,
        nodes: t.iter().map(|&x| mid + half * x).collect(),
        weights: w.iter().map(|&x| half * x).collect(),
        barycentric,
    })
}

/// Coefficients `c_i` with `sum_i c_i f(eta_i)` the value at zero of the
/// polynomial interpolating `f` at the given shifts.
pub fn richardson_weights(etas: &[f64]) -> Vec<f64> {
    (0..etas.len())
        .map(|i| {
            etas.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &ej)| ej / (ej - etas[i]))
                .product()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_rule_integrates_sine() {
        let r = gauss_legendre(8, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((r.integrate(f64::sin) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exact_for_polynomials() {
        let r = gauss_legendre(5, -1.0, 3.0).unwrap();
        let exact = (3f64.powi(10) - 1.0) / 10.0;
        assert!((r.integrate(|x| x.powi(9)) - exact).abs() < 1e-9 * exact);
        assert!((r.weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn richardson_recovers_quadratic_at_zero() {
        let etas = [1e-2, 1e-3, 1e-4];
        let c = richardson_weights(&etas);
        let f = |x: f64| 3.0 - 2.0 * x + 7.0 * x * x;
        let v: f64 = c.iter().zip(&etas).map(|(ci, &e)| ci * f(e)).sum();
        assert!((v - 3.0).abs() < 1e-12);
    }
}
