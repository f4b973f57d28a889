//! Realizations of the `+-i0` prescription for integrals of the form
//! `int_a^b f(x) / (x^2 - lambda^2 + i0) dx` on a Gauss rule.
//!
//! Every weight set here is expressed as a per-node complex weight `W_b`
//! with `sum_b W_b f(x_b)` approximating the singular integral.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{richardson_weights, GaussRule};

/// Sign of the infinitesimal in the denominator `x^2 - lambda^2 + sign * i0`.
///
/// `Plus` is the outgoing convention used for `W_-` and the vacuum kernel
/// `G0^-`; `Minus` is its complex conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    /// Factor `s` such that the denominator is `x^2 - lambda^2 + i s eta`.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Regularization {
    /// Shifts `eta_i * lambda^2` followed by Richardson extrapolation to zero.
    ComplexShift { etas: Vec<f64> },
    /// Principal value plus the explicit delta term.
    PvSplit,
    /// One absolute shift `eta`, no extrapolation (Abel-regularized limit).
    FiniteShift { eta: f64 },
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::ComplexShift {
            etas: RegularizationPolicy::DEFAULT_ETAS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationPolicy {
    pub variant: Regularization,
    pub sign: Sign,
}

impl RegularizationPolicy {
    pub const DEFAULT_ETAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

    pub fn complex_shift(sign: Sign) -> Self {
        Self {
            variant: Regularization::ComplexShift {
                etas: Self::DEFAULT_ETAS.to_vec(),
            },
            sign,
        }
    }

    pub fn pv_split(sign: Sign) -> Self {
        Self {
            variant: Regularization::PvSplit,
            sign,
        }
    }

    pub fn finite_shift(eta: f64, sign: Sign) -> Self {
        Self {
            variant: Regularization::FiniteShift { eta },
            sign,
        }
    }

    pub fn with_sign(&self, sign: Sign) -> Self {
        Self {
            variant: self.variant.clone(),
            sign,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.variant {
            Regularization::ComplexShift { etas } => {
                if etas.len() < 2 {
                    return Err(Error::Config("extrapolation needs at least two shifts".into()));
                }
                if etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                    return Err(Error::Config(format!("shifts must be positive: {etas:?}")));
                }
                if etas.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::Config(format!("shifts must decrease strictly: {etas:?}")));
                }
            }
            Regularization::PvSplit => {}
            Regularization::FiniteShift { eta } => {
                if !(*eta > 0.0 && eta.is_finite()) {
                    return Err(Error::Config(format!("finite shift must be positive, got {eta}")));
                }
            }
        }
        Ok(())
    }
}

/// How the smooth factor is evaluated at the pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    /// Value at the nearest node; the singular remainder lands on that node only.
    Nearest,
    /// Barycentric Lagrange interpolant through all nodes.
    Lagrange,
}

/// `int_a^b dx / (x^2 - z)` for complex `z` off the real segment `[a^2, b^2]`.
pub fn rational_integral(a: f64, b: f64, z: Complex64) -> Complex64 {
    let s = z.sqrt();
    let a = Complex64::new(a, 0.0);
    let b = Complex64::new(b, 0.0);
    ((b - s).ln() - (a - s).ln() - (b + s).ln() + (a + s).ln()) / (2.0 * s)
}

/// Boundary value of [`rational_integral`] at `z = lambda^2 - i sign 0`:
/// principal value plus the delta contribution when `a < lambda < b`.
pub fn rational_integral_limit(a: f64, b: f64, lambda: f64, sign: Sign) -> Complex64 {
    let pv = ((b - lambda) * (a + lambda) / ((b + lambda) * (a - lambda))).abs().ln() / (2.0 * lambda);
    let delta = if lambda > a && lambda < b {
        -sign.factor() * PI / (2.0 * lambda)
    } else {
        0.0
    };
    Complex64::new(pv, delta)
}

/// Product-integration weights at a single pole `s` (`z = s^2`).
///
/// `singular` is the exact integral of the rational factor at that pole.
/// The formulas are arranged so that `s` may sit exactly on a node.
fn pole_weights(rule: &GaussRule, s: Complex64, singular: Complex64, interp: Interp) -> Vec<Complex64> {
    let z = s * s;
    let x = &rule.nodes;
    let w = &rule.weights;
    let n = rule.nearest(s.re);
    let plain = |j: usize| Complex64::new(w[j], 0.0) / (x[j] * x[j] - z);
    let rest: Complex64 = (0..x.len()).filter(|&j| j != n).map(plain).sum();
    match interp {
        Interp::Nearest => (0..x.len())
            .map(|b| {
                if b == n {
                    singular - rest
                } else {
                    plain(b)
                }
            })
            .collect(),
        Interp::Lagrange => {
            let beta = &rule.barycentric;
            let mut q = vec![Complex64::new(0.0, 0.0); x.len()];
            for j in 0..x.len() {
                if j != n {
                    q[j] = beta[j] / (s - x[j]);
                }
            }
            let q_rest: Complex64 = q.iter().sum();
            let dn = s - x[n];
            let s_p = q_rest * dn + beta[n];
            let ell = |j: usize| {
                if j == n {
                    Complex64::new(beta[n], 0.0) / s_p
                } else {
                    q[j] * dn / s_p
                }
            };
            let xn_plus = s + x[n];
            (0..x.len())
                .map(|b| {
                    let lb = ell(b);
                    if b == n {
                        -w[n] * q_rest / (s_p * xn_plus) - lb * rest + lb * singular
                    } else {
                        plain(b) - lb * rest + q[b] * w[n] / (s_p * xn_plus) + lb * singular
                    }
                })
                .collect()
        }
    }
}

/// Weights `W_b` approximating `int f(x) / (x^2 - lambda^2 + sign i0)` on `rule`.
///
/// When `lambda` lies outside `(a, b)` no node is on shell and every variant
/// reduces to plain division by `x_b^2 - z`.
pub fn singular_weights(
    rule: &GaussRule,
    lambda: f64,
    policy: &RegularizationPolicy,
    interp: Interp,
) -> Vec<Complex64> {
    let sgn = policy.sign.factor();
    let on_shell = rule.contains_open(lambda);
    let shifted = |eta: f64, extrapolated: bool| -> Vec<Complex64> {
        let z = Complex64::new(lambda * lambda, -sgn * eta);
        if on_shell && extrapolated {
            pole_weights(rule, z.sqrt(), rational_integral(rule.a, rule.b, z), interp)
        } else {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| Complex64::new(w, 0.0) / (x * x - z))
                .collect()
        }
    };
    match &policy.variant {
        Regularization::ComplexShift { etas } => {
            let c = richardson_weights(etas);
            let mut out = vec![Complex64::new(0.0, 0.0); rule.len()];
            for (ci, &e) in c.iter().zip(etas) {
                for (o, v) in out.iter_mut().zip(shifted(e * lambda * lambda, true)) {
                    *o += ci * v;
                }
            }
            out
        }
        Regularization::FiniteShift { eta } => shifted(*eta, false),
        Regularization::PvSplit => {
            if on_shell {
                pole_weights(
                    rule,
                    Complex64::new(lambda, 0.0),
                    rational_integral_limit(rule.a, rule.b, lambda, policy.sign),
                    interp,
                )
            } else {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| Complex64::new(w / (x * x - lambda * lambda), 0.0))
                    .collect()
            }
        }
    }
}

/// Diagonal of the free resolvent on one sub-grid: `D_b = W_b / w_b` with the
/// nearest-shell rule, so off-shell nodes see plain division.
pub fn resolvent_diagonal(rule: &GaussRule, lambda: f64, policy: &RegularizationPolicy) -> Vec<Complex64> {
    singular_weights(rule, lambda, policy, Interp::Nearest)
        .into_iter()
        .zip(&rule.weights)
        .map(|(v, &w)| v / w)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn limit_matches_small_shift() {
        let z = Complex64::new(1.0, -1e-10);
        let a = rational_integral(0.0, 2.0, z);
        let b = rational_integral_limit(0.0, 2.0, 1.0, Sign::Plus);
        assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        let c = rational_integral_limit(0.0, 2.0, 1.0, Sign::Minus);
        assert!((c - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn lagrange_weights_exact_for_polynomials() {
        let rule = gauss_legendre(12, 0.0, 3.0).unwrap();
        let f = |x: f64| 1.0 + x - 0.3 * x * x;
        let lam = 1.3;
        let policy = RegularizationPolicy::pv_split(Sign::Plus);
        let w = singular_weights(&rule, lam, &policy, Interp::Lagrange);
        let v: Complex64 = w.iter().zip(&rule.nodes).map(|(wb, &x)| wb * f(x)).sum();
        // (f(x) - f(lam)) / (x^2 - lam^2) is a polynomial: Gauss-exact.
        let smooth = rule.integrate(|x| (f(x) - f(lam)) / (x * x - lam * lam));
        let expected = smooth + f(lam) * rational_integral_limit(0.0, 3.0, lam, Sign::Plus);
        assert!((v - expected).norm() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn on_node_lambda_is_finite() {
        let rule = gauss_legendre(10, 0.0, 2.0).unwrap();
        let lam = rule.nodes[4];
        let policy = RegularizationPolicy::pv_split(Sign::Plus);
        for interp in [Interp::Nearest, Interp::Lagrange] {
            let on = singular_weights(&rule, lam, &policy, interp);
            let near = singular_weights(&rule, lam * (1.0 + 1e-9), &policy, interp);
            for (a, b) in on.iter().zip(&near) {
                assert!(a.is_finite());
                assert!((a - b).norm() < 1e-6 * (1.0 + a.norm()));
            }
        }
    }
}
