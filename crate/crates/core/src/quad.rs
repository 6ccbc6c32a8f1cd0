//! Gauss–Legendre rules and an adaptive integrator built on them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = C64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x) * *w;
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive bisection with a fixed Gauss–Legendre rule per panel.
#[derive(Clone, Debug)]
pub struct AdaptiveQuad {
    rule: GaussLegendre,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl AdaptiveQuad {
    pub fn new(order: usize, abs_tol: f64) -> Self {
        Self { rule: GaussLegendre::new(order), abs_tol, max_depth: 40 }
    }

    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> Result<C64> {
        if a == b {
            return Ok(C64::new(0.0, 0.0));
        }
        let whole = self.rule.integrate(a, b, &mut f);
        let mut stack = vec![(a, b, whole, 0usize, self.abs_tol)];
        let mut total = C64::new(0.0, 0.0);
        while let Some((lo, hi, est, depth, tol)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            let left = self.rule.integrate(lo, mid, &mut f);
            let right = self.rule.integrate(mid, hi, &mut f);
            let refined = left + right;
            let err = (refined - est).norm();
            if !err.is_finite() {
                return Err(Error::Quadrature(format!("non-finite integrand on [{lo}, {hi}]")));
            }
            if err <= tol.max(1e-6 * self.abs_tol).max(1e-15 * refined.norm()) {
                total += refined;
            } else if depth >= self.max_depth {
                return Err(Error::Quadrature(format!(
                    "no convergence on [{lo}, {hi}] after {depth} bisections (error {err:e})"
                )));
            } else {
                stack.push((lo, mid, left, depth + 1, 0.5 * tol));
                stack.push((mid, hi, right, depth + 1, 0.5 * tol));
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // degree 15 is exact for 8 points
        let v = gl.integrate(0.0, 2.0, |x| C64::new(x.powi(15), 0.0));
        assert!((v.re - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        for n in [1, 2, 5, 16, 33] {
            let gl = GaussLegendre::new(n);
            for i in 0..n {
                assert!((gl.nodes[i] + gl.nodes[n - 1 - i]).abs() < 1e-15);
            }
            assert!(gl.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let q = AdaptiveQuad::new(16, 1e-12);
        let v = q.integrate(-50.0, 50.0, |x| C64::new(1.0 / (1.0 + 1e4 * x * x), 0.0)).unwrap();
        let exact = 2.0 * (100.0 * 50.0f64).atan() / 100.0;
        assert!((v.re - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_divergence() {
        let q = AdaptiveQuad::new(4, 1e-12);
        assert!(q.integrate(0.0, 1.0, |x| C64::new(1.0 / x, 0.0)).is_err());
    }
}
