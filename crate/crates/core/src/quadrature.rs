//! Gauss-Legendre and Gauss-Hermite rules, built by Newton iteration on the
//! orthogonal-polynomial recurrences.
//!
//! Both rules are computed once and cached by the callers that reuse them.

use crate::error::{Error, Result};

/// Gauss-Legendre rule on [-1, 1]: integrates polynomials of degree < 2n exactly.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter {
                name: "order",
                message: "Gauss-Legendre order must be >= 1".into(),
            });
        }
        let n = order;
        let m = n.div_ceil(2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..m {
            // Chebyshev-like initial guess for the i-th root of P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                // Evaluate P_n and P_{n-1} by the three-term recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for j in 1..n {
                    let p2 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p0) / (j as f64 + 1.0);
                    p0 = p1;
                    p1 = p2;
                }
                pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / pp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * pp * pp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto [a, b], in ascending node order.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Hermite rule for the weight exp(-x^2) on the whole line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter {
                name: "order",
                message: "Gauss-Hermite order must be >= 1".into(),
            });
        }
        let n = order;
        let m = n.div_ceil(2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let mut x = 0.0f64;
        for i in 0..m {
            // Initial guesses for the roots, largest first (Numerical Recipes).
            x = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => x - 1.14 * nf.powf(0.426) / x,
                2 => 1.86 * x - 0.86 * nodes[0],
                3 => 1.91 * x - 0.91 * nodes[1],
                _ => 2.0 * x - nodes[i - 2],
            };
            let mut pm1 = 0.0;
            for _ in 0..200 {
                // Orthonormal Hermite recurrence keeps values in range for large n.
                let mut p0 = std::f64::consts::PI.powf(-0.25);
                let mut p1 = std::f64::consts::SQRT_2 * x * p0;
                for j in 1..n {
                    let jf = j as f64;
                    let p2 = x * (2.0 / (jf + 1.0)).sqrt() * p1 - (jf / (jf + 1.0)).sqrt() * p0;
                    p0 = p1;
                    p1 = p2;
                }
                pm1 = p0;
                let deriv = (2.0 * nf).sqrt() * p0;
                let dx = p1 / deriv;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let deriv = (2.0 * nf).sqrt() * pm1;
            let w = 2.0 / (deriv * deriv);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // Store ascending to match the other rules.
        nodes.reverse();
        weights.reverse();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of exp(-x^2) f(x) over the line.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(Z)] for Z ~ N(0, 1), via the substitution z = sqrt(2) x.
    pub fn expect_std_normal<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let c = std::f64::consts::PI.sqrt().recip();
        c * self.integrate(|x| f(std::f64::consts::SQRT_2 * x))
    }

    /// The points sqrt(2) x_i at which [`Self::expect_std_normal`] samples its
    /// integrand, ascending, with the matching normalized weights.
    pub fn std_normal_points(&self) -> Vec<(f64, f64)> {
        let c = std::f64::consts::PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (std::f64::consts::SQRT_2 * x, c * w))
            .collect()
    }
}
