//! Quadrature rules for the normalized spherical measure on S^{k-1}.
//!
//! The measure is normalized to a probability measure, which pins the
//! second-moment constant to `kappa = 1/k` for every rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Direction;

/// How a sphere rule was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleMethod {
    /// k = 1: the two-point sphere, exact.
    ExactPair,
    /// k = 2: equally spaced angles, exact for trigonometric polynomials of
    /// degree below the node count.
    UniformCircle,
    /// k >= 2: seeded uniform samples in antithetic pairs.
    MonteCarlo,
}

impl RuleMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleMethod::ExactPair => "exact-pair",
            RuleMethod::UniformCircle => "uniform-circle",
            RuleMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// Serializable description of a rule, as it appears in configs and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub k: usize,
    pub n_nodes: usize,
    pub method: RuleMethod,
    #[serde(default)]
    pub seed: u64,
}

/// Nodes and weights representing the normalized spherical measure.
#[derive(Debug, Clone)]
pub struct SphereRule {
    spec: RuleSpec,
    nodes: Vec<Direction>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// Builds a rule with the default method for the dimension: exact pair
    /// for k = 1, the uniform circle for k = 2, antithetic Monte Carlo above.
    pub fn default_for(k: usize, n_nodes: usize, seed: u64) -> Result<Self> {
        let method = match k {
            0 => {
                return Err(Error::InvalidParameter {
                    name: "k",
                    message: "dimension must be >= 1".into(),
                })
            }
            1 => RuleMethod::ExactPair,
            2 => RuleMethod::UniformCircle,
            _ => RuleMethod::MonteCarlo,
        };
        Self::build(k, n_nodes, method, seed)
    }

    pub fn from_spec(spec: &RuleSpec) -> Result<Self> {
        Self::build(spec.k, spec.n_nodes, spec.method, spec.seed)
    }

    /// Builds a rule. `n_nodes` is ignored for k = 1; Monte Carlo rules need
    /// an even node count so antithetic pairs close up.
    pub fn build(k: usize, n_nodes: usize, method: RuleMethod, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                message: "dimension must be >= 1".into(),
            });
        }
        if n_nodes == 0 {
            return Err(Error::InvalidParameter {
                name: "n_nodes",
                message: "node count must be >= 1".into(),
            });
        }
        let (nodes, weights, n_recorded) = match method {
            RuleMethod::ExactPair => {
                if k != 1 {
                    return Err(Error::InvalidParameter {
                        name: "method",
                        message: "exact-pair applies only to k = 1".into(),
                    });
                }
                (
                    vec![Direction::new(vec![1.0])?, Direction::new(vec![-1.0])?],
                    vec![0.5, 0.5],
                    2,
                )
            }
            RuleMethod::UniformCircle => {
                if k != 2 {
                    return Err(Error::InvalidParameter {
                        name: "method",
                        message: "uniform-circle applies only to k = 2".into(),
                    });
                }
                let w = 1.0 / n_nodes as f64;
                let mut nodes = Vec::with_capacity(n_nodes);
                for j in 0..n_nodes {
                    let angle = 2.0 * std::f64::consts::PI * j as f64 / n_nodes as f64;
                    nodes.push(Direction::normalize(vec![angle.cos(), angle.sin()])?);
                }
                (nodes, vec![w; n_nodes], n_nodes)
            }
            RuleMethod::MonteCarlo => {
                if k < 2 {
                    return Err(Error::InvalidParameter {
                        name: "method",
                        message: "monte-carlo needs k >= 2".into(),
                    });
                }
                if !n_nodes.is_multiple_of(2) {
                    return Err(Error::InvalidParameter {
                        name: "n_nodes",
                        message: "monte-carlo rules pair nodes antithetically, use an even count"
                            .into(),
                    });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let w = 1.0 / n_nodes as f64;
                let mut nodes = Vec::with_capacity(n_nodes);
                while nodes.len() < n_nodes {
                    let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm < 1e-8 {
                        continue; // resample degenerate draws
                    }
                    let dir = Direction::normalize(v)?;
                    let neg = dir.negated();
                    nodes.push(dir);
                    nodes.push(neg);
                }
                (nodes, vec![w; n_nodes], n_nodes)
            }
        };
        Ok(Self {
            spec: RuleSpec {
                k,
                n_nodes: n_recorded,
                method,
                seed,
            },
            nodes,
            weights,
        })
    }

    pub fn spec(&self) -> &RuleSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.k
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Direction] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Direction, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// The scalar kappa with `integral of theta theta^T = kappa I`: the trace
    /// of the second-moment matrix divided by k. Unit-norm nodes make this
    /// exactly 1/k for any weights summing to one.
    pub fn kappa(&self) -> f64 {
        let m = self.second_moment_matrix();
        let trace: f64 = (0..self.dim()).map(|i| m[i][i]).sum();
        trace / self.dim() as f64
    }

    /// The matrix `sum_i w_i theta_i theta_i^T`.
    pub fn second_moment_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.dim();
        let mut m = vec![vec![0.0; k]; k];
        for (node, w) in self.iter() {
            let c = node.components();
            for i in 0..k {
                for j in 0..k {
                    m[i][j] += w * c[i] * c[j];
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn exact_pair_for_line() {
        let rule = SphereRule::default_for(1, 17, 0).unwrap();
        assert_eq!(rule.len(), 2);
        assert_eq!(rule.weights(), &[0.5, 0.5]);
        let xs: Vec<f64> = rule.nodes().iter().map(|d| d.components()[0]).collect();
        assert_eq!(xs, vec![1.0, -1.0]);
        assert!((rule.kappa() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_rule_nodes() {
        let rule = SphereRule::default_for(2, 4, 0).unwrap();
        assert_eq!(rule.len(), 4);
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (node, (x, y)) in rule.nodes().iter().zip(expect) {
            assert!((node.components()[0] - x).abs() < 1e-12);
            assert!((node.components()[1] - y).abs() < 1e-12);
        }
        assert!(rule.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn circle_second_moment_exact() {
        for n in [3, 4, 5, 8, 17, 64] {
            let rule = SphereRule::default_for(2, n, 0).unwrap();
            let m = rule.second_moment_matrix();
            assert!((m[0][0] - 0.5).abs() < 1e-12, "n={n}");
            assert!((m[1][1] - 0.5).abs() < 1e-12, "n={n}");
            assert!(m[0][1].abs() < 1e-12 && m[1][0].abs() < 1e-12, "n={n}");
            assert!((rule.kappa() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_antithetic_pairs() {
        let rule = SphereRule::default_for(3, 1000, 42).unwrap();
        assert_eq!(rule.len(), 1000);
        assert!(rule.weights().iter().all(|w| (w - 1e-3).abs() < 1e-18));
        for pair in rule.nodes().chunks(2) {
            for (a, b) in pair[0].components().iter().zip(pair[1].components()) {
                assert!((a + b).abs() < 1e-15, "pair is not antithetic");
            }
        }
        // kappa is 1/k by the unit-norm trace identity, regardless of placement
        assert!((rule.kappa() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_second_moment_near_isotropic() {
        let rule = SphereRule::default_for(3, 10_000, 7).unwrap();
        let m = rule.second_moment_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!(
                    (m[i][j] - target).abs() < 0.05,
                    "entry ({i},{j}) = {} too far from {target}",
                    m[i][j]
                );
            }
        }
    }

    #[test]
    fn second_moment_matrix_trace_one() {
        for (k, n) in [(1usize, 2usize), (2, 9), (3, 64), (4, 128)] {
            let rule = SphereRule::default_for(k, n, 3).unwrap();
            let m = rule.second_moment_matrix();
            let trace: f64 = (0..k).map(|i| m[i][i]).sum();
            assert!((trace - 1.0).abs() < 1e-12);
            for i in 0..k {
                for j in 0..k {
                    assert!((m[i][j] - m[j][i]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn quadrature_of_squared_projection() {
        // integral of |theta . x|^2 over the normalized sphere is |x|^2 / k
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for k in [1usize, 2, 3] {
            let n = if k == 2 { 32 } else { 4096 };
            let rule = SphereRule::default_for(k, n, 11).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let norm2: f64 = x.iter().map(|c| c * c).sum();
                let quad: f64 = rule.iter().map(|(d, w)| w * d.dot(&x).powi(2)).sum();
                let tol = if k <= 2 { 1e-12 } else { 0.05 * norm2.max(1.0) };
                assert!(
                    (quad - norm2 / k as f64).abs() <= tol,
                    "k={k}: quad {quad} vs {}",
                    norm2 / k as f64
                );
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SphereRule::default_for(0, 4, 0).is_err());
        assert!(SphereRule::default_for(2, 0, 0).is_err());
        assert!(SphereRule::build(3, 7, RuleMethod::MonteCarlo, 0).is_err());
        assert!(SphereRule::build(3, 8, RuleMethod::UniformCircle, 0).is_err());
        assert!(SphereRule::build(2, 8, RuleMethod::ExactPair, 0).is_err());
    }

    #[test]
    fn seeded_rules_reproduce() {
        let a = SphereRule::default_for(3, 100, 9).unwrap();
        let b = SphereRule::default_for(3, 100, 9).unwrap();
        for (na, nb) in a.nodes().iter().zip(b.nodes()) {
            assert_eq!(na.components(), nb.components());
        }
    }
}
