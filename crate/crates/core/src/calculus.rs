//! Derivatives of the squared regularized sliced distance in the measure
//! argument: the gradient field, the mixed second derivative in (x, measure),
//! their integrated moment bounds, and the integration-by-parts diagnostic.
//!
//! The gradient at a point x aggregates, over the sphere rule, the gap
//! between the projected point and the Gaussian-averaged transport of that
//! projection; the expectation over the smoothing noise is a Gauss-Hermite
//! sum. For equal-weight empirical measures the per-atom values are exactly
//! the per-atom Euclidean gradients of the objective scaled by atom count.

use crate::error::{Error, Result};
use crate::measure::{Direction, DiscreteMeasure, SmoothingLevel};
use crate::quadrature::GaussHermite;
use crate::sphere::{RuleSpec, SphereRule};
use crate::univariate::{GaussianMixture1D, SaturationCounter, TransportMap1D};

/// Bound constant for the first-derivative estimate, under the
/// normalized-sphere convention.
pub const FIRST_BOUND_CONST: f64 = 2.0;

/// Bound constant for the mixed second-derivative estimate.
pub const SECOND_BOUND_CONST: f64 = 2.0;

struct Slice {
    theta: Direction,
    rule_weight: f64,
    map: TransportMap1D,
}

fn build_slices(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
) -> Result<Vec<Slice>> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if rule.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: rule.dim(),
        });
    }
    rule.iter()
        .map(|(theta, w)| {
            let src = GaussianMixture1D::from_measure(&mu.project(theta)?, s);
            let tgt = GaussianMixture1D::from_measure(&nu.project(theta)?, s);
            Ok(Slice {
                theta: theta.clone(),
                rule_weight: w,
                map: TransportMap1D::new(src, tgt)?,
            })
        })
        .collect()
}

/// E[T(m + sigma Z)] for Z ~ N(0,1), over precomputed (z, weight) points.
fn expected_transport(
    map: &TransportMap1D,
    points: &[(f64, f64)],
    sigma: f64,
    m: f64,
    sat: &SaturationCounter,
) -> f64 {
    let xs: Vec<f64> = points.iter().map(|(z, _)| m + sigma * z).collect();
    let ts = map.transport_sorted(&xs, Some(sat));
    points.iter().zip(&ts).map(|((_, w), t)| w * t).sum()
}

/// E[T'(m + sigma Z)]; T' needs the target density at the transported point.
fn expected_derivative(
    map: &TransportMap1D,
    points: &[(f64, f64)],
    sigma: f64,
    m: f64,
    sat: &SaturationCounter,
) -> Result<f64> {
    let xs: Vec<f64> = points.iter().map(|(z, _)| m + sigma * z).collect();
    let ts = map.transport_sorted(&xs, Some(sat));
    let mut total = 0.0;
    for (((_, w), x), t) in points.iter().zip(&xs).zip(&ts) {
        let ft = map.target().density(*t);
        if ft < 1e-300 {
            return Err(Error::DensityUnderflow { at: *t });
        }
        total += w * map.source().density(*x) / ft;
    }
    Ok(total)
}

/// E[Z T(m + sigma Z)].
fn expected_z_transport(
    map: &TransportMap1D,
    points: &[(f64, f64)],
    sigma: f64,
    m: f64,
    sat: &SaturationCounter,
) -> f64 {
    let xs: Vec<f64> = points.iter().map(|(z, _)| m + sigma * z).collect();
    let ts = map.transport_sorted(&xs, Some(sat));
    points.iter().zip(&ts).map(|((z, w), t)| w * z * t).sum()
}

/// The measure derivative of the squared regularized sliced distance,
/// evaluated eagerly at the first measure's atoms and lazily anywhere else.
pub struct GradientField {
    slices: Vec<Slice>,
    points: Vec<(f64, f64)>,
    sigma: f64,
    dim: usize,
    per_atom: Vec<Vec<f64>>,
    saturations: SaturationCounter,
    rule_spec: RuleSpec,
    hermite_order: usize,
}

impl GradientField {
    /// Gradient values at the atoms of the measure the field was built from.
    pub fn per_atom(&self) -> &[Vec<f64>] {
        &self.per_atom
    }

    /// Evaluates the field at an arbitrary point.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut g = vec![0.0; self.dim];
        for slice in &self.slices {
            let m = slice.theta.dot(x);
            let e = expected_transport(&slice.map, &self.points, self.sigma, m, &self.saturations);
            let scale = slice.rule_weight * (m - e);
            for (gi, c) in g.iter_mut().zip(slice.theta.components()) {
                *gi += scale * c;
            }
        }
        Ok(g)
    }

    /// Transport evaluations that hit the CDF clamp so far.
    pub fn saturation_count(&self) -> u64 {
        self.saturations.count()
    }

    pub fn rule_spec(&self) -> &RuleSpec {
        &self.rule_spec
    }

    pub fn hermite_order(&self) -> usize {
        self.hermite_order
    }
}

/// Builds the gradient field of `mu -> SW2_sigma^2(mu, nu)`.
pub fn grad_measure(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
    hermite_order: usize,
) -> Result<GradientField> {
    if s.is_zero() {
        return Err(Error::DegenerateSigma);
    }
    if hermite_order < 8 {
        return Err(Error::InvalidParameter {
            name: "hermite_order",
            message: format!("must be >= 8, got {hermite_order}"),
        });
    }
    let slices = build_slices(mu, nu, s, rule)?;
    let points = GaussHermite::new(hermite_order)?.std_normal_points();
    let mut field = GradientField {
        slices,
        points,
        sigma: s.sigma(),
        dim: mu.dim(),
        per_atom: Vec::new(),
        saturations: SaturationCounter::new(),
        rule_spec: rule.spec().clone(),
        hermite_order,
    };
    field.per_atom = mu
        .atoms()
        .iter()
        .map(|a| field.eval(a))
        .collect::<Result<_>>()?;
    Ok(field)
}

/// The mixed derivative field: symmetric k x k matrices.
pub struct HessianField {
    slices: Vec<Slice>,
    points: Vec<(f64, f64)>,
    sigma: f64,
    dim: usize,
    per_atom: Vec<Vec<Vec<f64>>>,
    saturations: SaturationCounter,
    rule_spec: RuleSpec,
    hermite_order: usize,
}

impl HessianField {
    pub fn per_atom(&self) -> &[Vec<Vec<f64>>] {
        &self.per_atom
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let k = self.dim;
        let mut h = vec![vec![0.0; k]; k];
        for slice in &self.slices {
            let m = slice.theta.dot(x);
            let e =
                expected_derivative(&slice.map, &self.points, self.sigma, m, &self.saturations)?;
            let scale = slice.rule_weight * (1.0 - e);
            let c = slice.theta.components();
            for i in 0..k {
                for j in 0..k {
                    h[i][j] += scale * c[i] * c[j];
                }
            }
        }
        Ok(h)
    }

    pub fn saturation_count(&self) -> u64 {
        self.saturations.count()
    }

    pub fn rule_spec(&self) -> &RuleSpec {
        &self.rule_spec
    }

    pub fn hermite_order(&self) -> usize {
        self.hermite_order
    }
}

/// Builds the mixed second-derivative field of `mu -> SW2_sigma^2(mu, nu)`.
pub fn hess_x_measure(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
    hermite_order: usize,
) -> Result<HessianField> {
    if s.is_zero() {
        return Err(Error::DegenerateSigma);
    }
    let slices = build_slices(mu, nu, s, rule)?;
    let points = GaussHermite::new(hermite_order)?.std_normal_points();
    let mut field = HessianField {
        slices,
        points,
        sigma: s.sigma(),
        dim: mu.dim(),
        per_atom: Vec::new(),
        saturations: SaturationCounter::new(),
        rule_spec: rule.spec().clone(),
        hermite_order,
    };
    field.per_atom = mu
        .atoms()
        .iter()
        .map(|a| field.eval(a))
        .collect::<Result<_>>()?;
    Ok(field)
}

/// Largest absolute eigenvalue of a symmetric matrix, by cyclic Jacobi.
pub fn spectral_norm_symmetric(mat: &[Vec<f64>]) -> f64 {
    let k = mat.len();
    if k == 0 {
        return 0.0;
    }
    if k == 1 {
        return mat[0][0].abs();
    }
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
        .max(1e-300);
    for _ in 0..200 {
        let mut off = 0.0;
        let (mut p, mut q) = (0, 1);
        for i in 0..k {
            for j in (i + 1)..k {
                if a[i][j].abs() > off {
                    off = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for i in 0..k {
            let (aip, aiq) = (a[i][p], a[i][q]);
            a[i][p] = c * aip - s * aiq;
            a[i][q] = s * aip + c * aiq;
        }
        for j in 0..k {
            let (apj, aqj) = (a[p][j], a[q][j]);
            a[p][j] = c * apj - s * aqj;
            a[q][j] = s * apj + c * aqj;
        }
    }
    (0..k).map(|i| a[i][i].abs()).fold(0.0, f64::max)
}

/// Left and right sides of the integrated first-derivative bound:
/// `sum_j w_j |grad(x_j)|^2 <= C (M2(mu) + M2(nu * N_sigma))` with C = 2.
pub fn check_first_bound(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
    hermite_order: usize,
) -> Result<(f64, f64)> {
    let field = grad_measure(mu, nu, s, rule, hermite_order)?;
    let lhs: f64 = field
        .per_atom()
        .iter()
        .zip(mu.weights())
        .map(|(g, w)| w * g.iter().map(|c| c * c).sum::<f64>())
        .sum();
    let rhs = FIRST_BOUND_CONST * (mu.second_moment() + nu.smoothed_second_moment(s));
    Ok((lhs, rhs))
}

/// Left and right sides of the integrated mixed-derivative bound:
/// `sum_j w_j |hess(x_j)| <= C (1 + sqrt(M2(nu * N_sigma)) / sigma)` with C = 2.
pub fn check_second_bound(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
    hermite_order: usize,
) -> Result<(f64, f64)> {
    let field = hess_x_measure(mu, nu, s, rule, hermite_order)?;
    let lhs: f64 = field
        .per_atom()
        .iter()
        .zip(mu.weights())
        .map(|(h, w)| w * spectral_norm_symmetric(h))
        .sum();
    let rhs = SECOND_BOUND_CONST * (1.0 + nu.smoothed_second_moment(s).sqrt() / s.sigma());
    Ok((lhs, rhs))
}

/// Self-consistency residual of the integration-by-parts identity
///
/// `integral of T' d(mu_theta * N_sigma)
///   = (1/sigma^2) double integral of y T(x + y) N_sigma(y) dy mu_theta(dx)`,
///
/// with both sides evaluated by independent Gauss-Hermite sums.
pub fn ibp_identity_residual(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    theta: &Direction,
    hermite_order: usize,
) -> Result<f64> {
    if s.is_zero() {
        return Err(Error::DegenerateSigma);
    }
    let src = GaussianMixture1D::from_measure(&mu.project(theta)?, s);
    let tgt = GaussianMixture1D::from_measure(&nu.project(theta)?, s);
    ibp_residual_for_map(&TransportMap1D::new(src, tgt)?, s.sigma(), hermite_order)
}

/// The same residual for an explicit 1D transport map, reusing the source
/// mixture's components as the outer discrete integral.
pub fn ibp_residual_for_map(map: &TransportMap1D, sigma: f64, hermite_order: usize) -> Result<f64> {
    let points = GaussHermite::new(hermite_order)?.std_normal_points();
    let sat = SaturationCounter::new();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    // The outer integral over mu_theta runs over the source components; the
    // source mixture is exactly mu_theta * N_sigma.
    let (means, weights) = (
        map.source().means().to_vec(),
        map.source().weights().to_vec(),
    );
    for (m, w) in means.iter().zip(&weights) {
        lhs += w * expected_derivative(map, &points, sigma, *m, &sat)?;
        rhs += w * expected_z_transport(map, &points, sigma, *m, &sat) / sigma;
    }
    Ok((lhs - rhs).abs())
}
