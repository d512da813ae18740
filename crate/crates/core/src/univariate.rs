//! One-dimensional optimal transport between Gaussian-smoothed discrete
//! measures: CDF, density, quantile, the monotone transport map and its
//! derivative, and the squared 1D Wasserstein distance with half-squared cost.
//!
//! The W2 integral in the quantile domain is evaluated after the substitution
//! p = Phi(z), which turns Gaussian tails into polynomial growth, with
//! Gauss-Legendre panels split at the mixtures' cumulative-weight breakpoints.
//! That keeps the quadrature spectrally accurate for smooth mixtures and
//! exact up to roundoff both for pure Gaussians and in the sigma -> 0 limit.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::measure::{Measure1D, SmoothingLevel};
use crate::quadrature::GaussLegendre;

/// Default order for the quantile-domain quadrature behind [`w2_squared_1d`].
pub const DEFAULT_QUAD_ORDER: usize = 128;

/// CDF values are clamped into [CDF_CLAMP, 1 - CDF_CLAMP] before quantile
/// composition; each clamping event is counted as a saturation.
pub const CDF_CLAMP: f64 = 1e-15;

/// Quantile root brackets extend this many sigmas beyond the extreme means.
const BRACKET_SIGMAS: f64 = 12.0;

/// |z| beyond which the standard normal carries less mass than ~1.4e-15.
/// Kept where Phi(z) is still strictly inside (0, 1) in double precision.
const TAIL_Z: f64 = 7.9;

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of the standard normal CDF, by safeguarded Newton iteration.
pub fn std_normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-BRACKET_SIGMAS, BRACKET_SIGMAS);
    let mut x = 0.0;
    for _ in 0..200 {
        let f = std_normal_cdf(x) - p;
        if f.abs() <= 1e-16 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = std_normal_pdf(x);
        let mut next = if d > 1e-300 { x - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) < 1e-15 * (1.0 + x.abs()) {
            return x;
        }
        x = next;
    }
    x
}

/// Counts transport evaluations that hit the CDF clamp.
///
/// Saturations are diagnostics, not failures: the transported value is still
/// returned, pinned at the quantile bracket edge.
#[derive(Debug, Default)]
pub struct SaturationCounter(AtomicU64);

impl SaturationCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

/// A discrete 1D measure convolved with a centered Gaussian of standard
/// deviation `sigma`; `sigma = 0` degenerates to the discrete measure itself.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture1D {
    means: Vec<f64>,
    weights: Vec<f64>,
    sigma: f64,
}

impl GaussianMixture1D {
    /// Builds a mixture; means are sorted ascending and means closer than the
    /// merge tolerance are combined by summing weights.
    pub fn new(means: Vec<f64>, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!("must be finite and >= 0, got {sigma}"),
            });
        }
        if means.is_empty() || means.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} means but {} weights",
                means.len(),
                weights.len()
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite mean".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure(
                "weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        let base = Measure1D::from_unsorted(means, weights.into_iter().map(|w| w / sum).collect());
        Ok(Self {
            means: base.atoms().to_vec(),
            weights: base.weights().to_vec(),
            sigma,
        })
    }

    /// Smooths a projected discrete measure.
    pub fn from_measure(m: &Measure1D, s: SmoothingLevel) -> Self {
        Self {
            means: m.atoms().to_vec(),
            weights: m.weights().to_vec(),
            sigma: s.sigma(),
        }
    }

    /// A single Gaussian N(mean, sigma^2).
    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![mean], vec![1.0], sigma)
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    /// Further convolution with N(0, extra^2): variances add.
    pub fn smoothed(&self, extra_sigma: f64) -> Self {
        Self {
            means: self.means.clone(),
            weights: self.weights.clone(),
            sigma: (self.sigma * self.sigma + extra_sigma * extra_sigma).sqrt(),
        }
    }

    /// Mean of the mixture (smoothing does not move it).
    pub fn mean(&self) -> f64 {
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| m * w)
            .sum()
    }

    /// Second moment about the origin: `sum_i w_i m_i^2 + sigma^2`.
    pub fn second_moment(&self) -> f64 {
        let discrete: f64 = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * m * m)
            .sum();
        discrete + self.sigma * self.sigma
    }

    /// CDF; a right-continuous step function when sigma = 0.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            return self
                .means
                .iter()
                .zip(&self.weights)
                .filter(|(m, _)| **m <= x)
                .map(|(_, w)| w)
                .sum();
        }
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * std_normal_cdf((x - m) / self.sigma))
            .sum()
    }

    /// Density; only meaningful for sigma > 0.
    pub fn density(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * std_normal_pdf((x - m) / self.sigma) / self.sigma)
            .sum()
    }

    /// Root bracket for quantile search.
    fn bracket(&self) -> (f64, f64) {
        let lo = self.means.first().copied().unwrap() - BRACKET_SIGMAS * self.sigma;
        let hi = self.means.last().copied().unwrap() + BRACKET_SIGMAS * self.sigma;
        (lo, hi)
    }

    /// Quantile function.
    ///
    /// For sigma > 0 this inverts the smooth CDF to `|cdf(x) - p| <= 1e-12`;
    /// for sigma = 0 it is the generalized inverse `inf { x : F(x) >= p }`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                message: format!("must lie in (0, 1), got {p}"),
            });
        }
        if self.sigma == 0.0 {
            return Ok(self.quantile_discrete(p));
        }
        let (lo, hi) = self.bracket();
        Ok(self.solve_quantile(p, lo, hi, None))
    }

    fn quantile_discrete(&self, p: f64) -> f64 {
        let mut cum = 0.0;
        for (m, w) in self.means.iter().zip(&self.weights) {
            cum += w;
            if cum >= p {
                return *m;
            }
        }
        *self.means.last().unwrap()
    }

    /// Safeguarded Newton: bisection keeps the bracket valid, Newton restores
    /// local quadratic convergence once inside the steep region.
    fn solve_quantile(&self, p: f64, mut lo: f64, mut hi: f64, warm: Option<f64>) -> f64 {
        let mut x = match warm {
            Some(w) if w > lo && w < hi => w,
            _ => 0.5 * (lo + hi),
        };
        for _ in 0..300 {
            let f = self.cdf(x) - p;
            if f.abs() <= 1e-13 {
                return x;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.density(x);
            let mut next = if d > 1e-300 { x - f / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (hi - lo) < 1e-15 * (1.0 + x.abs()) {
                return 0.5 * (lo + hi);
            }
            x = next;
        }
        x
    }

    /// Quantiles at an ascending list of probabilities, warm-starting each
    /// solve from the previous solution. Much cheaper than independent calls.
    pub fn quantiles_sorted(&self, ps: &[f64]) -> Result<Vec<f64>> {
        if ps.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter {
                name: "ps",
                message: "probabilities must be ascending".into(),
            });
        }
        if ps.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::InvalidParameter {
                name: "ps",
                message: "probabilities must lie in (0, 1)".into(),
            });
        }
        if self.sigma == 0.0 {
            // Two-pointer walk over the cumulative weights.
            let mut out = Vec::with_capacity(ps.len());
            let mut idx = 0;
            let mut cum = self.weights[0];
            for &p in ps {
                while cum < p && idx + 1 < self.means.len() {
                    idx += 1;
                    cum += self.weights[idx];
                }
                out.push(self.means[idx]);
            }
            return Ok(out);
        }
        let (glo, ghi) = self.bracket();
        let mut out = Vec::with_capacity(ps.len());
        let mut lo = glo;
        let mut warm = None;
        for &p in ps {
            let x = self.solve_quantile(p, lo, ghi, warm);
            lo = lo.max(x - 1e-9 * (1.0 + x.abs()));
            warm = Some(x);
            out.push(x);
        }
        Ok(out)
    }

    /// Interior cumulative weights W_1 < ... < W_{n-1}, the probabilities at
    /// which the quantile function transitions between components.
    pub fn interior_breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weights.len().saturating_sub(1));
        let mut cum = 0.0;
        for w in &self.weights[..self.weights.len() - 1] {
            cum += w;
            if cum > 0.0 && cum < 1.0 {
                out.push(cum);
            }
        }
        out
    }

    /// Draws one sample: pick a component by weight, then add Gaussian noise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut mean = *self.means.last().unwrap();
        for (m, w) in self.means.iter().zip(&self.weights) {
            cum += w;
            if u <= cum {
                mean = *m;
                break;
            }
        }
        if self.sigma == 0.0 {
            mean
        } else {
            let z: f64 = StandardNormal.sample(rng);
            mean + self.sigma * z
        }
    }
}

/// The monotone optimal transport map between two smoothed 1D measures,
/// `T = F_target^{-1} o F_source`.
#[derive(Debug, Clone)]
pub struct TransportMap1D {
    source: GaussianMixture1D,
    target: GaussianMixture1D,
}

impl TransportMap1D {
    /// Both measures must carry strictly positive smoothing, which makes both
    /// CDFs continuous and strictly increasing.
    pub fn new(source: GaussianMixture1D, target: GaussianMixture1D) -> Result<Self> {
        if source.sigma() == 0.0 || target.sigma() == 0.0 {
            return Err(Error::DegenerateSigma);
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &GaussianMixture1D {
        &self.source
    }

    pub fn target(&self) -> &GaussianMixture1D {
        &self.target
    }

    /// Transports one point; clamps the intermediate CDF value into
    /// [`CDF_CLAMP`, 1 - `CDF_CLAMP`] and records the event if asked to.
    pub fn transport_tracked(&self, x: f64, saturations: Option<&SaturationCounter>) -> f64 {
        let p = self.source.cdf(x);
        let clamped = p.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
        if clamped != p {
            if let Some(c) = saturations {
                c.bump();
            }
        }
        self.target
            .quantile(clamped)
            .expect("clamped probability is interior")
    }

    pub fn transport(&self, x: f64) -> f64 {
        self.transport_tracked(x, None)
    }

    /// Transports an ascending batch, sharing quantile warm starts.
    pub fn transport_sorted(
        &self,
        xs: &[f64],
        saturations: Option<&SaturationCounter>,
    ) -> Vec<f64> {
        let mut ps = Vec::with_capacity(xs.len());
        for &x in xs {
            let p = self.source.cdf(x);
            let clamped = p.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
            if clamped != p {
                if let Some(c) = saturations {
                    c.bump();
                }
            }
            ps.push(clamped);
        }
        // cdf is monotone, so ps is ascending up to roundoff; enforce it.
        for i in 1..ps.len() {
            if ps[i] < ps[i - 1] {
                ps[i] = ps[i - 1];
            }
        }
        self.target
            .quantiles_sorted(&ps)
            .expect("clamped probabilities are interior and ascending")
    }

    /// Derivative `T'(x) = f_source(x) / f_target(T(x))`, strictly positive.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let t = self.transport(x);
        let fs = self.source.density(x);
        let ft = self.target.density(t);
        if ft < 1e-300 {
            return Err(Error::DensityUnderflow { at: t });
        }
        Ok(fs / ft)
    }
}

/// Squared 1D Wasserstein distance with cost `|x - y|^2 / 2`, default order.
pub fn w2_squared_1d(mu: &GaussianMixture1D, nu: &GaussianMixture1D) -> f64 {
    w2_squared_1d_with_order(mu, nu, DEFAULT_QUAD_ORDER)
}

/// Squared 1D Wasserstein distance at a chosen quadrature budget.
///
/// Both measures discrete (sigma = 0 on both sides) takes the exact
/// monotone-coupling path; otherwise the quantile integral is evaluated in
/// the normal-score domain with panels at the cumulative-weight breakpoints.
/// `order` is the total node budget, split across panels.
pub fn w2_squared_1d_with_order(
    mu: &GaussianMixture1D,
    nu: &GaussianMixture1D,
    order: usize,
) -> f64 {
    if mu.sigma() == 0.0 && nu.sigma() == 0.0 {
        return w2_squared_discrete(mu, nu);
    }
    let order = order.max(8);

    // Panel edges in z-space: breakpoints of either quantile function.
    let mut edges: Vec<f64> = vec![-TAIL_Z, TAIL_Z];
    for bp in mu
        .interior_breakpoints()
        .into_iter()
        .chain(nu.interior_breakpoints())
    {
        let z = std_normal_quantile(bp);
        if z > -TAIL_Z + 1e-6 && z < TAIL_Z - 1e-6 {
            edges.push(z);
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let n_panels = edges.len() - 1;
    let per_panel = (order.div_ceil(n_panels)).max(16).min(order);
    let gl = GaussLegendre::new(per_panel).expect("per-panel order >= 1");

    // Assemble all nodes ascending, then batch the two quantile sweeps.
    let mut zs = Vec::with_capacity(n_panels * per_panel);
    let mut ws = Vec::with_capacity(n_panels * per_panel);
    for panel in edges.windows(2) {
        for (z, w) in gl.mapped(panel[0], panel[1]) {
            zs.push(z);
            ws.push(w);
        }
    }
    let ps: Vec<f64> = zs
        .iter()
        .map(|&z| std_normal_cdf(z).clamp(CDF_CLAMP, 1.0 - CDF_CLAMP))
        .collect();
    let q_mu = mu.quantiles_sorted(&ps).expect("interior ascending ps");
    let q_nu = nu.quantiles_sorted(&ps).expect("interior ascending ps");

    let mut total = 0.0;
    for i in 0..zs.len() {
        let d = q_mu[i] - q_nu[i];
        total += ws[i] * std_normal_pdf(zs[i]) * 0.5 * d * d;
    }
    total
}

/// Exact discrete path: monotone rearrangement on the common refinement of
/// the two weight partitions.
fn w2_squared_discrete(mu: &GaussianMixture1D, nu: &GaussianMixture1D) -> f64 {
    let (xa, wa) = (mu.means(), mu.weights());
    let (xb, wb) = (nu.means(), nu.weights());
    let mut i = 0;
    let mut j = 0;
    let mut rem_a = wa[0];
    let mut rem_b = wb[0];
    let mut cost = 0.0;
    loop {
        let m = rem_a.min(rem_b);
        let d = xa[i] - xb[j];
        cost += m * 0.5 * d * d;
        rem_a -= m;
        rem_b -= m;
        if rem_a <= 1e-15 {
            i += 1;
            if i >= xa.len() {
                break;
            }
            rem_a = wa[i];
        }
        if rem_b <= 1e-15 {
            j += 1;
            if j >= xb.len() {
                break;
            }
            rem_b = wb[j];
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn closed_form_gaussian_w2(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
        0.5 * ((m1 - m2).powi(2) + (s1 - s2).powi(2))
    }

    fn seeded_mixture(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> GaussianMixture1D {
        let means: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        GaussianMixture1D::new(means, raw.into_iter().map(|w| w / sum).collect(), sigma).unwrap()
    }

    #[test]
    fn cdf_basics() {
        let g = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        assert!((g.cdf(0.0) - 0.5).abs() < 1e-15);

        let step = GaussianMixture1D::new(vec![0.0, 2.0], vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(step.cdf(1.0), 0.5);
        assert_eq!(step.cdf(0.0), 0.5); // right-continuous at atoms
        assert_eq!(step.cdf(-0.5), 0.0);
        assert_eq!(step.cdf(2.0), 1.0);

        let sym = GaussianMixture1D::new(vec![-1.0, 1.0], vec![0.5, 0.5], 1.0).unwrap();
        assert!((sym.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_examples() {
        let g = GaussianMixture1D::gaussian(3.0, 2.0).unwrap();
        assert!((g.quantile(0.5).unwrap() - 3.0).abs() < 1e-11);

        let sym = GaussianMixture1D::new(vec![-1.0, 1.0], vec![0.5, 0.5], 1.0).unwrap();
        assert!(sym.quantile(0.5).unwrap().abs() < 1e-11);

        // Frozen high-precision standard normal quantile at p = 0.975.
        let std = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        assert!((std.quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);

        assert!(std.quantile(0.0).is_err());
        assert!(std.quantile(1.0).is_err());
    }

    #[test]
    fn quantile_discrete_generalized_inverse() {
        let step = GaussianMixture1D::new(vec![0.0, 2.0], vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(step.quantile(0.3).unwrap(), 0.0);
        assert_eq!(step.quantile(0.5).unwrap(), 0.0);
        assert_eq!(step.quantile(0.7).unwrap(), 2.0);
    }

    #[test]
    fn quantiles_sorted_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = seeded_mixture(&mut rng, 4, 0.6);
        let ps: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        let batch = m.quantiles_sorted(&ps).unwrap();
        for (&p, &x) in ps.iter().zip(&batch) {
            let single = m.quantile(p).unwrap();
            assert!(
                (x - single).abs() < 1e-9,
                "batch {x} vs single {single} at p={p}"
            );
        }
    }

    #[test]
    fn transport_identity_and_shift() {
        let g = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        let id = TransportMap1D::new(g.clone(), g.clone()).unwrap();
        for x in [-2.0, -0.5, 0.0, 1.7] {
            assert!((id.transport(x) - x).abs() < 1e-10);
        }

        let shifted = GaussianMixture1D::gaussian(2.5, 1.0).unwrap();
        let shift = TransportMap1D::new(g.clone(), shifted).unwrap();
        for x in [-1.0, 0.0, 2.0] {
            assert!((shift.transport(x) - (x + 2.5)).abs() < 1e-9);
        }

        let wide = GaussianMixture1D::gaussian(0.0, 2.0).unwrap();
        let scale = TransportMap1D::new(g, wide).unwrap();
        for x in [-1.5, 0.3, 2.0] {
            assert!((scale.transport(x) - 2.0 * x).abs() < 1e-9);
        }
    }

    #[test]
    fn transport_requires_smoothing() {
        let g = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        let flat = GaussianMixture1D::new(vec![0.0], vec![1.0], 0.0).unwrap();
        assert!(matches!(
            TransportMap1D::new(g, flat),
            Err(Error::DegenerateSigma)
        ));
    }

    #[test]
    fn transport_saturation_counted() {
        let g = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        let map = TransportMap1D::new(g.clone(), g).unwrap();
        let sat = SaturationCounter::new();
        map.transport_tracked(50.0, Some(&sat));
        assert_eq!(sat.count(), 1);
        map.transport_tracked(0.0, Some(&sat));
        assert_eq!(sat.count(), 1);
    }

    #[test]
    fn derivative_scaling_map() {
        let g = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        let wide = GaussianMixture1D::gaussian(0.0, 2.0).unwrap();
        let id = TransportMap1D::new(g.clone(), g.clone()).unwrap();
        let scale = TransportMap1D::new(g, wide).unwrap();
        for x in [-1.0, 0.0, 0.8] {
            assert!((id.derivative(x).unwrap() - 1.0).abs() < 1e-9);
            assert!((scale.derivative(x).unwrap() - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = seeded_mixture(&mut rng, 3, 0.8);
        let tgt = seeded_mixture(&mut rng, 3, 0.8);
        let map = TransportMap1D::new(src, tgt).unwrap();
        let h = 1e-5;
        for x in [-1.2, 0.0, 0.9, 2.1] {
            let fd = (map.transport(x + h) - map.transport(x - h)) / (2.0 * h);
            let an = map.derivative(x).unwrap();
            assert!((fd - an).abs() < 1e-6, "fd {fd} vs analytic {an} at {x}");
        }
    }

    #[test]
    fn w2_closed_forms() {
        let a = GaussianMixture1D::gaussian(0.0, 1.0).unwrap();
        let b = GaussianMixture1D::gaussian(2.0, 1.0).unwrap();
        assert!((w2_squared_1d(&a, &a)).abs() < 1e-14);
        assert!((w2_squared_1d(&a, &b) - 2.0).abs() < 1e-11);

        // Different widths exercise the tail-weighted part of the quadrature.
        let c = GaussianMixture1D::gaussian(1.0, 0.5).unwrap();
        let expect = closed_form_gaussian_w2(0.0, 1.0, 1.0, 0.5);
        assert!((w2_squared_1d(&a, &c) - expect).abs() < 1e-11);
    }

    #[test]
    fn w2_discrete_exact() {
        let mu = GaussianMixture1D::new(vec![0.0, 1.0], vec![0.5, 0.5], 0.0).unwrap();
        let nu = GaussianMixture1D::new(vec![2.0, 3.0], vec![0.5, 0.5], 0.0).unwrap();
        // Brute force over both couplings of two equal-weight atoms:
        // identity pairing costs 1/2 * (4 + 4) / 2 = 2, crossing costs more.
        assert!((w2_squared_1d(&mu, &nu) - 2.0).abs() < 1e-15);

        let unbalanced = GaussianMixture1D::new(vec![0.0], vec![1.0], 0.0).unwrap();
        let split = GaussianMixture1D::new(vec![-1.0, 1.0], vec![0.5, 0.5], 0.0).unwrap();
        // delta_0 to each half: cost 1/2 * 1 on both halves.
        assert!((w2_squared_1d(&unbalanced, &split) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w2_small_sigma_approaches_discrete() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mu0 = seeded_mixture(&mut rng, 5, 0.0);
            let nu0 = seeded_mixture(&mut rng, 5, 0.0);
            let exact = w2_squared_1d(&mu0, &nu0);
            let mu_s = mu0.smoothed(1e-4);
            let nu_s = nu0.smoothed(1e-4);
            let smooth = w2_squared_1d(&mu_s, &nu_s);
            assert!(
                (smooth - exact).abs() < 1e-3,
                "smooth {smooth} vs exact {exact}"
            );
        }
    }

    #[test]
    fn w2_displacement_identity_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mu = seeded_mixture(&mut rng, 3, 0.5);
        let nu = seeded_mixture(&mut rng, 4, 0.5);
        let quad = w2_squared_1d(&mu, &nu);
        let map = TransportMap1D::new(mu.clone(), nu).unwrap();
        let n = 100_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = mu.sample(&mut rng);
            let c = 0.5 * (x - map.transport(x)).powi(2);
            sum += c;
            sumsq += c * c;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - quad).abs() <= 3.0 * se,
            "MC {mean} +- {se} vs quadrature {quad}"
        );
    }

    #[test]
    fn w2_triangle_inequality_on_seeded_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        for _ in 0..100 {
            let sigma = rng.random_range(0.2..1.2);
            let a = seeded_mixture(&mut rng, 3, sigma);
            let b = seeded_mixture(&mut rng, 3, sigma);
            let c = seeded_mixture(&mut rng, 3, sigma);
            let d =
                |x: &GaussianMixture1D, y: &GaussianMixture1D| (2.0 * w2_squared_1d(x, y)).sqrt();
            assert!(d(&a, &b) <= d(&a, &c) + d(&c, &b) + 1e-10);
        }
    }

    #[test]
    fn smoothing_contracts_w2() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let mu = seeded_mixture(&mut rng, 4, 0.0);
            let nu = seeded_mixture(&mut rng, 4, 0.0);
            let base = w2_squared_1d(&mu, &nu);
            let sigma = rng.random_range(0.1..1.5);
            let smoothed = w2_squared_1d(&mu.smoothed(sigma), &nu.smoothed(sigma));
            assert!(
                smoothed <= base + 1e-10,
                "smoothed {smoothed} > base {base} at sigma {sigma}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quantile_cdf_roundtrip(
            mean in -3.0f64..3.0,
            spread in 0.5f64..2.0,
            sigma in 0.2f64..1.5,
            p in 0.001f64..0.999,
        ) {
            let m = GaussianMixture1D::new(
                vec![mean - spread, mean + spread],
                vec![0.4, 0.6],
                sigma,
            ).unwrap();
            let x = m.quantile(p).unwrap();
            prop_assert!((m.cdf(x) - p).abs() < 1e-10);
            let x0 = mean; // roundtrip the other way at a generic point
            let back = m.quantile(m.cdf(x0)).unwrap();
            prop_assert!((back - x0).abs() < 1e-8);
        }

        #[test]
        fn w2_symmetry(
            shift in -2.0f64..2.0,
            sigma_a in 0.2f64..1.2,
            sigma_b in 0.2f64..1.2,
        ) {
            let a = GaussianMixture1D::new(vec![0.0, 1.0], vec![0.5, 0.5], sigma_a).unwrap();
            let b = GaussianMixture1D::new(vec![shift, shift + 2.0], vec![0.3, 0.7], sigma_b).unwrap();
            let ab = w2_squared_1d(&a, &b);
            let ba = w2_squared_1d(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-10);
        }
    }
}
