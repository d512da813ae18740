//! Discrete measures on R^k, directions on the unit sphere, and projections to 1D.
//!
//! A [`DiscreteMeasure`] is a finite list of weighted atoms. All operations
//! return new values; nothing here mutates after construction, so every type
//! is safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Projected atom values closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;

/// Weight sums farther than this from 1 are rejected instead of renormalized.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A probability measure with finitely many weighted atoms in R^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from atoms and weights.
    ///
    /// Weights must be non-negative and sum to 1 within `1e-9`; they are
    /// renormalized to sum to 1 exactly. Every atom must have the same
    /// dimension `k >= 1` and finite coordinates.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("atom list is empty".into()));
        }
        let k = atoms[0].len();
        if k == 0 {
            return Err(Error::InvalidMeasure(
                "atoms must have dimension >= 1".into(),
            ));
        }
        for a in &atoms {
            if a.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: a.len(),
                });
            }
            if a.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
            }
        }
        if weights.len() != atoms.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure(
                "weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"
            )));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { atoms, weights })
    }

    /// Uniform measure over the given atoms.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("atom list is empty".into()));
        }
        let w = 1.0 / n as f64;
        Self::new(atoms, vec![w; n])
    }

    /// A single unit point mass.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty atom lists
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Returns a copy with atom `index` replaced by `point`.
    ///
    /// Used by finite-difference probes of functionals of the atom positions.
    pub fn with_atom(&self, index: usize, point: Vec<f64>) -> Result<Self> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: point.len(),
            });
        }
        let mut atoms = self.atoms.clone();
        atoms[index] = point;
        Self::new(atoms, self.weights.clone())
    }

    /// Second moment about the origin, `sum_i w_i |x_i|^2`.
    pub fn second_moment(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.iter().map(|c| c * c).sum::<f64>())
            .sum()
    }

    /// Second moment of the measure convolved with an isotropic Gaussian,
    /// `second_moment + k * sigma^2` in closed form.
    pub fn smoothed_second_moment(&self, s: SmoothingLevel) -> f64 {
        self.second_moment() + self.dim() as f64 * s.sigma() * s.sigma()
    }

    /// First moment, `sum_i w_i x_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (mi, ai) in m.iter_mut().zip(a) {
                *mi += w * ai;
            }
        }
        m
    }

    /// Pushforward under `x -> theta . x`: the 1D measure with atoms
    /// `theta . x_i` and the same weights, sorted ascending with atoms
    /// closer than [`MERGE_TOL`] merged.
    pub fn project(&self, theta: &Direction) -> Result<Measure1D> {
        if theta.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.dim(),
            });
        }
        let projected: Vec<f64> = self.atoms.iter().map(|a| theta.dot(a)).collect();
        Ok(Measure1D::from_unsorted(projected, self.weights.clone()))
    }
}

/// A unit vector in R^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    components: Vec<f64>,
}

impl Direction {
    /// Wraps a vector that is already unit-norm within `1e-12`.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDirection { norm });
        }
        Ok(Self { components })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalize(components: Vec<f64>) -> Result<Self> {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidDirection { norm });
        }
        Ok(Self {
            components: components.into_iter().map(|c| c / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.components.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// The antipodal direction.
    pub fn negated(&self) -> Self {
        Self {
            components: self.components.iter().map(|c| -c).collect(),
        }
    }
}

/// A sorted, tie-merged discrete measure on the real line.
///
/// This is the projection of a [`DiscreteMeasure`] along a direction and the
/// sigma = 0 degenerate case of a Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl Measure1D {
    /// Sorts atoms ascending, permutes weights accordingly, and merges atoms
    /// within [`MERGE_TOL`] of each other by summing their weights.
    pub fn from_unsorted(atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut idx: Vec<usize> = (0..atoms.len()).collect();
        idx.sort_by(|&i, &j| atoms[i].partial_cmp(&atoms[j]).expect("finite atoms"));
        let mut merged_atoms: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for i in idx {
            match merged_atoms.last() {
                Some(&last) if (atoms[i] - last).abs() <= MERGE_TOL => {
                    *merged_weights.last_mut().unwrap() += weights[i];
                }
                _ => {
                    merged_atoms.push(atoms[i]);
                    merged_weights.push(weights[i]);
                }
            }
        }
        Self {
            atoms: merged_atoms,
            weights: merged_weights,
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a * a)
            .sum()
    }
}

/// Standard deviation of the isotropic Gaussian used for smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingLevel(f64);

impl SmoothingLevel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!("must be finite and >= 0, got {sigma}"),
            });
        }
        Ok(Self(sigma))
    }

    pub fn sigma(&self) -> f64 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
}

/// A point (t, mu) in [0, T] x P_2(R^k).
#[derive(Debug, Clone, PartialEq)]
pub struct TimedMeasure {
    t: f64,
    mu: DiscreteMeasure,
    horizon: f64,
}

impl TimedMeasure {
    pub fn new(t: f64, mu: DiscreteMeasure, horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                message: format!("must be finite and > 0, got {horizon}"),
            });
        }
        if !t.is_finite() || t < 0.0 || t > horizon {
            return Err(Error::InvalidParameter {
                name: "t",
                message: format!("must lie in [0, {horizon}], got {t}"),
            });
        }
        Ok(Self { t, mu, horizon })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}
