//! Gaussian-regularized sliced Wasserstein distances on discrete measures,
//! their first and mixed second derivatives in the measure argument, and a
//! constructive smooth variational principle built on the induced gauge.
//!
//! The crate is organized bottom-up:
//!
//! - [`measure`]: discrete measures on R^k, directions, 1D projections
//! - [`quadrature`]: Gauss-Legendre and Gauss-Hermite rules
//! - [`univariate`]: smoothed 1D measures, transport maps, 1D W2
//! - [`sphere`]: quadrature over the unit sphere of directions
//! - [`sliced`]: sliced distances and an exact small-instance W2 oracle
//! - [`calculus`]: measure gradients, mixed Hessians, moment bounds
//! - [`gauge`]: the gauge function, its perturbation series, and the
//!   variational principle solver
//!
//! All distances are squared and use the half-squared-cost convention
//! (`cost(x, y) = |x - y|^2 / 2`); the spherical measure is normalized to a
//! probability measure. Every report emitted by the CLI carries the tag
//! `normalized-sphere, half-squared-cost` so numbers are self-describing.

pub mod calculus;
pub mod error;
pub mod gauge;
pub mod measure;
pub mod quadrature;
pub mod sliced;
pub mod sphere;
pub mod univariate;

pub use error::{Error, Result};
pub use measure::{Direction, DiscreteMeasure, Measure1D, SmoothingLevel, TimedMeasure};
pub use sphere::{RuleMethod, RuleSpec, SphereRule};
pub use univariate::{GaussianMixture1D, TransportMap1D};
