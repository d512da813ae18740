//! Sliced squared Wasserstein distances and an exact multivariate oracle for
//! small instances.
//!
//! `sw2_squared` aggregates exact 1D distances of the projections over a
//! sphere rule; `sw2_sigma_squared` smooths each projection with a 1D
//! Gaussian first, which is the same thing as smoothing the measures in R^k
//! before projecting. The oracle expands rational weights into equal-weight
//! atom multisets and solves the assignment problem exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Direction, DiscreteMeasure, SmoothingLevel};
use crate::sphere::{RuleSpec, SphereRule};
use crate::univariate::{w2_squared_1d_with_order, GaussianMixture1D, DEFAULT_QUAD_ORDER};

/// Largest equal-weight refinement the exact oracle accepts, per side.
pub const ORACLE_CAP: usize = 64;

/// Convention tag embedded in every report.
pub const CONVENTION: &str = "normalized-sphere, half-squared-cost";

/// Result of a sliced-distance computation, with the per-direction breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlicedDistanceReport {
    /// The squared sliced distance: the rule-weighted sum of the 1D values.
    pub value: f64,
    /// One squared 1D distance per rule node, in node order.
    pub per_direction: Vec<(Direction, f64)>,
    pub rule: RuleSpec,
    pub sigma: f64,
    pub convention: &'static str,
}

fn check_dims(mu: &DiscreteMeasure, nu: &DiscreteMeasure, rule: &SphereRule) -> Result<()> {
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
    Ok(())
}

/// Smoothed projection: the 1D mixture with means `theta . x_i`, the
/// measure's weights, and width sigma.
pub fn mix(
    mu: &DiscreteMeasure,
    theta: &Direction,
    s: SmoothingLevel,
) -> Result<GaussianMixture1D> {
    Ok(GaussianMixture1D::from_measure(&mu.project(theta)?, s))
}

/// Squared sliced Wasserstein distance (no smoothing). Each projection pair
/// takes the exact discrete 1D path.
pub fn sw2_squared(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    rule: &SphereRule,
) -> Result<SlicedDistanceReport> {
    sw2_sigma_squared(mu, nu, SmoothingLevel::new(0.0)?, rule)
}

/// Squared Gaussian-regularized sliced Wasserstein distance.
///
/// Projections are computed first and smoothed in 1D, using the identity
/// between projecting a smoothed measure and smoothing a projection.
pub fn sw2_sigma_squared(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
) -> Result<SlicedDistanceReport> {
    sw2_sigma_squared_with_order(mu, nu, s, rule, DEFAULT_QUAD_ORDER)
}

/// Same as [`sw2_sigma_squared`] with an explicit 1D quadrature budget.
pub fn sw2_sigma_squared_with_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: SmoothingLevel,
    rule: &SphereRule,
    order: usize,
) -> Result<SlicedDistanceReport> {
    check_dims(mu, nu, rule)?;
    // Per-direction work is independent; collect preserves node order so the
    // final reduction is deterministic.
    let per_direction: Vec<(Direction, f64)> = rule
        .nodes()
        .par_iter()
        .map(|theta| {
            let a = GaussianMixture1D::from_measure(&mu.project(theta)?, s);
            let b = GaussianMixture1D::from_measure(&nu.project(theta)?, s);
            Ok((theta.clone(), w2_squared_1d_with_order(&a, &b, order)))
        })
        .collect::<Result<_>>()?;
    let value = per_direction
        .iter()
        .zip(rule.weights())
        .map(|((_, v), w)| w * v)
        .sum();
    Ok(SlicedDistanceReport {
        value,
        per_direction,
        rule: rule.spec().clone(),
        sigma: s.sigma(),
        convention: CONVENTION,
    })
}

/// Exact squared multivariate W2 with half-squared cost, for measures whose
/// weights admit a common equal-weight refinement of at most [`ORACLE_CAP`]
/// atoms per side. Solved as a linear assignment problem.
pub fn w2_squared_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let m = common_refinement(mu, nu)?;
    let a = expand(mu, m);
    let b = expand(nu, m);
    let mut cost = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let d2: f64 = a[i]
                .iter()
                .zip(b[j].iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            cost[i * m + j] = 0.5 * d2;
        }
    }
    let total = assignment::solve(m, &cost)?;
    Ok(total / m as f64)
}

/// Smallest m with every weight of both measures an integer multiple of 1/m.
fn common_refinement(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<usize> {
    let floor = mu.len().max(nu.len());
    for m in floor..=ORACLE_CAP {
        let fits = |w: &f64| {
            let scaled = w * m as f64;
            (scaled - scaled.round()).abs() <= 1e-9 * m as f64
        };
        if mu.weights().iter().all(fits) && nu.weights().iter().all(fits) {
            return Ok(m);
        }
    }
    Err(Error::NonCommensurableWeights { cap: ORACLE_CAP })
}

fn expand(measure: &DiscreteMeasure, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(m);
    for (atom, w) in measure.atoms().iter().zip(measure.weights()) {
        let copies = (w * m as f64).round() as usize;
        for _ in 0..copies {
            out.push(atom.clone());
        }
    }
    // Rounding dust can drop or add a copy; the refinement check makes this
    // impossible, but guard the invariant anyway.
    debug_assert_eq!(out.len(), m);
    out
}

mod assignment {
    //! Shortest-augmenting-path solver for the square linear assignment
    //! problem (the Jonker-Volgenant scheme used by SciPy).

    use crate::error::{Error, Result};

    const UNASSIGNED: usize = usize::MAX;

    /// Minimum total cost of a perfect matching on an n x n cost matrix.
    pub fn solve(n: usize, cost: &[f64]) -> Result<f64> {
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cost",
                message: "assignment costs must be finite".into(),
            });
        }
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut col_of_row = vec![UNASSIGNED; n];
        let mut row_of_col = vec![UNASSIGNED; n];
        let mut path = vec![UNASSIGNED; n];
        let mut dist = vec![f64::INFINITY; n];
        let mut seen_row = vec![false; n];
        let mut seen_col = vec![false; n];
        let mut remaining = vec![0usize; n];

        for start in 0..n {
            seen_row.fill(false);
            seen_col.fill(false);
            dist.fill(f64::INFINITY);
            for (slot, c) in remaining.iter_mut().enumerate() {
                *c = n - slot - 1;
            }
            let mut n_remaining = n;
            let mut min_val = 0.0;
            let mut sink = UNASSIGNED;
            let mut i = start;
            while sink == UNASSIGNED {
                seen_row[i] = true;
                let mut lowest = f64::INFINITY;
                let mut lowest_slot = UNASSIGNED;
                for slot in 0..n_remaining {
                    let j = remaining[slot];
                    let reduced = min_val + cost[i * n + j] - u[i] - v[j];
                    if reduced < dist[j] {
                        dist[j] = reduced;
                        path[j] = i;
                    }
                    if dist[j] < lowest || (dist[j] == lowest && row_of_col[j] == UNASSIGNED) {
                        lowest = dist[j];
                        lowest_slot = slot;
                    }
                }
                min_val = lowest;
                if !min_val.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "cost",
                        message: "assignment is infeasible".into(),
                    });
                }
                let j = remaining[lowest_slot];
                if row_of_col[j] == UNASSIGNED {
                    sink = j;
                } else {
                    i = row_of_col[j];
                }
                seen_col[j] = true;
                n_remaining -= 1;
                remaining[lowest_slot] = remaining[n_remaining];
            }

            u[start] += min_val;
            for r in 0..n {
                if seen_row[r] && r != start {
                    u[r] += min_val - dist[col_of_row[r]];
                }
            }
            for c in 0..n {
                if seen_col[c] {
                    v[c] -= min_val - dist[c];
                }
            }

            let mut j = sink;
            loop {
                let r = path[j];
                row_of_col[j] = r;
                std::mem::swap(&mut col_of_row[r], &mut j);
                if r == start {
                    break;
                }
            }
        }

        Ok((0..n).map(|r| cost[r * n + col_of_row[r]]).sum())
    }

    #[cfg(test)]
    mod tests {
        use super::solve;

        #[test]
        fn tiny_instances() {
            assert!((solve(1, &[3.5]).unwrap() - 3.5).abs() < 1e-15);
            // off-diagonal is cheaper
            let c = [10.0, 1.0, 1.0, 10.0];
            assert!((solve(2, &c).unwrap() - 2.0).abs() < 1e-15);
            // diagonal is cheaper
            let c = [1.0, 10.0, 10.0, 1.0];
            assert!((solve(2, &c).unwrap() - 2.0).abs() < 1e-15);
        }

        #[test]
        fn matches_brute_force() {
            use rand::{RngExt, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
            for n in [2usize, 3, 4, 5, 6] {
                for _ in 0..20 {
                    let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
                    let got = solve(n, &cost).unwrap();
                    let best = brute_force(n, &cost);
                    assert!(
                        (got - best).abs() < 1e-10,
                        "n={n}: solver {got} vs brute force {best}"
                    );
                }
            }
        }

        fn brute_force(n: usize, cost: &[f64]) -> f64 {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| {
                let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
                if total < best {
                    best = total;
                }
            });
            best
        }

        fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
            if k == items.len() {
                visit(items);
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                permute(items, k + 1, visit);
                items.swap(k, i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure1D;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded_measure(rng: &mut ChaCha8Rng, k: usize, n: usize) -> DiscreteMeasure {
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        DiscreteMeasure::uniform(atoms).unwrap()
    }

    #[test]
    fn zero_distance_to_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = seeded_measure(&mut rng, 2, 4);
        let rule = SphereRule::default_for(2, 16, 0).unwrap();
        let r = sw2_squared(&mu, &mu, &rule).unwrap();
        assert!(r.value.abs() < 1e-14);
        let s = SmoothingLevel::new(0.7).unwrap();
        let r = sw2_sigma_squared(&mu, &mu, s, &rule).unwrap();
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn point_mass_closed_form() {
        // SW2^2(delta_a, delta_b) = |a - b|^2 / (2k)
        for k in [1usize, 2, 3] {
            let n = if k == 2 { 64 } else { 4096 };
            let rule = SphereRule::default_for(k, n, 3).unwrap();
            let a: Vec<f64> = (0..k).map(|i| i as f64 * 0.5 + 0.5).collect();
            let b: Vec<f64> = (0..k).map(|i| -(i as f64) - 1.0).collect();
            let mu = DiscreteMeasure::dirac(a.clone()).unwrap();
            let nu = DiscreteMeasure::dirac(b.clone()).unwrap();
            let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            let expect = d2 / (2.0 * k as f64);
            let got = sw2_squared(&mu, &nu, &rule).unwrap().value;
            let tol = if k <= 2 { 1e-12 } else { 0.05 * expect };
            assert!((got - expect).abs() <= tol, "k={k}: {got} vs {expect}");

            // smoothing shifts cancel for point masses
            let s = SmoothingLevel::new(0.8).unwrap();
            let got_s = sw2_sigma_squared(&mu, &nu, s, &rule).unwrap().value;
            let tol_s = if k <= 2 { 1e-9 } else { 0.05 * expect };
            assert!(
                (got_s - expect).abs() <= tol_s,
                "k={k} smoothed: {got_s} vs {expect}"
            );
        }
    }

    #[test]
    fn report_value_is_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mu = seeded_measure(&mut rng, 2, 5);
        let nu = seeded_measure(&mut rng, 2, 5);
        let rule = SphereRule::default_for(2, 32, 0).unwrap();
        let r = sw2_squared(&mu, &nu, &rule).unwrap();
        let sum: f64 = r
            .per_direction
            .iter()
            .zip(rule.weights())
            .map(|((_, v), w)| w * v)
            .sum();
        assert!((r.value - sum).abs() < 1e-12);
        assert_eq!(r.convention, CONVENTION);
    }

    #[test]
    fn matches_per_angle_brute_force_oracle() {
        // Independent oracle: per angle, project, sort both sides, and pair
        // equal-weight atoms monotonically by explicit index walking.
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let n = 360;
        let rule = SphereRule::default_for(2, n, 0).unwrap();
        let got = sw2_squared(&mu, &nu, &rule).unwrap().value;

        let mut oracle = 0.0;
        for j in 0..n {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let theta = [angle.cos(), angle.sin()];
            let mut pa: Vec<f64> = mu
                .atoms()
                .iter()
                .map(|x| x[0] * theta[0] + x[1] * theta[1])
                .collect();
            let mut pb: Vec<f64> = nu
                .atoms()
                .iter()
                .map(|x| x[0] * theta[0] + x[1] * theta[1])
                .collect();
            pa.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pb.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let w2: f64 = pa
                .iter()
                .zip(&pb)
                .map(|(x, y)| 0.5 * (x - y) * (x - y) * 0.5)
                .sum();
            oracle += w2 / n as f64;
        }
        assert!((got - oracle).abs() < 1e-10, "{got} vs oracle {oracle}");
    }

    #[test]
    fn sigma_zero_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rule = SphereRule::default_for(2, 64, 0).unwrap();
        for _ in 0..5 {
            let mu = seeded_measure(&mut rng, 2, 5);
            let nu = seeded_measure(&mut rng, 2, 5);
            let base = sw2_squared(&mu, &nu, &rule).unwrap().value;
            let s = SmoothingLevel::new(1e-4).unwrap();
            let smoothed = sw2_sigma_squared(&mu, &nu, s, &rule).unwrap().value;
            assert!((smoothed - base).abs() <= 1e-3, "{smoothed} vs {base}");
        }
    }

    #[test]
    fn oracle_examples() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((w2_squared_exact(&mu, &mu).unwrap()).abs() < 1e-15);
        // identity coupling: each atom moves by 1, cost 1/2 each, mass 1/2 each
        assert!((w2_squared_exact(&mu, &nu).unwrap() - 0.5).abs() < 1e-12);

        let a = DiscreteMeasure::dirac(vec![1.0, 2.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![4.0, 6.0]).unwrap();
        assert!((w2_squared_exact(&a, &b).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_weighted_refinement() {
        // weights 1/4, 3/4 refine at m = 4
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        // mass 3/4 moves distance 1: cost = 3/4 * 1/2
        assert!((w2_squared_exact(&mu, &nu).unwrap() - 0.375).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_incommensurable() {
        let w = 1.0 / std::f64::consts::PI;
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![w, 1.0 - w]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        assert!(matches!(
            w2_squared_exact(&mu, &nu),
            Err(Error::NonCommensurableWeights { .. })
        ));
    }

    #[test]
    fn slicing_below_ambient_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for k in [1usize, 2, 3] {
            let n = if k == 2 { 64 } else { 512 };
            let rule = SphereRule::default_for(k, n, 5).unwrap();
            for _ in 0..10 {
                let mu = seeded_measure(&mut rng, k, 4);
                let nu = seeded_measure(&mut rng, k, 4);
                let sliced = sw2_squared(&mu, &nu, &rule).unwrap().value;
                let ambient = w2_squared_exact(&mu, &nu).unwrap();
                assert!(
                    sliced <= ambient + 1e-10,
                    "k={k}: sliced {sliced} > ambient {ambient}"
                );
            }
        }
    }

    #[test]
    fn smoothing_contracts_sliced() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let rule = SphereRule::default_for(2, 48, 0).unwrap();
        for _ in 0..20 {
            let mu = seeded_measure(&mut rng, 2, 4);
            let nu = seeded_measure(&mut rng, 2, 4);
            let base = sw2_squared(&mu, &nu, &rule).unwrap().value;
            let s = SmoothingLevel::new(rng.random_range(0.1..1.2)).unwrap();
            let smoothed = sw2_sigma_squared(&mu, &nu, s, &rule).unwrap().value;
            assert!(smoothed <= base + 1e-10);
        }
    }

    #[test]
    fn distinct_measures_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for k in [1usize, 2, 3] {
            let n_nodes = match k {
                1 => 2,
                2 => 5,
                _ => 8, // >= 2k + 1, rounded up to an even count
            };
            let rule = SphereRule::default_for(k, n_nodes, 1).unwrap();
            let s = SmoothingLevel::new(0.5).unwrap();
            for _ in 0..17 {
                let mu = seeded_measure(&mut rng, k, 3);
                let nu = seeded_measure(&mut rng, k, 3);
                let d = sw2_sigma_squared(&mu, &nu, s, &rule).unwrap().value;
                assert!(d > 1e-12, "k={k}: distinct measures got distance {d}");
            }
        }
    }

    #[test]
    fn rotation_equivariance_on_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let n = 360;
        let rule = SphereRule::default_for(2, n, 0).unwrap();
        let mu = seeded_measure(&mut rng, 2, 4);
        let nu = seeded_measure(&mut rng, 2, 4);
        let base = sw2_squared(&mu, &nu, &rule).unwrap().value;

        let rotate = |m: &DiscreteMeasure, angle: f64| {
            let (c, s) = (angle.cos(), angle.sin());
            let atoms = m
                .atoms()
                .iter()
                .map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]])
                .collect();
            DiscreteMeasure::new(atoms, m.weights().to_vec()).unwrap()
        };

        // node-lattice rotation permutes the directions: equal up to roundoff
        let lattice = 2.0 * std::f64::consts::PI * 7.0 / n as f64;
        let v = sw2_squared(&rotate(&mu, lattice), &rotate(&nu, lattice), &rule)
            .unwrap()
            .value;
        assert!((v - base).abs() < 1e-9, "{v} vs {base}");

        // generic rotation: within the rule's quadrature tolerance
        let v = sw2_squared(&rotate(&mu, 0.37), &rotate(&nu, 0.37), &rule)
            .unwrap()
            .value;
        assert!((v - base).abs() < 1e-3, "{v} vs {base}");
    }

    #[test]
    fn metric_axioms_on_seeded_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rule = SphereRule::default_for(2, 32, 0).unwrap();
        let s = SmoothingLevel::new(0.6).unwrap();
        for _ in 0..30 {
            let a = seeded_measure(&mut rng, 2, 3);
            let b = seeded_measure(&mut rng, 2, 3);
            let c = seeded_measure(&mut rng, 2, 3);
            let dist = |x: &DiscreteMeasure, y: &DiscreteMeasure| {
                (2.0 * sw2_sigma_squared(x, y, s, &rule).unwrap().value).sqrt()
            };
            let ab = dist(&a, &b);
            let ba = dist(&b, &a);
            assert!((ab - ba).abs() < 1e-10);
            assert!(ab <= dist(&a, &c) + dist(&c, &b) + 1e-9);
        }
    }

    #[test]
    fn projection_merge_keeps_mass() {
        // merged atoms keep total mass 1 through the sliced pipeline
        let mu = DiscreteMeasure::uniform(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let theta = Direction::normalize(vec![1.0, 1.0]).unwrap();
        let p: Measure1D = mu.project(&theta).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-15);
    }
}
