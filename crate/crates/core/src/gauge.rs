//! The gauge function on time-measure pairs, its geometric perturbation
//! series, and a constructive smooth variational principle over a finite
//! search space.
//!
//! The solver iterates exact maximization of the objective minus the
//! accumulated perturbation. On a finite space the sequence stabilizes: once
//! it does, the infinite tail of the perturbation series is a geometric sum
//! on the repeated anchor and is folded in closed form.

use std::collections::HashMap;

use serde::Serialize;

use crate::calculus::{grad_measure, hess_x_measure, spectral_norm_symmetric};
use crate::error::{Error, Result};
use crate::measure::{SmoothingLevel, TimedMeasure};
use crate::sliced::sw2_sigma_squared;
use crate::sphere::SphereRule;

/// Frozen constant for the integrated squared-gradient bound of the
/// perturbation, validated by the seeded sweep in the acceptance suite.
pub const PHI_GRAD_BOUND_CONST: f64 = 8.0;

/// Frozen constant for the integrated mixed-derivative bound.
pub const PHI_HESS_BOUND_CONST: f64 = 8.0;

/// Absolute tolerance for the conclusion checks; quadrature noise enters
/// every gauge evaluation.
pub const CONCLUSION_TOL: f64 = 1e-9;

/// Iteration cap for pathological configurations.
pub const DEFAULT_MAX_ITER: usize = 200;

/// Coupled perturbation parameters: the smoothing level is the reciprocal of
/// the perturbation weight delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeParams {
    delta: f64,
    sigma: f64,
    horizon: f64,
}

impl GaugeParams {
    pub fn new(delta: f64, horizon: f64) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                message: format!("must be finite and > 0, got {delta}"),
            });
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                message: format!("must be finite and > 0, got {horizon}"),
            });
        }
        Ok(Self {
            delta,
            sigma: 1.0 / delta,
            horizon,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn smoothing(&self) -> SmoothingLevel {
        SmoothingLevel::new(self.sigma).expect("sigma = 1/delta is positive")
    }
}

/// The gauge: squared time gap plus the squared regularized sliced distance.
pub fn rho_sigma(
    a: &TimedMeasure,
    b: &TimedMeasure,
    params: &GaugeParams,
    rule: &SphereRule,
) -> Result<f64> {
    if a.horizon() != b.horizon() {
        return Err(Error::InvalidParameter {
            name: "horizon",
            message: format!("mismatched horizons {} and {}", a.horizon(), b.horizon()),
        });
    }
    let dt = a.t() - b.t();
    let sw = sw2_sigma_squared(a.measure(), b.measure(), params.smoothing(), rule)?;
    Ok(dt * dt + sw.value)
}

/// Value of the perturbation series together with its truncation bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhiDelta {
    pub value: f64,
    /// `2^{-(N-1)} sup_n rho(x, anchor_n)` over the N recorded anchors:
    /// what any unrecorded tail could still contribute.
    pub tail_bound: f64,
}

/// Per-anchor series coefficients. A trailing run of identical anchors of
/// length >= 2 marks a stabilized sequence; the run's infinite geometric tail
/// is collapsed onto its first occurrence.
fn anchor_coefficients(anchors: &[TimedMeasure]) -> Vec<f64> {
    let n = anchors.len();
    let last = anchors.last().expect("anchors checked non-empty");
    let mut run = 1;
    while run < n && anchors[n - 1 - run] == *last {
        run += 1;
    }
    if run >= 2 {
        let head = n - run;
        let mut coeffs: Vec<f64> = (0..head).map(|j| 0.5f64.powi(j as i32)).collect();
        // sum_{j >= head} 2^{-j} = 2^{1-head}
        coeffs.push(0.5f64.powi(head as i32) * 2.0);
        coeffs
    } else {
        (0..n).map(|j| 0.5f64.powi(j as i32)).collect()
    }
}

/// Evaluates the perturbation `sum_n 2^{-n} rho(x, anchor_n)` over a recorded
/// finite anchor sequence.
pub fn phi_delta(
    x: &TimedMeasure,
    anchors: &[TimedMeasure],
    params: &GaugeParams,
    rule: &SphereRule,
) -> Result<PhiDelta> {
    if anchors.is_empty() {
        return Err(Error::InvalidParameter {
            name: "anchors",
            message: "anchor sequence must be non-empty".into(),
        });
    }
    let rhos: Vec<f64> = anchors
        .iter()
        .map(|a| rho_sigma(x, a, params, rule))
        .collect::<Result<_>>()?;
    let coeffs = anchor_coefficients(anchors);
    let value = coeffs.iter().zip(&rhos).map(|(c, r)| c * r).sum();
    let sup = rhos.iter().copied().fold(0.0, f64::max);
    let tail_bound = 0.5f64.powi(anchors.len() as i32 - 1) * sup;
    Ok(PhiDelta { value, tail_bound })
}

/// A finite list of candidate points standing in for the full time-measure
/// space, so that suprema are attainable and the strict-maximum conclusion
/// can be checked exhaustively.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    candidates: Vec<TimedMeasure>,
}

impl SearchSpace {
    pub fn new(candidates: Vec<TimedMeasure>) -> Result<Self> {
        let first = candidates.first().ok_or_else(|| Error::InvalidParameter {
            name: "candidates",
            message: "search space must be non-empty".into(),
        })?;
        let (dim, horizon) = (first.measure().dim(), first.horizon());
        for c in &candidates {
            if c.measure().dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.measure().dim(),
                });
            }
            if c.horizon() != horizon {
                return Err(Error::InvalidParameter {
                    name: "horizon",
                    message: "all candidates must share one horizon".into(),
                });
            }
        }
        Ok(Self { candidates })
    }

    pub fn candidates(&self) -> &[TimedMeasure] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub step: usize,
    pub chosen: usize,
    pub objective: f64,
    /// Objective minus the accumulated perturbation at the chosen point;
    /// non-decreasing across steps.
    pub perturbed_value: f64,
    pub rho_to_previous: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayEntry {
    pub n: usize,
    pub anchor: usize,
    pub rho_to_selected: f64,
    pub bound: f64,
}

/// Margins for the three conclusions of the variational principle.
#[derive(Debug, Clone, Serialize)]
pub struct ConclusionReport {
    /// One entry per recorded anchor: `rho(selected, anchor_n)` against
    /// `lambda / (2^n delta^2)`.
    pub decay: Vec<DecayEntry>,
    pub pass_decay: bool,
    /// `G(start)` against `G(selected) - delta^2 phi(selected)`.
    pub start_value: f64,
    pub perturbed_at_selected: f64,
    pub pass_domination: bool,
    /// Smallest gap `perturbed(selected) - perturbed(other)` over the rest of
    /// the space; positive means a strict maximum.
    pub strict_margin: f64,
    pub pass_strict: bool,
    pub tolerance: f64,
}

impl ConclusionReport {
    pub fn all_pass(&self) -> bool {
        self.pass_decay && self.pass_domination && self.pass_strict
    }
}

/// Output of the variational principle solver.
#[derive(Debug, Clone)]
pub struct BPResult {
    /// Candidate indices of the anchor sequence, starting at the start point.
    pub sequence: Vec<usize>,
    /// Index of the selected point (the last anchor).
    pub selected: usize,
    /// Objective value per candidate.
    pub objective_values: Vec<f64>,
    /// Perturbation value per candidate, for the final anchor sequence.
    pub phi_values: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub conclusions: ConclusionReport,
    pub lambda: f64,
}

impl BPResult {
    pub fn anchors<'a>(&self, space: &'a SearchSpace) -> Vec<&'a TimedMeasure> {
        self.sequence
            .iter()
            .map(|&i| &space.candidates()[i])
            .collect()
    }
}

struct RhoCache<'a> {
    params: &'a GaugeParams,
    rule: &'a SphereRule,
    values: HashMap<(usize, usize), f64>,
}

impl<'a> RhoCache<'a> {
    fn new(params: &'a GaugeParams, rule: &'a SphereRule) -> Self {
        Self {
            params,
            rule,
            values: HashMap::new(),
        }
    }

    fn get(&mut self, space: &SearchSpace, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Ok(0.0);
        }
        let key = (i.min(j), i.max(j));
        if let Some(v) = self.values.get(&key) {
            return Ok(*v);
        }
        let v = rho_sigma(
            &space.candidates()[key.0],
            &space.candidates()[key.1],
            self.params,
            self.rule,
        )?;
        self.values.insert(key, v);
        Ok(v)
    }
}

/// Runs the constructive principle: starting from a near-maximizer of the
/// objective, repeatedly pick the exact maximizer of the objective minus the
/// accumulated gauge perturbation, halving the new term's weight each round.
/// Stops once the selected point repeats twice in a row.
pub fn bp_solve<G>(
    objective: G,
    space: &SearchSpace,
    start_index: usize,
    lambda: f64,
    params: &GaugeParams,
    rule: &SphereRule,
) -> Result<BPResult>
where
    G: Fn(&TimedMeasure) -> Result<f64>,
{
    if start_index >= space.len() {
        return Err(Error::InvalidParameter {
            name: "start_index",
            message: format!("{start_index} out of range for {} candidates", space.len()),
        });
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            message: format!("must be finite and > 0, got {lambda}"),
        });
    }
    let g_vals: Vec<f64> = space
        .candidates()
        .iter()
        .map(&objective)
        .collect::<Result<_>>()?;
    let max_g = g_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if g_vals[start_index] < max_g - lambda - 1e-12 {
        return Err(Error::StartNotNearMaximal {
            max_g,
            start_g: g_vals[start_index],
            lambda,
        });
    }

    let delta2 = params.delta() * params.delta();
    let mut cache = RhoCache::new(params, rule);
    let mut sequence = vec![start_index];
    let mut iterations = Vec::new();
    let mut repeats = 0;
    let mut converged = false;

    for step in 0..DEFAULT_MAX_ITER {
        let mut best = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for c in 0..space.len() {
            let mut pen = 0.0;
            for (j, &anchor) in sequence.iter().enumerate() {
                pen += 0.5f64.powi(j as i32) * cache.get(space, c, anchor)?;
            }
            let val = g_vals[c] - delta2 * pen;
            if val > best_val {
                best_val = val;
                best = c;
            }
        }
        let prev = *sequence.last().unwrap();
        iterations.push(IterationRecord {
            step,
            chosen: best,
            objective: g_vals[best],
            perturbed_value: best_val,
            rho_to_previous: cache.get(space, best, prev)?,
        });
        sequence.push(best);
        if best == prev {
            repeats += 1;
            if repeats >= 2 {
                converged = true;
                break;
            }
        } else {
            repeats = 0;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            max_iter: DEFAULT_MAX_ITER,
        });
    }

    let selected = *sequence.last().unwrap();
    let anchors: Vec<TimedMeasure> = sequence
        .iter()
        .map(|&i| space.candidates()[i].clone())
        .collect();
    let coeffs = anchor_coefficients(&anchors);
    let mut phi_values = Vec::with_capacity(space.len());
    for c in 0..space.len() {
        let mut phi = 0.0;
        for (coeff, &anchor) in coeffs.iter().zip(&sequence) {
            phi += coeff * cache.get(space, c, anchor)?;
        }
        phi_values.push(phi);
    }

    let conclusions = check_conclusions(
        &sequence,
        selected,
        &g_vals,
        &phi_values,
        start_index,
        lambda,
        params,
        |i, j| cache.get(space, i, j),
    )?;

    Ok(BPResult {
        sequence,
        selected,
        objective_values: g_vals,
        phi_values,
        iterations,
        conclusions,
        lambda,
    })
}

#[allow(clippy::too_many_arguments)]
fn check_conclusions<R>(
    sequence: &[usize],
    selected: usize,
    g_vals: &[f64],
    phi_values: &[f64],
    start_index: usize,
    lambda: f64,
    params: &GaugeParams,
    mut rho: R,
) -> Result<ConclusionReport>
where
    R: FnMut(usize, usize) -> Result<f64>,
{
    let delta2 = params.delta() * params.delta();
    let mut decay = Vec::with_capacity(sequence.len());
    let mut pass_decay = true;
    for (n, &anchor) in sequence.iter().enumerate() {
        let r = rho(selected, anchor)?;
        let bound = lambda / (0.5f64.powi(n as i32).recip() * delta2);
        if r > bound + CONCLUSION_TOL {
            pass_decay = false;
        }
        decay.push(DecayEntry {
            n,
            anchor,
            rho_to_selected: r,
            bound,
        });
    }

    let perturbed_at_selected = g_vals[selected] - delta2 * phi_values[selected];
    let start_value = g_vals[start_index];
    let pass_domination = start_value <= perturbed_at_selected + CONCLUSION_TOL;

    let mut strict_margin = f64::INFINITY;
    for c in 0..g_vals.len() {
        if c == selected {
            continue;
        }
        let gap = perturbed_at_selected - (g_vals[c] - delta2 * phi_values[c]);
        if gap < strict_margin {
            strict_margin = gap;
        }
    }
    if g_vals.len() == 1 {
        strict_margin = f64::INFINITY;
    }
    let pass_strict = strict_margin > -CONCLUSION_TOL;

    Ok(ConclusionReport {
        decay,
        pass_decay,
        start_value,
        perturbed_at_selected,
        pass_domination,
        strict_margin,
        pass_strict,
        tolerance: CONCLUSION_TOL,
    })
}

/// Re-checks all three conclusions of a solver run from scratch: fresh gauge
/// evaluations, fresh perturbation values, exhaustive scan for the strict
/// maximum. `result.selected` is taken at face value, so a tampered result
/// fails honestly.
pub fn verify_conclusions<G>(
    result: &BPResult,
    objective: G,
    space: &SearchSpace,
    lambda: f64,
    params: &GaugeParams,
    rule: &SphereRule,
) -> Result<ConclusionReport>
where
    G: Fn(&TimedMeasure) -> Result<f64>,
{
    let g_vals: Vec<f64> = space
        .candidates()
        .iter()
        .map(&objective)
        .collect::<Result<_>>()?;
    let anchors: Vec<TimedMeasure> = result
        .sequence
        .iter()
        .map(|&i| space.candidates()[i].clone())
        .collect();
    let mut phi_values = Vec::with_capacity(space.len());
    for c in space.candidates() {
        phi_values.push(phi_delta(c, &anchors, params, rule)?.value);
    }
    let start_index = result.sequence[0];
    check_conclusions(
        &result.sequence,
        result.selected,
        &g_vals,
        &phi_values,
        start_index,
        lambda,
        params,
        |i, j| {
            if i == j {
                Ok(0.0)
            } else {
                rho_sigma(&space.candidates()[i], &space.candidates()[j], params, rule)
            }
        },
    )
}

/// Derivative checks for the perturbation at a probe point.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeBoundsReport {
    pub time_derivative: f64,
    /// `4 T`; the time derivative saturates it when the probe sits at the
    /// horizon and every anchor sits at time zero.
    pub time_bound: f64,
    pub time_ok: bool,
    pub grad_lhs: f64,
    pub grad_rhs: f64,
    pub grad_ok: bool,
    pub hess_lhs: f64,
    pub hess_rhs: f64,
    pub hess_ok: bool,
    pub grad_const: f64,
    pub hess_const: f64,
}

impl DerivativeBoundsReport {
    pub fn all_pass(&self) -> bool {
        self.time_ok && self.grad_ok && self.hess_ok
    }
}

/// Evaluates the perturbation's time derivative and the two integrated
/// measure-derivative bounds at a probe point, for a finished solver run.
pub fn phi_derivative_bounds(
    x: &TimedMeasure,
    result: &BPResult,
    space: &SearchSpace,
    params: &GaugeParams,
    rule: &SphereRule,
    hermite_order: usize,
) -> Result<DerivativeBoundsReport> {
    let anchors: Vec<TimedMeasure> = result
        .sequence
        .iter()
        .map(|&i| space.candidates()[i].clone())
        .collect();
    let coeffs = anchor_coefficients(&anchors);

    // Aggregate coefficients by candidate so each distinct anchor measure is
    // differentiated once.
    let mut agg: Vec<(usize, f64)> = Vec::new();
    for (coeff, &idx) in coeffs.iter().zip(&result.sequence) {
        match agg.iter_mut().find(|(i, _)| *i == idx) {
            Some((_, c)) => *c += coeff,
            None => agg.push((idx, *coeff)),
        }
    }

    let time_derivative: f64 = agg
        .iter()
        .map(|(idx, c)| c * 2.0 * (x.t() - space.candidates()[*idx].t()))
        .sum();
    let time_bound = 4.0 * params.horizon();

    let mu = x.measure();
    let k = mu.dim();
    let s = params.smoothing();
    let mut total_grad = vec![vec![0.0; k]; mu.len()];
    let mut total_hess = vec![vec![vec![0.0; k]; k]; mu.len()];
    for (idx, c) in &agg {
        let anchor_measure = space.candidates()[*idx].measure();
        let gf = grad_measure(mu, anchor_measure, s, rule, hermite_order)?;
        let hf = hess_x_measure(mu, anchor_measure, s, rule, hermite_order)?;
        for (acc, g) in total_grad.iter_mut().zip(gf.per_atom()) {
            for (ai, gi) in acc.iter_mut().zip(g) {
                *ai += c * gi;
            }
        }
        for (acc, hmat) in total_hess.iter_mut().zip(hf.per_atom()) {
            for (arow, hrow) in acc.iter_mut().zip(hmat) {
                for (aij, hij) in arow.iter_mut().zip(hrow) {
                    *aij += c * hij;
                }
            }
        }
    }

    let grad_lhs: f64 = total_grad
        .iter()
        .zip(mu.weights())
        .map(|(g, w)| w * g.iter().map(|c| c * c).sum::<f64>())
        .sum();
    let selected_m2 = space.candidates()[result.selected]
        .measure()
        .second_moment();
    let delta = params.delta();
    let grad_rhs =
        PHI_GRAD_BOUND_CONST * (mu.second_moment() + selected_m2 + 1.0 / (delta * delta));

    let hess_lhs: f64 = total_hess
        .iter()
        .zip(mu.weights())
        .map(|(h, w)| w * spectral_norm_symmetric(h))
        .sum();
    let hess_rhs = PHI_HESS_BOUND_CONST * (1.0 + delta * selected_m2.sqrt());

    Ok(DerivativeBoundsReport {
        time_derivative,
        time_bound,
        time_ok: time_derivative.abs() <= time_bound + 1e-12,
        grad_lhs,
        grad_rhs,
        grad_ok: grad_lhs <= grad_rhs,
        hess_lhs,
        hess_rhs,
        hess_ok: hess_lhs <= hess_rhs,
        grad_const: PHI_GRAD_BOUND_CONST,
        hess_const: PHI_HESS_BOUND_CONST,
    })
}
