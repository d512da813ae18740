//! On-disk formats: measure files, solver configs, and report shapes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swot_core::{DiscreteMeasure, RuleSpec, TimedMeasure};

/// Measure input schema: `{"dim": k, "atoms": [[...], ...], "weights": [...]}`,
/// weights optional (uniform when absent).
#[derive(Debug, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    pub atoms: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl MeasureFile {
    pub fn into_measure(self) -> Result<DiscreteMeasure, String> {
        for (i, a) in self.atoms.iter().enumerate() {
            if a.len() != self.dim {
                return Err(format!(
                    "atom {i} has {} coordinates, dim says {}",
                    a.len(),
                    self.dim
                ));
            }
        }
        let measure = match self.weights {
            Some(w) => DiscreteMeasure::new(self.atoms, w),
            None => DiscreteMeasure::uniform(self.atoms),
        };
        measure.map_err(|e| e.to_string())
    }
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read measure file {}: {e}", path.display()))?;
    let parsed: MeasureFile = serde_json::from_str(&text)
        .map_err(|e| format!("cannot parse measure file {}: {e}", path.display()))?;
    parsed
        .into_measure()
        .map_err(|e| format!("invalid measure in {}: {e}", path.display()))
}

/// A candidate or probe entry of a solver config.
#[derive(Debug, Deserialize)]
pub struct TimedMeasureSpec {
    pub t: f64,
    pub measure: String,
}

impl TimedMeasureSpec {
    pub fn load(&self, base: &Path, horizon: f64) -> Result<TimedMeasure, String> {
        let path = base.join(&self.measure);
        let m = load_measure(&path)?;
        TimedMeasure::new(self.t, m, horizon).map_err(|e| e.to_string())
    }
}

/// Built-in objectives for the solver.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    /// G(t, mu) = -M2(mu) + time_weight * t
    NegSecondMoment {
        #[serde(default)]
        time_weight: f64,
    },
    /// G(t, mu) = -SW2_sigma^2(mu, target) + time_weight * t
    NegSw2ToTarget {
        target: String,
        #[serde(default)]
        time_weight: f64,
    },
    /// G(t, mu) = coeffs . mean(mu) + time_weight * t
    LinearMoments {
        coeffs: Vec<f64>,
        #[serde(default)]
        time_weight: f64,
    },
}

fn default_hermite() -> usize {
    64
}

fn default_max_probes() -> usize {
    10
}

/// Config schema for `swot bp-solve`.
#[derive(Debug, Deserialize)]
pub struct BpConfig {
    pub horizon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub rule: RuleSpec,
    #[serde(default = "default_hermite")]
    pub hermite_order: usize,
    pub candidates: Vec<TimedMeasureSpec>,
    #[serde(default)]
    pub start_index: usize,
    pub objective: ObjectiveSpec,
    /// Probe points for the derivative-bound report; the selected candidate
    /// is probed when empty.
    #[serde(default)]
    pub probes: Vec<TimedMeasureSpec>,
    #[serde(default = "default_max_probes")]
    pub max_probes: usize,
}

pub fn load_bp_config(path: &Path) -> Result<(BpConfig, PathBuf), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let cfg: BpConfig = serde_json::from_str(&text)
        .map_err(|e| format!("cannot parse config {}: {e}", path.display()))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, base))
}

/// Convention tag embedded in every report.
pub const CONVENTION: &str = swot_core::sliced::CONVENTION;

#[derive(Debug, Serialize)]
pub struct DirectionValue {
    pub direction: Vec<f64>,
    pub w2_squared: f64,
}

#[derive(Debug, Serialize)]
pub struct DistReport {
    pub command: &'static str,
    pub convention: &'static str,
    pub mu: String,
    pub nu: String,
    pub sigma: f64,
    pub rule: RuleSpec,
    pub quad_order: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sqrt_value: Option<f64>,
    pub per_direction: Vec<DirectionValue>,
}

#[derive(Debug, Serialize)]
pub struct BoundPair {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Serialize)]
pub struct GradReport {
    pub command: &'static str,
    pub convention: &'static str,
    pub mu: String,
    pub nu: String,
    pub sigma: f64,
    pub rule: RuleSpec,
    pub hermite_order: usize,
    pub per_atom_gradients: Vec<Vec<f64>>,
    pub first_bound: BoundPair,
    pub saturations: u64,
}

#[derive(Debug, Serialize)]
pub struct HessReport {
    pub command: &'static str,
    pub convention: &'static str,
    pub mu: String,
    pub nu: String,
    pub sigma: f64,
    pub rule: RuleSpec,
    pub hermite_order: usize,
    pub per_atom_hessians: Vec<Vec<Vec<f64>>>,
    pub second_bound: BoundPair,
    pub saturations: u64,
}
