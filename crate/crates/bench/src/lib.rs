//! Shared instance builders for the benchmark targets.

use swot_core::{DiscreteMeasure, GaussianMixture1D};

/// Deterministic pseudo-random coordinates without pulling an RNG into the
/// library: a simple splitmix-style stream keyed by `seed`.
pub fn coords(seed: u64, count: usize) -> Vec<f64> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    (0..count)
        .map(|_| {
            state = state
                .wrapping_mul(0xbf58476d1ce4e5b9)
                .wrapping_add(0x94d049bb133111eb);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            2.0 * u - 1.0
        })
        .collect()
}

pub fn measure(seed: u64, k: usize, n: usize) -> DiscreteMeasure {
    let flat = coords(seed, k * n);
    let atoms = flat.chunks(k).map(|c| c.to_vec()).collect();
    DiscreteMeasure::uniform(atoms).expect("valid benchmark measure")
}

pub fn mixture(seed: u64, n: usize, sigma: f64) -> GaussianMixture1D {
    let means = coords(seed, n);
    let w = 1.0 / n as f64;
    GaussianMixture1D::new(means, vec![w; n], sigma).expect("valid benchmark mixture")
}
