//! Small numeric helpers shared by the samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Index drawn proportionally to non-negative `weights`.
///
/// Falls back to the last positive entry when rounding leaves the uniform
/// draw past the cumulative total.
pub fn sample_weights<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0 && total.is_finite(), "bad weights {weights:?}");
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Normalizes log weights in place into probabilities.
pub fn normalize_log_weights(log_weights: &mut [f64]) {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in log_weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    for w in log_weights.iter_mut() {
        *w /= total;
    }
}

/// Normalizes non-negative weights in place.
pub fn normalize_weights(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// `ln Γ(a + n) - ln Γ(a)` as a sum of logs; exact enough for small counts.
pub fn ln_rising(a: f64, n: u32) -> f64 {
    (0..n).map(|i| (a + f64::from(i)).ln()).sum()
}

/// Symmetric Dirichlet draw of dimension `dim`.
///
/// Works in log space so that small concentrations do not underflow every
/// coordinate to zero.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    let boosted = Gamma::new(concentration + 1.0, 1.0).expect("positive concentration");
    let mut logs: Vec<f64> = (0..dim)
        .map(|_| {
            let g: f64 = boosted.sample(rng);
            let u = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / concentration
        })
        .collect();
    normalize_log_weights(&mut logs);
    logs
}
