use rand::Rng;

/// Tuning for the univariate stepping-out slice sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceConfig {
    /// Initial bracket width.
    pub width: f64,
    /// Total step-out budget shared between both edges.
    pub max_steps: u32,
    /// The bracket never extends below this value.
    pub lower_bound: f64,
    /// Shrinkage attempts before giving up and keeping the current point.
    pub max_shrinks: u32,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_steps: 64,
            lower_bound: 1e-12,
            max_shrinks: 1000,
        }
    }
}

/// One slice-sampling transition from `x0` for an unnormalized log density.
///
/// Uses stepping out with the randomized left/right step split, so the
/// transition is exact even when the step budget runs out. `log_density` must
/// return `-inf` outside the support. Non-finite starting densities and
/// exhausted shrinkage both return `x0` unchanged.
pub fn slice_sample<R, F>(x0: f64, log_density: F, cfg: &SliceConfig, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let fx0 = log_density(x0);
    if !fx0.is_finite() {
        return x0;
    }
    let level = fx0 + (1.0 - rng.random::<f64>()).ln();

    let w = cfg.width;
    let mut left = x0 - w * rng.random::<f64>();
    let mut right = left + w;
    let mut left_steps = (f64::from(cfg.max_steps) * rng.random::<f64>()).floor() as u32;
    let mut right_steps = cfg.max_steps.saturating_sub(1).saturating_sub(left_steps);

    while left_steps > 0 && left > cfg.lower_bound && level < log_density(left) {
        left -= w;
        left_steps -= 1;
    }
    left = left.max(cfg.lower_bound);
    while right_steps > 0 && level < log_density(right) {
        right += w;
        right_steps -= 1;
    }

    for _ in 0..cfg.max_shrinks {
        let x1 = left + rng.random::<f64>() * (right - left);
        if level < log_density(x1) {
            return x1;
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
    x0
}
