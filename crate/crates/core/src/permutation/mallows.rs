//! Generalized Mallows marginals over inversion components, the conjugate
//! prior on the dispersions, and samplers for both.
//!
//! Components are 0-based: component `k` of a `K`-intent model has support
//! `0..=K-1-k`, i.e. `K - k` values.

use rand::Rng;

use super::slice::{slice_sample, SliceConfig};
use super::{InversionVector, PermutationError};

fn support_len(component: usize, num_intents: usize) -> usize {
    debug_assert!(component + 1 < num_intents);
    num_intents - component
}

/// Log of the normalizer `(1 - e^{-n rho}) / (1 - e^{-rho})` for a component
/// with `n` support points. `rho = 0` gives the uniform limit `ln n`.
pub fn log_psi(rho: f64, n: usize) -> f64 {
    if rho == 0.0 {
        return (n as f64).ln();
    }
    let n = n as f64;
    (-(-n * rho).exp_m1()).ln() - (-(-rho).exp_m1()).ln()
}

/// Log-probability of inversion count `v` at `component` under dispersion `rho`.
pub fn gmm_log_pmf(
    v: usize,
    rho: f64,
    component: usize,
    num_intents: usize,
) -> Result<f64, PermutationError> {
    let n = support_len(component, num_intents);
    if v >= n {
        return Err(PermutationError::InversionOutOfBounds {
            component,
            value: v,
            bound: n - 1,
        });
    }
    if !(rho >= 0.0) {
        return Err(PermutationError::NonPositiveDispersion(rho));
    }
    Ok(-rho * v as f64 - log_psi(rho, n))
}

/// Mean inversion count whose maximum-likelihood dispersion is `rho0`.
pub fn prior_inversion_mean(
    rho0: f64,
    component: usize,
    num_intents: usize,
) -> Result<f64, PermutationError> {
    if !(rho0 > 0.0) {
        return Err(PermutationError::NonPositiveDispersion(rho0));
    }
    let n = support_len(component, num_intents) as f64;
    Ok(1.0 / rho0.exp_m1() - n / (n * rho0).exp_m1())
}

/// Unnormalized log density of the conjugate dispersion prior.
pub fn gmm0_log_density(
    rho: f64,
    v_mean: f64,
    nu: f64,
    component: usize,
    num_intents: usize,
) -> Result<f64, PermutationError> {
    if !(rho > 0.0) {
        return Err(PermutationError::NonPositiveDispersion(rho));
    }
    let n = support_len(component, num_intents);
    Ok((-rho * v_mean - log_psi(rho, n)) * nu)
}

/// One slice-sampling move on a dispersion targeting
/// `gmm0_log_density(., v_mean, nu, component, num_intents)`.
pub fn slice_sample_rho<R: Rng + ?Sized>(
    current: f64,
    v_mean: f64,
    nu: f64,
    component: usize,
    num_intents: usize,
    rng: &mut R,
) -> f64 {
    let n = support_len(component, num_intents);
    let target = |rho: f64| {
        if rho > 0.0 {
            (-rho * v_mean - log_psi(rho, n)) * nu
        } else {
            f64::NEG_INFINITY
        }
    };
    slice_sample(current, target, &SliceConfig::default(), rng)
}

/// Per-component dispersions. Zero entries mean a uniform component.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispersion(Vec<f64>);

impl Dispersion {
    pub fn new(rho: Vec<f64>) -> Result<Self, PermutationError> {
        if let Some(&bad) = rho.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(PermutationError::NonPositiveDispersion(bad));
        }
        Ok(Self(rho))
    }

    pub fn constant(rho: f64, num_intents: usize) -> Result<Self, PermutationError> {
        Self::new(vec![rho; num_intents.saturating_sub(1)])
    }

    pub fn uniform(num_intents: usize) -> Self {
        Self(vec![0.0; num_intents.saturating_sub(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, component: usize) -> f64 {
        self.0[component]
    }

    pub(crate) fn set(&mut self, component: usize, rho: f64) {
        debug_assert!(rho >= 0.0);
        self.0[component] = rho;
    }

    pub fn num_intents(&self) -> usize {
        self.0.len() + 1
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }
}

/// The conjugate prior shared by all dispersions: strength `nu0` and the
/// per-component prior mean inversion implied by `rho0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionPrior {
    pub rho0: f64,
    pub nu0: f64,
    means: Vec<f64>,
}

impl DispersionPrior {
    pub fn new(rho0: f64, nu0: f64, num_intents: usize) -> Result<Self, PermutationError> {
        let means = (0..num_intents.saturating_sub(1))
            .map(|k| prior_inversion_mean(rho0, k, num_intents))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rho0, nu0, means })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Posterior `(v_mean, nu)` for a component after observing
    /// `inversion_sum` over `num_docs` documents.
    pub fn posterior(&self, component: usize, inversion_sum: usize, num_docs: usize) -> (f64, f64) {
        let nu = num_docs as f64 + self.nu0;
        let v_mean = (inversion_sum as f64 + self.means[component] * self.nu0) / nu;
        (v_mean, nu)
    }
}

/// Draws each inversion component independently from its Mallows marginal.
pub fn sample_inversion<R: Rng + ?Sized>(rho: &Dispersion, rng: &mut R) -> InversionVector {
    let num_intents = rho.num_intents();
    let mut components = Vec::with_capacity(num_intents - 1);
    let mut weights = Vec::with_capacity(num_intents);
    for (k, &r) in rho.as_slice().iter().enumerate() {
        let n = support_len(k, num_intents);
        weights.clear();
        // Unnormalized e^{-r v}; the common factor does not matter.
        weights.extend((0..n).map(|v| (-r * v as f64).exp()));
        components.push(crate::math::sample_weights(&weights, rng));
    }
    InversionVector(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pmf(v: usize, rho: f64, k: usize, kk: usize) -> f64 {
        gmm_log_pmf(v, rho, k, kk).unwrap().exp()
    }

    #[test]
    fn pmf_normalizes() {
        for &(kk, rho) in &[(5, 1.0), (2, 0.01), (12, 20.0), (7, 0.3)] {
            for k in 0..kk - 1 {
                let total: f64 = (0..kk - k).map(|v| pmf(v, rho, k, kk)).sum();
                assert!((total - 1.0).abs() < 1e-12, "K={kk} k={k} rho={rho}: {total}");
            }
        }
    }

    #[test]
    fn pmf_concentrates_for_large_rho() {
        assert!(pmf(0, 10.0, 0, 5) > 1.0 - 1e-4);
    }

    #[test]
    fn pmf_matches_direct_sum() {
        // K=5, 1-based k=3 (0-based 2), rho=1: three support points.
        let direct: f64 = (0..3).map(|j| (-(j as f64)).exp()).sum();
        let psi = (1.0 - (-3.0f64).exp()) / (1.0 - (-1.0f64).exp());
        assert!((direct - psi).abs() < 1e-14);
        assert!((pmf(1, 1.0, 2, 5) - (-1.0f64).exp() / psi).abs() < 1e-14);
    }

    #[test]
    fn pmf_uniform_limit_and_errors() {
        assert_eq!(gmm_log_pmf(2, 0.0, 1, 5).unwrap(), -(4.0f64).ln());
        assert!(gmm_log_pmf(4, 1.0, 1, 5).is_err());
        assert!(gmm_log_pmf(0, -1.0, 1, 5).is_err());
    }

    #[test]
    fn prior_mean_values() {
        let v = prior_inversion_mean(2.0f64.ln(), 3, 5).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        assert!(prior_inversion_mean(200.0, 0, 5).unwrap().abs() < 1e-80);
        assert!(prior_inversion_mean(0.0, 0, 5).is_err());
        // Decreasing in rho0.
        let a = prior_inversion_mean(0.5, 1, 6).unwrap();
        let b = prior_inversion_mean(1.5, 1, 6).unwrap();
        assert!(a > b && b > 0.0);
        // Inside [0, (K-k)/2] in 1-based terms, i.e. [0, (n-1)/2].
        assert!(a <= 4.0 / 2.0);
    }

    #[test]
    fn gmm0_is_flat_without_strength() {
        for rho in [0.1, 1.0, 7.0] {
            assert_eq!(gmm0_log_density(rho, 0.4, 0.0, 0, 4).unwrap(), 0.0);
        }
        assert!(gmm0_log_density(0.0, 0.4, 1.0, 0, 4).is_err());
    }

    #[test]
    fn gmm0_ratio_at_doubled_rho() {
        let (rho, v_mean, nu, n) = (0.7f64, 0.9, 3.0, 4usize);
        let psi = |r: f64| (1.0 - (-(n as f64) * r).exp()) / (1.0 - (-r).exp());
        let expected = -rho * v_mean * nu - nu * (psi(2.0 * rho).ln() - psi(rho).ln());
        let got = gmm0_log_density(2.0 * rho, v_mean, nu, 1, 5).unwrap()
            - gmm0_log_density(rho, v_mean, nu, 1, 5).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn sample_inversion_concentrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = Dispersion::constant(50.0, 6).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_inversion(&rho, &mut rng), InversionVector::zeros(6));
        }
    }

    #[test]
    fn posterior_parameters() {
        let prior = DispersionPrior::new(2.0, 10.0, 4).unwrap();
        let (v_mean, nu) = prior.posterior(0, 30, 90);
        assert_eq!(nu, 100.0);
        assert!((v_mean - (30.0 + prior.means()[0] * 10.0) / 100.0).abs() < 1e-15);
    }
}
