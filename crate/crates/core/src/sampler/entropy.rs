use super::SamplerError;

/// Entropy in nats of a word's empirical type distribution.
pub fn word_entropy(nv0: u32, nv1: u32) -> Result<f64, SamplerError> {
    let total = f64::from(nv0) + f64::from(nv1);
    if total == 0.0 {
        return Err(SamplerError::EmptyWord);
    }
    let term = |n: u32| {
        if n == 0 {
            0.0
        } else {
            let p = f64::from(n) / total;
            -p * p.ln()
        }
    };
    Ok(term(nv0) + term(nv1))
}
