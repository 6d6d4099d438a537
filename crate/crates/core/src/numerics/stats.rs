use alloc::format;

use super::linalg::{dot, norm};
use crate::{Error, Result};

const ZERO_NORM: f64 = 1e-12;

/// `a . b / (|a| |b|)`, defined as 0 when either norm is below 1e-12.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "cosine similarity of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("cosine similarity of empty vectors"));
    }
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Ok(0.0);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("mean of an empty list"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean squared deviation from the mean (divides by the count).
pub fn population_variance(values: &[f64]) -> Result<f64> {
    let m = mean(values).map_err(|_| Error::invalid("variance of an empty list"))?;
    Ok(values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64)
}
