use crate::error::{Error, Result};

/// Typical-set bound `1 - m / (4 s eps^2)`, clamped below at 0.
pub fn theorem4_bound(m: usize, s: u64, epsilon: f64) -> Result<f64> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::UndefinedBound(epsilon));
    }
    if s == 0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    Ok((1.0 - m as f64 / (4.0 * s as f64 * epsilon * epsilon)).max(0.0))
}

/// `E(A) / s * u_star` from recorded stopping times.
pub fn wald_lower_bound(stopping_times: &[u64], s: u64, u_star: f64) -> Result<f64> {
    if stopping_times.is_empty() {
        return Err(Error::NoRuns);
    }
    if s == 0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    let mean = stopping_times.iter().map(|&a| a as f64).sum::<f64>() / stopping_times.len() as f64;
    Ok(mean / s as f64 * u_star)
}
