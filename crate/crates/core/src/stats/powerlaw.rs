use serde::Serialize;

use crate::error::{Error, Result};

/// `y ≈ exp(intercept) * x^exponent`, fitted in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub n_points: usize,
}

pub fn powerlaw_correlation_fit(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return Err(Error::domain(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::domain("power-law fit needs at least 3 points"));
    }
    if let Some(bad) = x.iter().chain(y).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::domain(format!("power-law fit input {bad} is not positive")));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::domain("all x values are equal"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (exponent, intercept, stderr) = super::ols(&lx, &ly);
    Ok(PowerLawFit { exponent, intercept, stderr, n_points: x.len() })
}
