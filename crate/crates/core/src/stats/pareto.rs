use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::ccdf::CcdfCurve;
use crate::error::{Error, Result};

/// Fewest tail points a fit accepts.
pub const MIN_TAIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Maximum-likelihood (Hill) estimate above a fixed threshold.
    Hill,
    /// Least-squares slope of the log-log CCDF above the threshold.
    LoglogOls,
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hill" => Ok(FitMethod::Hill),
            "loglog-ols" => Ok(FitMethod::LoglogOls),
            other => Err(Error::Config(format!("unknown fit method {other:?}"))),
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMethod::Hill => "hill",
            FitMethod::LoglogOls => "loglog-ols",
        })
    }
}

/// Estimated Pareto index (CCDF tail exponent) above `xmin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoFit {
    pub xmin: f64,
    pub alpha: f64,
    pub stderr: f64,
    pub n_tail: usize,
    pub method: FitMethod,
}

/// Fits the tail of `values` strictly above `xmin`.
pub fn pareto_index(values: &[f64], xmin: f64, method: FitMethod) -> Result<ParetoFit> {
    if !(xmin > 0.0 && xmin.is_finite()) {
        return Err(Error::domain(format!("xmin {xmin} must be positive")));
    }
    let mut tail: Vec<f64> = values.iter().copied().filter(|&v| v > xmin).collect();
    let n = tail.len();
    if n < MIN_TAIL {
        return Err(Error::domain(format!("only {n} values above xmin {xmin}, need at least {MIN_TAIL}")));
    }
    if tail.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("tail contains a non-finite value"));
    }
    if tail.iter().all(|&v| v == tail[0]) {
        return Err(Error::DegenerateTail(n));
    }
    let (alpha, stderr) = match method {
        FitMethod::Hill => {
            let log_excess: f64 = tail.iter().map(|&v| (v / xmin).ln()).sum();
            let alpha = n as f64 / log_excess;
            (alpha, alpha / (n as f64).sqrt())
        }
        FitMethod::LoglogOls => {
            tail.sort_by(f64::total_cmp);
            let curve = CcdfCurve::from_sorted(&tail);
            let (x, y): (Vec<f64>, Vec<f64>) = curve.points.iter().map(|&(v, f)| (v.ln(), f.ln())).unzip();
            let (slope, _, stderr) = super::ols(&x, &y);
            (-slope, stderr)
        }
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("fitted tail index {alpha} is not positive")));
    }
    Ok(ParetoFit { xmin, alpha, stderr, n_tail: n, method })
}
