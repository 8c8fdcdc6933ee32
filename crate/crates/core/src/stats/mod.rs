//! Distributional and temporal statistics over ledgers.

mod ccdf;
mod daily;
mod pareto;
mod powerlaw;
mod spectrum;

pub use ccdf::{empirical_ccdf, CcdfCurve};
pub use daily::{daily_aggregate, DailyAccumulator, DailySeries, DayStats};
pub use pareto::{pareto_index, FitMethod, ParetoFit, MIN_TAIL};
pub use powerlaw::{powerlaw_correlation_fit, PowerLawFit};
pub use spectrum::{dft_magnitudes, unitary_dft, weekly_peak_score, SpectrumBin, MIN_SERIES_LEN, WEEKLY_THRESHOLD};

/// Ordinary least squares of `y` on `x`: (slope, intercept, slope standard error).
///
/// The caller guarantees at least two points and non-constant `x`.
pub(crate) fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - intercept - slope * a;
                e * e
            })
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}
