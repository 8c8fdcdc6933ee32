use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest series accepted, two full weeks.
pub const MIN_SERIES_LEN: usize = 14;

/// Weekly peak score above which a weekly cycle is reported.
pub const WEEKLY_THRESHOLD: f64 = 3.0;

/// Relative floor on the background median, for series with an exactly empty background.
const MEDIAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumBin {
    /// Frequency index, cycles per series length.
    pub k: usize,
    /// `len / k`, in samples (days for daily series).
    pub period: f64,
    pub magnitude: f64,
}

/// DFT scaled by `1/sqrt(N)`, so that squared magnitudes sum to the squared series.
pub fn unitary_dft(series: &[f64]) -> Vec<Complex64> {
    let n = series.len();
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if n == 0 {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Magnitudes of the mean-removed series for `k = 1 ..= len/2`.
pub fn dft_magnitudes(series: &[f64]) -> Result<Vec<SpectrumBin>> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::domain(format!("series of length {n} is shorter than {MIN_SERIES_LEN}")));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("series contains a non-finite value"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let spectrum = unitary_dft(&centered);
    Ok((1..=n / 2).map(|k| SpectrumBin { k, period: n as f64 / k as f64, magnitude: spectrum[k].norm() }).collect())
}

/// Magnitude at the bin closest to a 7-sample period over the median magnitude.
pub fn weekly_peak_score(series: &[f64]) -> Result<f64> {
    let bins = dft_magnitudes(series)?;
    let weekly = bins
        .iter()
        .min_by(|a, b| (a.period - 7.0).abs().total_cmp(&(b.period - 7.0).abs()))
        .expect("at least seven bins");
    let mut mags: Vec<f64> = bins.iter().map(|b| b.magnitude).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    mags.sort_by(f64::total_cmp);
    let mid = mags.len() / 2;
    let median = if mags.len().is_multiple_of(2) { (mags[mid - 1] + mags[mid]) / 2.0 } else { mags[mid] };
    Ok(weekly.magnitude / median.max(MEDIAN_FLOOR * max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    // Direct O(N^2) transform, independent of the FFT path.
    fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                    let w = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    (re + v * w.cos(), im + v * w.sin())
                })
            })
            .map(|(re, im)| (re / (n as f64).sqrt(), im / (n as f64).sqrt()))
            .collect()
    }

    #[test]
    fn matches_naive_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..91).map(|_| rng.random::<f64>() * 10.0).collect();
        let fast = unitary_dft(&x);
        for (a, (re, im)) in fast.iter().zip(naive_dft(&x)) {
            assert!((a.re - re).abs() < 1e-9 && (a.im - im).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [14, 100, 364, 365, 1000] {
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 1e4 + 50.0).collect();
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let spectral: f64 = unitary_dft(&x).iter().map(|c| c.norm_sqr()).sum();
            assert!((energy - spectral).abs() <= 1e-9 * energy);
        }
    }

    #[test]
    fn single_tone_period_seven() {
        let x: Vec<f64> = (0..364).map(|t| 100.0 + 20.0 * (2.0 * PI * t as f64 / 7.0).sin()).collect();
        let bins = dft_magnitudes(&x).unwrap();
        let peak = bins.iter().max_by(|a, b| a.magnitude.total_cmp(&b.magnitude)).unwrap();
        assert_eq!(peak.k, 52);
        assert_eq!(peak.period, 7.0);
        for b in bins.iter().filter(|b| b.k != 52) {
            assert!(b.magnitude < 1e-9 * peak.magnitude, "{b:?}");
        }
        assert!(weekly_peak_score(&x).unwrap() > 1e6);
    }

    #[test]
    fn constant_series_is_flat() {
        let bins = dft_magnitudes(&[4.0; 30]).unwrap();
        assert_eq!(bins.len(), 15);
        assert!(bins.iter().all(|b| b.magnitude < 1e-12));
        assert_eq!(weekly_peak_score(&[4.0; 30]).unwrap(), 0.0);
        assert!(dft_magnitudes(&[1.0; 13]).is_err());
        assert!(weekly_peak_score(&[1.0; 13]).is_err());
    }

    #[test]
    fn white_noise_stays_below_threshold() {
        // 95th percentile over Monte Carlo seeds
        let mut scores: Vec<f64> = (0..200u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x: Vec<f64> = (0..364).map(|_| rng.random::<f64>()).collect();
                weekly_peak_score(&x).unwrap()
            })
            .collect();
        scores.sort_by(f64::total_cmp);
        let median = scores[100];
        assert!(median > 0.5 && median < 1.6, "{median}");
        assert!(scores[190] < WEEKLY_THRESHOLD, "{}", scores[190]);
    }
}
