use serde::Serialize;

use crate::error::{Error, Result};

/// Complementary CDF: for each distinct value `v`, the fraction of the sample `>= v`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CcdfCurve {
    pub points: Vec<(f64, f64)>,
    pub sample_size: usize,
}

impl CcdfCurve {
    /// CCDF of an already sorted (ascending) sample.
    pub(crate) fn from_sorted(sorted: &[f64]) -> Self {
        let n = sorted.len();
        let mut points = Vec::new();
        let mut i = 0;
        while i < n {
            let v = sorted[i];
            points.push((v, (n - i) as f64 / n as f64));
            while i < n && sorted[i] == v {
                i += 1;
            }
        }
        CcdfCurve { points, sample_size: n }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["value", "fraction"])?;
        for (v, f) in &self.points {
            w.write_record([v.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn empirical_ccdf(values: &[f64]) -> Result<CcdfCurve> {
    if values.is_empty() {
        return Err(Error::domain("CCDF of an empty sample"));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::domain(format!("CCDF sample value {bad} is not positive")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CcdfCurve::from_sorted(&sorted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_counting() {
        let c = empirical_ccdf(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(c.points, vec![(1.0, 1.0), (2.0, 0.75), (3.0, 0.5), (4.0, 0.25)]);
        assert_eq!(empirical_ccdf(&[7.5]).unwrap().points, vec![(7.5, 1.0)]);
        let ties = empirical_ccdf(&[2.0, 2.0, 5.0]).unwrap();
        assert_eq!(ties.points, vec![(2.0, 1.0), (5.0, 1.0 / 3.0)]);
    }

    #[test]
    fn rejects_empty_and_non_positive() {
        assert!(empirical_ccdf(&[]).is_err());
        assert!(empirical_ccdf(&[1.0, 0.0]).is_err());
        assert!(empirical_ccdf(&[f64::NAN]).is_err());
    }

    #[test]
    fn pareto_sample_has_unit_slope() {
        // inverse-transform Pareto(1) on a deterministic uniform grid
        let n = 100_000;
        let values: Vec<f64> = (0..n).map(|i| 1.0 / ((i as f64 + 0.5) / n as f64)).collect();
        let c = empirical_ccdf(&values).unwrap();
        for &(v, f) in c.points.iter().step_by(997) {
            if v > 2.0 && f * n as f64 > 50.0 {
                let slope = f.ln() / v.ln();
                assert!((slope + 1.0).abs() < 0.05, "v={v} f={f} slope={slope}");
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_and_permutation_invariant(mut values in prop::collection::vec(1u32..50, 1..80)) {
            let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let c = empirical_ccdf(&xs).unwrap();
            prop_assert_eq!(c.points[0].1, 1.0);
            for w in c.points.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 > w[1].1 && w[1].1 > 0.0);
            }
            values.reverse();
            let ys: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            prop_assert_eq!(empirical_ccdf(&ys).unwrap(), c);
        }
    }
}
