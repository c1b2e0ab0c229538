use crate::conformal::PredictionInterval;
use crate::error::{Error, Result};

/// Coverage and width summary of one method on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub coverage: f64,
    /// Mean over finite-width intervals; `NaN` when none is finite.
    pub mean_width: f64,
    pub median_width: f64,
    pub n_test: usize,
    pub infinite_width_count: usize,
}

impl EvalReport {
    pub fn from_intervals(method: impl Into<String>, intervals: &[PredictionInterval], truths: &[f64]) -> Result<Self> {
        let coverage = coverage(intervals, truths)?;
        let finite = finite_widths(intervals);
        Ok(EvalReport {
            method: method.into(),
            coverage,
            mean_width: mean(&finite),
            median_width: median(finite.clone()),
            n_test: intervals.len(),
            infinite_width_count: intervals.len() - finite.len(),
        })
    }
}

/// Fraction of closed intervals containing their truth.
pub fn coverage(intervals: &[PredictionInterval], truths: &[f64]) -> Result<f64> {
    if intervals.len() != truths.len() {
        return Err(Error::arg(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if intervals.is_empty() {
        return Err(Error::arg("coverage of an empty test set"));
    }
    let hit = intervals.iter().zip(truths).filter(|(iv, &y)| iv.contains(y)).count();
    Ok(hit as f64 / intervals.len() as f64)
}

fn finite_widths(intervals: &[PredictionInterval]) -> Vec<f64> {
    intervals.iter().map(PredictionInterval::width).filter(|w| w.is_finite()).collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Mean width over finite intervals (`NaN` if none is finite).
pub fn mean_width(intervals: &[PredictionInterval]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::arg("mean width of an empty interval set"));
    }
    Ok(mean(&finite_widths(intervals)))
}

pub fn infinite_width_count(intervals: &[PredictionInterval]) -> usize {
    intervals.iter().filter(|iv| !iv.width().is_finite()).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(c: f64, w: f64) -> PredictionInterval {
        PredictionInterval::symmetric(c, w / 2.0, 0.2)
    }

    #[test]
    fn coverage_counts_closed_hits() {
        let ivs: Vec<_> = (0..10).map(|i| iv(i as f64, 2.0)).collect();
        let mut truths: Vec<f64> = (0..10).map(|i| i as f64).collect();
        truths[3] += 5.0;
        truths[7] -= 1.5;
        truths[0] += 1.0;
        assert_eq!(coverage(&ivs, &truths).unwrap(), 0.8);
        assert!(coverage(&ivs, &truths[..9]).is_err());
        assert_eq!(coverage(&[iv(0.0, 1e300)], &[1e6]).unwrap(), 1.0);
    }

    #[test]
    fn widths_exclude_infinite() {
        assert_eq!(mean_width(&[iv(0.0, 2.0), iv(1.0, 4.0)]).unwrap(), 3.0);
        let mixed = [iv(0.0, 2.0), PredictionInterval::symmetric(0.0, f64::INFINITY, 0.2)];
        assert_eq!(mean_width(&mixed).unwrap(), 2.0);
        assert_eq!(infinite_width_count(&mixed), 1);
        let r = EvalReport::from_intervals("m", &mixed, &[0.0, 1e9]).unwrap();
        assert_eq!((r.coverage, r.mean_width, r.median_width, r.infinite_width_count), (1.0, 2.0, 2.0, 1));
        assert!(mean_width(&[]).is_err());
    }

    #[test]
    fn hundred_widths_match_direct_sum() {
        let ivs: Vec<_> = (0..100).map(|i| iv(0.0, (i as f64 * 0.37).sin().abs() * 10.0)).collect();
        let direct: f64 = (0..100).map(|i| (i as f64 * 0.37).sin().abs() * 10.0).sum::<f64>() / 100.0;
        assert!((mean_width(&ivs).unwrap() - direct).abs() < 1e-12);
        let r = EvalReport::from_intervals("m", &ivs, &[0.0; 100]).unwrap();
        assert_eq!(r, EvalReport::from_intervals("m", &ivs, &[0.0; 100]).unwrap());
    }

    proptest! {
        #[test]
        fn coverage_bounded_and_monotone(
            rows in prop::collection::vec((-10.0f64..10.0, 0.0f64..5.0, -10.0f64..10.0), 1..100),
        ) {
            let ivs: Vec<_> = rows.iter().map(|r| iv(r.0, r.1)).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let c = coverage(&ivs, &ys).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            let mut ivs2 = ivs.clone();
            ivs2.push(iv(0.0, 1.0));
            let mut ys2 = ys.clone();
            ys2.push(0.0);
            let c2 = coverage(&ivs2, &ys2).unwrap();
            prop_assert!(c2 >= c);
            prop_assert!(c2 * ivs2.len() as f64 >= c * ivs.len() as f64 + 1.0 - 1e-9);
        }
    }
}
