//! Local outlier filter: a point is dropped when its score is more than
//! `sigma` standard deviations away from the mean score of its nearest
//! neighbours.

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OutlierReport {
    pub kept: Dataset,
    /// Positional indices (into the input dataset) of removed points, ascending.
    pub removed: Vec<usize>,
}

/// Per-point outlier flags, all computed against the input dataset.
///
/// Neighbourhoods exclude the point itself and use the sample (n−1)
/// standard deviation. With zero spread a point is flagged iff its score
/// differs from the neighbourhood mean at all.
pub fn outlier_flags(ds: &Dataset, neighbors: usize, sigma: f64) -> Result<Vec<bool>> {
    if neighbors < 2 {
        return Err(Error::arg("outlier neighbourhood needs at least 2 points"));
    }
    if ds.len() <= neighbors {
        return Err(Error::arg(format!(
            "outlier filter needs more than {neighbors} points, dataset has {}",
            ds.len()
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::arg(format!("sigma must be a non-negative number, got {sigma}")));
    }
    let flags = (0..ds.len())
        .map(|i| {
            let m = ds.get(i);
            let scores: Vec<f64> = ds
                .index()
                .knn(m.planar.to_array(), neighbors + 1)
                .into_iter()
                .filter(|nb| nb.index != i)
                .take(neighbors)
                .map(|nb| ds.get(nb.index).score)
                .collect();
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (m.score - mean).abs() > sigma * var.sqrt()
        })
        .collect();
    Ok(flags)
}

/// Single-pass filter: flags are computed once, then removed together.
pub fn remove_outliers(ds: &Dataset, neighbors: usize, sigma: f64) -> Result<OutlierReport> {
    let flags = outlier_flags(ds, neighbors, sigma)?;
    let (removed, kept): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| flags[i]);
    Ok(OutlierReport {
        kept: ds.subset(&kept),
        removed,
    })
}
