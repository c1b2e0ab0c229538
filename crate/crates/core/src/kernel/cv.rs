//! K-fold grid search over `(k, c)`.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{BandwidthScale, KernelModel, StbkrParams};
use crate::error::{Error, Result};
use crate::geodata::Dataset;
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k_grid: Vec<usize>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub scale: BandwidthScale,
    pub cutoff: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_grid: vec![5, 10, 20],
            c_grid: vec![0.001, 0.01, 0.1, 1.0],
            folds: 5,
            seed: 0,
            scale: BandwidthScale::SquaredRadius,
            cutoff: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvCell {
    pub k: usize,
    pub c: f64,
    /// Mean over folds of the held-out RMSE.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: StbkrParams,
    /// Every grid cell, ordered by `(k, c)`.
    pub cells: Vec<CvCell>,
}

/// Picks the `(k, c)` pair with the lowest mean held-out RMSE. Ties go to
/// the smaller `k`, then the smaller `c`.
///
/// Folds are contiguous blocks of a seeded shuffle, assigned once before any
/// grid cell is evaluated.
pub fn cross_validate(train: &Dataset, cfg: &CvConfig) -> Result<CvOutcome> {
    let mut ks = cfg.k_grid.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut cs = cfg.c_grid.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    if ks.is_empty() || cs.is_empty() {
        return Err(Error::arg("cross-validation grids must be non-empty"));
    }
    if ks[0] == 0 || cs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::arg("grid values must satisfy k >= 1 and c > 0"));
    }
    if cfg.folds < 2 {
        return Err(Error::arg("cross-validation needs at least 2 folds"));
    }
    let k_max = *ks.last().expect("non-empty");
    let n = train.len();
    if n < cfg.folds * k_max {
        return Err(Error::arg(format!(
            "{n} training points cannot support {} folds with k = {k_max}",
            cfg.folds
        )));
    }

    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(&mut seeding::rng(seeding::derive(cfg.seed, 0xC5)));
    let cells_per_fold: Vec<Vec<f64>> = (0..cfg.folds)
        .map(|f| {
            let lo = f * n / cfg.folds;
            let hi = (f + 1) * n / cfg.folds;
            let held: Vec<usize> = shuffled[lo..hi].to_vec();
            let mut fit_idx: Vec<usize> = shuffled[..lo].iter().chain(&shuffled[hi..]).copied().collect();
            fit_idx.sort_unstable();
            fold_errors(train, &fit_idx, &held, &ks, &cs, cfg.scale, cfg.cutoff)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(ks.len() * cs.len());
    for (ki, &k) in ks.iter().enumerate() {
        for (ci, &c) in cs.iter().enumerate() {
            let g = ki * cs.len() + ci;
            let error = cells_per_fold.iter().map(|f| f[g]).sum::<f64>() / cfg.folds as f64;
            cells.push(CvCell { k, c, error });
        }
    }
    let best = cells
        .iter()
        .fold(None::<&CvCell>, |best, cell| match best {
            Some(b) if b.error <= cell.error => Some(b),
            _ => Some(cell),
        })
        .expect("non-empty grid");
    Ok(CvOutcome {
        best: StbkrParams {
            k: best.k,
            c: best.c,
            scale: cfg.scale,
            cutoff: cfg.cutoff,
        },
        cells,
    })
}

/// RMSE on the held-out rows for every grid cell, in `(k, c)` order.
fn fold_errors(
    ds: &Dataset,
    fit_idx: &[usize],
    held: &[usize],
    ks: &[usize],
    cs: &[f64],
    scale: BandwidthScale,
    cutoff: bool,
) -> Result<Vec<f64>> {
    let fit = ds.subset(fit_idx);
    let k_max = *ks.last().expect("non-empty");
    let model = KernelModel::fit(&fit, StbkrParams { k: k_max, c: 1.0, scale, cutoff })?;
    let sq_err: Vec<Vec<f64>> = held
        .par_iter()
        .map(|&i| {
            let m = ds.get(i);
            let nn = fit.index().knn(m.planar.to_array(), k_max);
            let mut out = Vec::with_capacity(ks.len() * cs.len());
            for &k in ks {
                let radius = nn[k - 1].distance;
                for &c in cs {
                    let h = StbkrParams { k, c, scale, cutoff }
                        .raw_bandwidth(radius)
                        .max(model.bandwidth_floor());
                    let pred = model.kr_predict(m.planar, h).expect("positive bandwidth").value;
                    out.push((pred - m.score).powi(2));
                }
            }
            out
        })
        .collect();
    let g = ks.len() * cs.len();
    Ok((0..g)
        .map(|j| (sq_err.iter().map(|row| row[j]).sum::<f64>() / held.len() as f64).sqrt())
        .collect())
}
