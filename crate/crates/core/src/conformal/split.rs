use super::{ceil_rank, check_alpha, PredictionInterval, ResidualSet};
use crate::error::{Error, Result};
use crate::geodata::{split_indices, Dataset, PlanarPoint};
use crate::kernel::{KernelModel, StbkrParams};
use crate::seeding;

/// `⌈(1−α)(n+1)⌉`: the rank of the conformal radius among the `n`
/// calibration residuals with `+∞` appended. A rank above `n` selects `+∞`.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    ceil_rank((1.0 - alpha) * (n + 1) as f64).max(1)
}

impl ResidualSet {
    /// Split-conformal radius at level `alpha`, possibly `+∞`.
    pub fn conformal_radius(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if self.is_empty() {
            return Err(Error::arg("split conformal needs at least one residual"));
        }
        let rank = conformal_rank(self.len(), alpha);
        if rank > self.len() {
            return Ok(f64::INFINITY);
        }
        let mut sorted = self.values().to_vec();
        sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
        Ok(sorted[rank - 1])
    }
}

/// `ŷ ± ω` with ω the conformal radius of `residuals`.
pub fn split_cp(residuals: &ResidualSet, alpha: f64, yhat: f64) -> Result<PredictionInterval> {
    let omega = residuals.conformal_radius(alpha)?;
    Ok(PredictionInterval::symmetric(yhat, omega, alpha))
}

/// Fits the regressor on a random proper-training part and returns absolute
/// residuals on the remaining `round(holdout_frac · n)` points.
pub fn fit_split_cp(
    train: &Dataset,
    holdout_frac: f64,
    params: StbkrParams,
    seed: u64,
) -> Result<(KernelModel, ResidualSet)> {
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::arg(format!("hold-out fraction must lie in (0, 1), got {holdout_frac}")));
    }
    let n = train.len();
    let n_hold = (holdout_frac * n as f64).round() as usize;
    let n_fit = n - n_hold;
    if n_hold == 0 || n_fit < params.k {
        return Err(Error::arg(format!(
            "{n} points cannot be split into a hold-out of {n_hold} and a fitting set of at least k = {}",
            params.k
        )));
    }
    let (hold_idx, fit_idx) = split_indices(n, n_hold, seeding::derive(seed, 0x5C));
    let model = KernelModel::fit(&train.subset(&fit_idx), params)?;
    let residuals = hold_idx
        .iter()
        .map(|&i| {
            let m = train.get(i);
            (m.score - model.predict(m.planar)).abs()
        })
        .collect();
    Ok((model, ResidualSet::new(residuals)?))
}

/// A fitted split-conformal predictor.
#[derive(Debug, Clone)]
pub struct SplitConformal {
    model: KernelModel,
    residuals: ResidualSet,
    alpha: f64,
    omega: f64,
}

impl SplitConformal {
    pub fn fit(train: &Dataset, holdout_frac: f64, params: StbkrParams, alpha: f64, seed: u64) -> Result<Self> {
        let (model, residuals) = fit_split_cp(train, holdout_frac, params, seed)?;
        let omega = residuals.conformal_radius(alpha)?;
        Ok(SplitConformal {
            model,
            residuals,
            alpha,
            omega,
        })
    }

    pub fn model(&self) -> &KernelModel {
        &self.model
    }

    pub fn residuals(&self) -> &ResidualSet {
        &self.residuals
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn interval(&self, q: PlanarPoint) -> PredictionInterval {
        PredictionInterval::symmetric(self.model.predict(q), self.omega, self.alpha)
    }
}
