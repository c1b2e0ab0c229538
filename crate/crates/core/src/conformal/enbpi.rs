use super::ensemble::Ensemble;
use super::{check_alpha, empirical_quantile, PredictionInterval};
use crate::error::{Error, Result};
use crate::geodata::{Dataset, PlanarPoint};
use crate::kernel::StbkrParams;
use crate::seeding;

/// Bootstrap ensemble over the whole training set with one global radius:
/// the `(1 − α)` empirical quantile of the out-of-bag residuals. Intervals
/// are centred on the ensemble mean.
#[derive(Debug, Clone)]
pub struct EnbpiModel {
    ensemble: Ensemble,
    alpha: f64,
    omega: f64,
    skipped: usize,
}

impl EnbpiModel {
    pub fn fit(
        train: &Dataset,
        alpha: f64,
        bootstraps: usize,
        batch: usize,
        params: StbkrParams,
        seed: u64,
    ) -> Result<Self> {
        Self::fit_with_stream(train, alpha, bootstraps, batch, params, seeding::derive(seed, 0xE7B1))
    }

    /// Fits with `stream` as the bootstrap seed itself.
    pub(crate) fn fit_with_stream(
        train: &Dataset,
        alpha: f64,
        bootstraps: usize,
        batch: usize,
        params: StbkrParams,
        stream: u64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        params.validate()?;
        if bootstraps < 2 {
            return Err(Error::arg("B must be at least 2"));
        }
        if train.len() < params.k || batch < params.k {
            return Err(Error::arg(format!(
                "training size {} and batch size {batch} must both be at least k = {}",
                train.len(),
                params.k
            )));
        }
        let ensemble = Ensemble::fit(train, (0..train.len()).collect(), bootstraps, batch, params, stream)?;
        let residuals: Vec<f64> = (0..train.len())
            .filter_map(|pos| ensemble.oob_residual(train, pos))
            .collect();
        if residuals.is_empty() {
            return Err(Error::Calibration(
                "every training point appears in all bootstrap batches; increase B".into(),
            ));
        }
        let omega = empirical_quantile(&residuals, 1.0 - alpha)?;
        Ok(EnbpiModel {
            skipped: train.len() - residuals.len(),
            ensemble,
            alpha,
            omega,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Training points without an out-of-bag prediction.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn interval(&self, q: PlanarPoint) -> PredictionInterval {
        PredictionInterval::symmetric(self.ensemble.mean_prediction(q), self.omega, self.alpha)
    }
}

/// One-shot EnbPI interval at `q`.
pub fn enbpi_interval(
    train: &Dataset,
    q: PlanarPoint,
    alpha: f64,
    bootstraps: usize,
    batch: usize,
    params: StbkrParams,
    seed: u64,
) -> Result<PredictionInterval> {
    Ok(EnbpiModel::fit(train, alpha, bootstraps, batch, params, seed)?.interval(q))
}
