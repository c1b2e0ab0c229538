//! Spatially arranged residuals for quantile-forest calibration.
//!
//! Every training point gets a leave-one-out residual from the regressor fitted
//! on the whole training set. A point's feature vector is the residuals of its
//! K nearest training neighbours, nearest first; its target is its own
//! residual.

use std::sync::OnceLock;

use super::qrf::{qrf_fit, QrfConfig, QrfModel};
use super::EscpConfig;
use crate::error::{Error, Result};
use crate::geodata::{Dataset, PlanarPoint};
use crate::kernel::{KernelModel, StbkrParams};
use crate::seeding;

/// Pairs an ordered neighbour residual vector with a point's own residual.
pub fn build_residual_features(
    neighbor_residuals: &[f64],
    own_residual: f64,
    neighborhood: usize,
) -> Result<(Vec<f64>, f64)> {
    if neighbor_residuals.len() != neighborhood {
        return Err(Error::arg(format!(
            "expected {neighborhood} neighbour residuals, got {}",
            neighbor_residuals.len()
        )));
    }
    Ok((neighbor_residuals.to_vec(), own_residual))
}

/// Leave-one-out residuals of a training set plus lazily built per-point
/// neighbour features.
#[derive(Debug)]
pub struct ResidualField<'a> {
    train: &'a Dataset,
    neighborhood: usize,
    residuals: Vec<f64>,
    rows: Vec<OnceLock<Vec<f64>>>,
}

impl<'a> ResidualField<'a> {
    pub fn new(train: &'a Dataset, params: StbkrParams, neighborhood: usize) -> Result<Self> {
        let n = train.len();
        if neighborhood == 0 || neighborhood >= n {
            return Err(Error::arg(format!(
                "residual features need 1 <= K < training size, got K = {neighborhood}, n = {n}"
            )));
        }
        let model = KernelModel::fit(train, params)?;
        let residuals = (0..n)
            .map(|i| Ok((train.get(i).score - model.predict_loo(i)?.value).abs()))
            .collect::<Result<_>>()?;
        Ok(ResidualField {
            train,
            neighborhood,
            residuals,
            rows: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn neighborhood(&self) -> usize {
        self.neighborhood
    }

    /// Residuals of training point `i`'s K nearest other training points.
    pub fn row_features(&self, i: usize) -> &[f64] {
        self.rows[i].get_or_init(|| {
            let p = self.train.get(i).planar.to_array();
            self.train
                .index()
                .knn(p, self.neighborhood + 1)
                .into_iter()
                .filter(|nb| nb.index != i)
                .take(self.neighborhood)
                .map(|nb| self.residuals[nb.index])
                .collect()
        })
    }

    /// Residuals of the K nearest training points to `q`.
    pub fn query_features(&self, q: PlanarPoint) -> Vec<f64> {
        self.train
            .index()
            .knn(q.to_array(), self.neighborhood)
            .into_iter()
            .map(|nb| self.residuals[nb.index])
            .collect()
    }

    /// Quantile forest over the given training rows.
    pub fn forest(&self, rows: &[usize], cfg: &QrfConfig) -> Result<QrfModel> {
        let mut x = Vec::with_capacity(rows.len());
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            let (f, t) = build_residual_features(self.row_features(i), self.residuals[i], self.neighborhood)?;
            x.push(f);
            y.push(t);
        }
        qrf_fit(&x, &y, cfg)
    }

    /// Training rows for a forest local to `q`, sorted by index.
    pub(crate) fn local_rows(&self, q: PlanarPoint, training_radius: usize) -> Result<Vec<usize>> {
        let n = self.train.len();
        if training_radius < self.neighborhood + 1 || training_radius > n {
            return Err(Error::arg(format!(
                "forest training neighbourhood must lie in [K + 1, n] = [{}, {n}], got {training_radius}",
                self.neighborhood + 1
            )));
        }
        let mut rows: Vec<usize> = if training_radius == n {
            (0..n).collect()
        } else {
            self.train
                .index()
                .knn(q.to_array(), training_radius)
                .into_iter()
                .map(|nb| nb.index)
                .collect()
        };
        rows.sort_unstable();
        Ok(rows)
    }
}

pub(crate) fn default_training_radius(cfg: &EscpConfig, n: usize) -> usize {
    cfg.qrf.training_radius.unwrap_or(10 * cfg.neighborhood).min(n)
}

pub(crate) fn forest_config(cfg: &EscpConfig) -> QrfConfig {
    QrfConfig {
        trees: cfg.qrf.trees,
        min_leaf: cfg.qrf.min_leaf,
        max_features: None,
        seed: seeding::derive(cfg.seed, 0x0F0E),
    }
}

/// `(1 − α)`-quantile of the residual at `q` predicted by a quantile forest
/// fitted on the `training_radius` training points nearest to `q`.
pub fn qrf_calibrate(
    train: &Dataset,
    q: PlanarPoint,
    cfg: &EscpConfig,
    params: StbkrParams,
    training_radius: usize,
) -> Result<f64> {
    cfg.validate(train.len(), params.k)?;
    let field = ResidualField::new(train, params, cfg.neighborhood)?;
    let rows = field.local_rows(q, training_radius)?;
    let forest = field.forest(&rows, &forest_config(cfg))?;
    forest.quantile(&field.query_features(q), 1.0 - cfg.alpha)
}
