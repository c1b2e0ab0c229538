//! Prediction intervals around the self-tuning kernel regressor.
//!
//! Three constructions are provided:
//!
//! * [`split_cp`] / [`SplitConformal`]: classic split conformal prediction
//!   with a hold-out calibration set and a single global radius.
//! * [`EscpPredictor`]: ensemble spatial conformal prediction. For each query
//!   the K nearest training points form a local neighbourhood, B bootstrap
//!   regressors are fitted on resampled batches of that neighbourhood, and
//!   leave-one-out residuals of the neighbours calibrate the radius, either
//!   by their empirical quantile or by a quantile regression forest trained
//!   on spatially arranged residuals.
//! * [`EnbpiModel`]: the same bootstrap/leave-one-out machinery over the whole
//!   training set, i.e. the non-spatial ablation.

mod enbpi;
mod ensemble;
mod escp;
mod qrf;
mod residuals;
mod split;

pub use enbpi::{enbpi_interval, EnbpiModel};
pub use ensemble::BootstrapPlan;
pub use escp::{escp_interval, EscpPredictor, EscpTrace, QueryFeatures};
pub use qrf::{qrf_fit, QrfConfig, QrfModel};
pub use residuals::{build_residual_features, qrf_calibrate, ResidualField};
pub use split::{conformal_rank, fit_split_cp, split_cp, SplitConformal};

use crate::error::{Error, Result};

/// `[center − ω, center + ω]` at miscoverage level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl PredictionInterval {
    /// Symmetric interval; `omega` may be `+∞`.
    pub fn symmetric(center: f64, omega: f64, alpha: f64) -> Self {
        debug_assert!(omega >= 0.0);
        let omega = omega.max(0.0);
        PredictionInterval {
            center,
            lower: center - omega,
            upper: center + omega,
            alpha,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Absolute residuals `|y − ŷ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet(Vec<f64>);

impl ResidualSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::arg(format!("residuals must be finite and non-negative, got {bad}")));
        }
        Ok(ResidualSet(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How ESCP turns neighbourhood residuals into an interval radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileMode {
    /// Order statistic of the neighbours' leave-one-out residuals.
    Empirical,
    /// Conditional quantile from a quantile regression forest.
    #[default]
    Qrf,
}

impl QuantileMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(QuantileMode::Empirical),
            "qrf" => Ok(QuantileMode::Qrf),
            _ => Err(Error::arg(format!("unknown quantile mode {s:?} (expected empirical|qrf)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantileMode::Empirical => "empirical",
            QuantileMode::Qrf => "qrf",
        }
    }
}

/// Where the ESCP interval is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointPredictor {
    /// Regressor fitted on the whole neighbourhood.
    #[default]
    FullNeighborhood,
    /// Mean of the bootstrap regressors.
    EnsembleMean,
}

impl PointPredictor {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full_neighborhood" => Ok(PointPredictor::FullNeighborhood),
            "ensemble_mean" => Ok(PointPredictor::EnsembleMean),
            _ => Err(Error::arg(format!(
                "unknown point predictor {s:?} (expected full_neighborhood|ensemble_mean)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PointPredictor::FullNeighborhood => "full_neighborhood",
            PointPredictor::EnsembleMean => "ensemble_mean",
        }
    }
}

/// Quantile-forest knobs used by ESCP in [`QuantileMode::Qrf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrfSettings {
    pub trees: usize,
    pub min_leaf: usize,
    /// Number of training points around the query used to fit the forest.
    /// `None` means `min(10·K, n)`.
    pub training_radius: Option<usize>,
}

impl Default for QrfSettings {
    fn default() -> Self {
        QrfSettings {
            trees: 100,
            min_leaf: 5,
            training_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscpConfig {
    pub alpha: f64,
    /// B, number of bootstrap regressors.
    pub bootstraps: usize,
    /// K, neighbourhood size.
    pub neighborhood: usize,
    /// s, points drawn (with replacement) per bootstrap batch.
    pub batch: usize,
    pub quantile_mode: QuantileMode,
    pub point_predictor: PointPredictor,
    pub seed: u64,
    pub qrf: QrfSettings,
}

impl EscpConfig {
    /// `alpha = 0.2`, `B = 50`, `s = 100`, QRF calibration, centre from the
    /// full neighbourhood.
    pub fn new(neighborhood: usize) -> Self {
        EscpConfig {
            alpha: 0.2,
            bootstraps: 50,
            neighborhood,
            batch: 100,
            quantile_mode: QuantileMode::Qrf,
            point_predictor: PointPredictor::FullNeighborhood,
            seed: 0,
            qrf: QrfSettings::default(),
        }
    }

    pub fn validate(&self, train_len: usize, k: usize) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.bootstraps < 2 {
            return Err(Error::arg("B must be at least 2"));
        }
        if self.neighborhood < 2 {
            return Err(Error::arg("K must be at least 2"));
        }
        if self.neighborhood > train_len {
            return Err(Error::arg(format!(
                "K = {} exceeds training size {train_len}",
                self.neighborhood
            )));
        }
        if self.neighborhood < k {
            return Err(Error::arg(format!(
                "K = {} is smaller than the regressor's k = {k}",
                self.neighborhood
            )));
        }
        if self.batch < k.max(1) {
            return Err(Error::arg(format!(
                "batch size s = {} must be at least the regressor's k = {k}",
                self.batch
            )));
        }
        if self.qrf.trees == 0 || self.qrf.min_leaf == 0 {
            return Err(Error::arg("forest needs at least one tree and min_leaf >= 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Smallest integer `m` with `m ≥ x`, tolerant of round-off in `x` when `x`
/// is mathematically an integer (e.g. `0.7 · 10`).
pub(crate) fn ceil_rank(x: f64) -> usize {
    (x - x.abs() * 1e-12 - 1e-12).ceil().max(0.0) as usize
}

/// Lowest value whose empirical CDF reaches `tau`: the `⌈τ·n⌉`-th smallest.
pub fn empirical_quantile(values: &[f64], tau: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::arg("quantile of an empty set"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::arg(format!("quantile level must lie in (0, 1], got {tau}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ceil_rank(tau * sorted.len() as f64).clamp(1, sorted.len());
    Ok(sorted[m - 1])
}
