use super::metrics::EvalReport;
use crate::conformal::{
    EnbpiModel, EscpConfig, EscpPredictor, PointPredictor, PredictionInterval, QrfSettings, QuantileMode,
    SplitConformal,
};
use crate::error::{Error, Result};
use crate::geodata::{Dataset, PlanarPoint};
use crate::kernel::StbkrParams;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Split,
    Enbpi,
    Escp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Split, Method::Enbpi, Method::Escp];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(Method::Split),
            "enbpi" => Ok(Method::Enbpi),
            "escp" => Ok(Method::Escp),
            _ => Err(Error::arg(format!("unknown method {s:?} (expected split|enbpi|escp)"))),
        }
    }

    /// Comma-separated method list, e.g. `split,escp`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let methods: Vec<Method> = s.split(',').map(|m| Method::parse(m.trim())).collect::<Result<_>>()?;
        if methods.is_empty() {
            return Err(Error::arg("empty method list"));
        }
        Ok(methods)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Split => "split",
            Method::Enbpi => "enbpi",
            Method::Escp => "escp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Split => "split CP",
            Method::Enbpi => "EnbPI",
            Method::Escp => "ESCP",
        }
    }
}

/// Shared settings for every interval method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub alpha: f64,
    pub params: StbkrParams,
    pub holdout_frac: f64,
    pub bootstraps: usize,
    pub batch: usize,
    /// ESCP neighbourhood size; `None` uses [`default_neighborhood`].
    pub neighborhood: Option<usize>,
    pub quantile_mode: QuantileMode,
    pub point_predictor: PointPredictor,
    pub qrf: QrfSettings,
    pub seed: u64,
}

impl MethodConfig {
    pub fn new(params: StbkrParams) -> Self {
        MethodConfig {
            alpha: 0.2,
            params,
            holdout_frac: 0.5,
            bootstraps: 50,
            batch: 100,
            neighborhood: None,
            quantile_mode: QuantileMode::Qrf,
            point_predictor: PointPredictor::FullNeighborhood,
            qrf: QrfSettings::default(),
            seed: 0,
        }
    }

    pub fn escp_config(&self, n_train: usize) -> EscpConfig {
        EscpConfig {
            alpha: self.alpha,
            bootstraps: self.bootstraps,
            neighborhood: self
                .neighborhood
                .unwrap_or_else(|| default_neighborhood(n_train, self.params.k)),
            batch: self.batch,
            quantile_mode: self.quantile_mode,
            point_predictor: self.point_predictor,
            seed: seeding::derive(self.seed, 3),
            qrf: self.qrf,
        }
    }
}

/// `min(500, ⌈n/10⌉)`, raised to at least `max(k, 2)` and capped at `n - 1`.
pub fn default_neighborhood(n_train: usize, k: usize) -> usize {
    n_train.div_ceil(10).min(500).max(k).max(2).min(n_train.saturating_sub(1).max(1))
}

/// Intervals of `method` fitted on `train` at every query.
pub fn method_intervals(
    train: &Dataset,
    queries: &[PlanarPoint],
    method: Method,
    cfg: &MethodConfig,
) -> Result<Vec<PredictionInterval>> {
    match method {
        Method::Split => {
            let sc = SplitConformal::fit(train, cfg.holdout_frac, cfg.params, cfg.alpha, seeding::derive(cfg.seed, 1))?;
            Ok(queries.iter().map(|&q| sc.interval(q)).collect())
        }
        Method::Enbpi => {
            let m = EnbpiModel::fit(
                train,
                cfg.alpha,
                cfg.bootstraps,
                cfg.batch,
                cfg.params,
                seeding::derive(cfg.seed, 2),
            )?;
            Ok(queries.iter().map(|&q| m.interval(q)).collect())
        }
        Method::Escp => EscpPredictor::new(train, cfg.escp_config(train.len()), cfg.params)?.intervals(queries),
    }
}

/// One report per method, all fitted on `train` and scored on `test`.
pub fn compare_methods(train: &Dataset, test: &Dataset, methods: &[Method], cfg: &MethodConfig) -> Result<Vec<EvalReport>> {
    if test.is_empty() {
        return Err(Error::arg("empty test set"));
    }
    let queries = test.planar();
    let truths = test.scores();
    methods
        .iter()
        .map(|&m| EvalReport::from_intervals(m.label(), &method_intervals(train, &queries, m, cfg)?, &truths))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalharness::{generate, SyntheticSpec};
    use crate::geodata::train_test_split;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert_eq!(Method::parse_list("split, escp").unwrap(), vec![Method::Split, Method::Escp]);
        assert!(Method::parse_list("split,cqr").is_err());
    }

    #[test]
    fn neighbourhood_heuristic() {
        assert_eq!(default_neighborhood(2000, 10), 200);
        assert_eq!(default_neighborhood(100_000, 10), 500);
        assert_eq!(default_neighborhood(3988, 10), 399);
        assert_eq!(default_neighborhood(60, 10), 10);
        assert_eq!(default_neighborhood(5, 10), 4);
    }

    #[test]
    fn three_reports_on_shared_split() {
        let ds = generate(&SyntheticSpec::heteroscedastic(800, 4)).unwrap();
        let (train, test) = train_test_split(&ds, 0.8, 4);
        let mut cfg = MethodConfig::new(StbkrParams::new(10, 0.1).unwrap());
        cfg.qrf.trees = 20;
        cfg.bootstraps = 10;
        let reports = compare_methods(&train, &test, &Method::ALL, &cfg).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert_eq!(r.n_test, 160);
            assert_eq!(r.infinite_width_count, 0);
            assert!(r.coverage > 0.6, "{r:?}");
        }
        assert_eq!(reports, compare_methods(&train, &test, &Method::ALL, &cfg).unwrap());
    }
}
