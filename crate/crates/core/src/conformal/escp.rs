use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use super::ensemble::{BootstrapPlan, Ensemble};
use super::qrf::QrfModel;
use super::residuals::{default_training_radius, forest_config, ResidualField};
use super::{empirical_quantile, EscpConfig, PointPredictor, PredictionInterval, QuantileMode};
use crate::error::{Error, Result};
use crate::geodata::{Dataset, PlanarPoint};
use crate::kernel::{KernelModel, StbkrParams};
use crate::seeding;

/// Source of the query's feature vector in QRF mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryFeatures {
    /// Leave-one-out residuals of the K nearest training points, from the
    /// same field the forest is trained on.
    #[default]
    Field,
    /// Out-of-bag ensemble residuals of the neighbourhood.
    Ensemble,
}

/// Intermediate quantities of one ESCP evaluation.
#[derive(Debug, Clone)]
pub struct EscpTrace {
    /// N(q), nearest first.
    pub neighbors: Vec<usize>,
    /// N(q) sorted by training index; bootstrap positions refer to this list.
    pub members: Vec<usize>,
    pub plan: Option<BootstrapPlan>,
    /// Out-of-bag residual per member, `None` when the member was skipped.
    pub oob_residuals: Vec<Option<f64>>,
    /// Feature vector handed to the quantile forest.
    pub query_features: Option<Vec<f64>>,
    pub omega: f64,
    pub interval: PredictionInterval,
}

/// ESCP over a fixed training set. Evaluations at different queries are
/// independent; the residual field and the whole-set forest are shared.
pub struct EscpPredictor<'a> {
    train: &'a Dataset,
    cfg: EscpConfig,
    params: StbkrParams,
    features: QueryFeatures,
    field: Option<ResidualField<'a>>,
    global_forest: OnceLock<Arc<QrfModel>>,
}

impl<'a> EscpPredictor<'a> {
    pub fn new(train: &'a Dataset, cfg: EscpConfig, params: StbkrParams) -> Result<Self> {
        params.validate()?;
        cfg.validate(train.len(), params.k)?;
        let field = match cfg.quantile_mode {
            QuantileMode::Qrf => Some(ResidualField::new(train, params, cfg.neighborhood)?),
            QuantileMode::Empirical => None,
        };
        Ok(EscpPredictor {
            train,
            cfg,
            params,
            features: QueryFeatures::default(),
            field,
            global_forest: OnceLock::new(),
        })
    }

    pub fn with_query_features(mut self, features: QueryFeatures) -> Self {
        self.features = features;
        self
    }

    pub fn config(&self) -> &EscpConfig {
        &self.cfg
    }

    pub fn interval(&self, q: PlanarPoint) -> Result<PredictionInterval> {
        Ok(self.run(q, false)?.interval)
    }

    /// Intervals for many queries, evaluated in parallel.
    pub fn intervals(&self, queries: &[PlanarPoint]) -> Result<Vec<PredictionInterval>> {
        queries.par_iter().map(|&q| self.interval(q)).collect()
    }

    /// Like [`Self::interval`] but keeps every intermediate quantity.
    pub fn explain(&self, q: PlanarPoint) -> Result<EscpTrace> {
        self.run(q, true)
    }

    fn run(&self, q: PlanarPoint, full: bool) -> Result<EscpTrace> {
        let cfg = &self.cfg;
        let neighbors: Vec<usize> = self
            .train
            .knn(q, cfg.neighborhood)?
            .into_iter()
            .map(|nb| nb.index)
            .collect();
        let mut members = neighbors.clone();
        members.sort_unstable();

        let needs_ensemble = full
            || cfg.quantile_mode == QuantileMode::Empirical
            || cfg.point_predictor == PointPredictor::EnsembleMean
            || self.features == QueryFeatures::Ensemble;
        let ensemble = if needs_ensemble {
            Some(Ensemble::fit(
                self.train,
                members.clone(),
                cfg.bootstraps,
                cfg.batch,
                self.params,
                seeding::query_seed(cfg.seed, q),
            )?)
        } else {
            None
        };
        let oob: Vec<Option<f64>> = match &ensemble {
            Some(ens) => (0..members.len()).map(|pos| ens.oob_residual(self.train, pos)).collect(),
            None => Vec::new(),
        };

        let tau = 1.0 - cfg.alpha;
        let (omega, query_features) = match cfg.quantile_mode {
            QuantileMode::Empirical => (oob_quantile(&oob, tau)?, None),
            QuantileMode::Qrf => {
                let field = self.field.as_ref().expect("field is built in qrf mode");
                let x = match self.features {
                    QueryFeatures::Field => field.query_features(q),
                    QueryFeatures::Ensemble => nearest_first(&neighbors, &members, &oob)?,
                };
                let omega = self.forest(field, q)?.quantile(&x, tau)?;
                (omega, Some(x))
            }
        };

        let center = match (cfg.point_predictor, &ensemble) {
            (PointPredictor::EnsembleMean, Some(ens)) => ens.mean_prediction(q),
            _ => {
                let (pts, ys) = members
                    .iter()
                    .map(|&i| {
                        let m = self.train.get(i);
                        (m.planar, m.score)
                    })
                    .unzip();
                KernelModel::from_samples(pts, ys, self.params)?.predict(q)
            }
        };

        Ok(EscpTrace {
            neighbors,
            members,
            plan: ensemble.map(|e| e.plan),
            oob_residuals: oob,
            query_features,
            omega,
            interval: PredictionInterval::symmetric(center, omega.max(0.0), cfg.alpha),
        })
    }

    fn forest(&self, field: &ResidualField<'a>, q: PlanarPoint) -> Result<Arc<QrfModel>> {
        let n = self.train.len();
        let radius = default_training_radius(&self.cfg, n);
        let cfg = forest_config(&self.cfg);
        if radius == n {
            if let Some(f) = self.global_forest.get() {
                return Ok(f.clone());
            }
            let rows = field.local_rows(q, radius)?;
            let forest = Arc::new(field.forest(&rows, &cfg)?);
            return Ok(self.global_forest.get_or_init(|| forest).clone());
        }
        let rows = field.local_rows(q, radius)?;
        Ok(Arc::new(field.forest(&rows, &cfg)?))
    }
}

fn oob_quantile(oob: &[Option<f64>], tau: f64) -> Result<f64> {
    let values: Vec<f64> = oob.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(Error::Calibration(
            "every neighbour appears in all bootstrap batches; increase B".into(),
        ));
    }
    empirical_quantile(&values, tau)
}

/// Out-of-bag residuals in nearest-first order; skipped members take the
/// mean of the others.
fn nearest_first(neighbors: &[usize], members: &[usize], oob: &[Option<f64>]) -> Result<Vec<f64>> {
    let present: Vec<f64> = oob.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Calibration(
            "every neighbour appears in all bootstrap batches; increase B".into(),
        ));
    }
    let fill = present.iter().sum::<f64>() / present.len() as f64;
    Ok(neighbors
        .iter()
        .map(|i| {
            let pos = members.binary_search(i).expect("neighbour is a member");
            oob[pos].unwrap_or(fill)
        })
        .collect())
}

/// One-shot ESCP interval at `q`.
pub fn escp_interval(
    train: &Dataset,
    q: PlanarPoint,
    cfg: &EscpConfig,
    params: StbkrParams,
) -> Result<PredictionInterval> {
    EscpPredictor::new(train, *cfg, params)?.interval(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::EnbpiModel;
    use crate::evalharness::{generate, FieldKind, SyntheticSpec};
    use crate::geodata::{GeoPoint, Measurement};
    use crate::kernel::gaussian_kernel;

    fn dataset(points: &[(f64, f64, f64)]) -> Dataset {
        let origin = GeoPoint::new(0.0, 0.0).unwrap();
        let pts = points
            .iter()
            .map(|&(x, y, score)| Measurement {
                location: origin,
                planar: PlanarPoint::new(x, y),
                score,
                download_kbps: 0.0,
                upload_kbps: 0.0,
                tests: 1,
                devices: 1,
            })
            .collect();
        Dataset::from_parts(pts, origin, Default::default())
    }

    fn hetero(n: usize, seed: u64) -> Dataset {
        generate(&SyntheticSpec {
            n,
            field: FieldKind::Heteroscedastic,
            noise_base: 1.0,
            noise_ratio: 4.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn constant_field_zero_width() {
        let pts: Vec<_> = (0..300)
            .map(|i| ((i % 17) as f64 * 1.3, (i / 17) as f64 * 0.9, 4.25))
            .collect();
        let ds = dataset(&pts);
        let p = StbkrParams::new(5, 0.1).unwrap();
        for mode in [QuantileMode::Empirical, QuantileMode::Qrf] {
            for pp in [PointPredictor::FullNeighborhood, PointPredictor::EnsembleMean] {
                let mut cfg = EscpConfig::new(25);
                cfg.quantile_mode = mode;
                cfg.point_predictor = pp;
                cfg.batch = 25;
                cfg.qrf.trees = 10;
                let iv = escp_interval(&ds, PlanarPoint::new(5.0, 3.0), &cfg, p).unwrap();
                assert_eq!((iv.lower, iv.center, iv.upper), (4.25, 4.25, 4.25));
            }
        }
    }

    #[test]
    fn manual_trace_small_config() {
        let pts: Vec<(f64, f64, f64)> = (0..10)
            .map(|i| {
                let t = i as f64;
                (t * 0.7 - 3.0, (t * 1.9).sin() * 2.0, (t * t * 0.37).cos() * 10.0)
            })
            .collect();
        let ds = dataset(&pts);
        let q = PlanarPoint::new(0.3, -0.2);
        let p = StbkrParams::new(1, 0.5).unwrap();
        let cfg = EscpConfig {
            alpha: 0.2,
            bootstraps: 2,
            neighborhood: 3,
            batch: 1,
            quantile_mode: QuantileMode::Empirical,
            point_predictor: PointPredictor::FullNeighborhood,
            seed: 17,
            qrf: Default::default(),
        };

        // Step 1: brute-force 3-NN, ties by index.
        let d = |i: usize| (pts[i].0 - q.x).hypot(pts[i].1 - q.y);
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
        let mut members = order[..3].to_vec();
        members.sort_unstable();

        // Step 2: the bootstrap plan is drawn from the query stream.
        let plan = BootstrapPlan::draw(3, 2, 1, seeding::query_seed(17, q));
        let drawn: Vec<usize> = plan.index_sets().iter().map(|s| s[0]).collect();

        // Steps 3-4: a one-point regressor predicts its own target everywhere.
        let mut res = Vec::new();
        for pos in 0..3 {
            let oob: Vec<f64> = (0..2).filter(|&b| drawn[b] != pos).map(|b| pts[members[drawn[b]]].2).collect();
            if !oob.is_empty() {
                let mean = oob.iter().sum::<f64>() / oob.len() as f64;
                res.push((pts[members[pos]].2 - mean).abs());
            }
        }
        // Step 5: ceil(0.8 m)-th smallest.
        res.sort_by(f64::total_cmp);
        let omega = res[(0.8 * res.len() as f64).ceil() as usize - 1];

        // Step 6: Gaussian-weighted mean over the neighbourhood with h = c R_1².
        let r1 = members.iter().map(|&i| d(i)).fold(f64::INFINITY, f64::min);
        let h = 0.5 * r1 * r1;
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &members {
            let w = gaussian_kernel(d(i) / h) / h;
            num += w * pts[i].2;
            den += w;
        }
        let center = num / den;

        let trace = EscpPredictor::new(&ds, cfg, p).unwrap().explain(q).unwrap();
        assert_eq!(trace.members, members);
        assert_eq!(trace.neighbors, order[..3].to_vec());
        assert_eq!(trace.plan.as_ref().unwrap(), &plan);
        assert_eq!(trace.omega, omega);
        let iv = trace.interval;
        assert!((iv.center - center).abs() <= 1e-12 * center.abs().max(1.0));
        assert_eq!(iv, escp_interval(&ds, q, &cfg, p).unwrap());
    }

    #[test]
    fn all_skipped_is_a_calibration_error() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 0.0, i as f64)).collect();
        let ds = dataset(&pts);
        let p = StbkrParams::new(1, 0.5).unwrap();
        let mut cfg = EscpConfig::new(2);
        cfg.bootstraps = 2;
        cfg.batch = 40;
        cfg.quantile_mode = QuantileMode::Empirical;
        match escp_interval(&ds, PlanarPoint::new(0.0, 0.0), &cfg, p) {
            Err(Error::Calibration(msg)) => assert!(msg.contains("increase B")),
            other => panic!("expected calibration error, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_and_symmetric() {
        let ds = hetero(600, 2);
        let p = StbkrParams::new(10, 0.1).unwrap();
        let queries: Vec<PlanarPoint> = (0..12).map(|i| PlanarPoint::new(-44.0 + 8.0 * i as f64, 3.0)).collect();
        for mode in [QuantileMode::Empirical, QuantileMode::Qrf] {
            let mut cfg = EscpConfig::new(60);
            cfg.quantile_mode = mode;
            cfg.seed = 9;
            cfg.qrf.trees = 20;
            let a = EscpPredictor::new(&ds, cfg, p).unwrap().intervals(&queries).unwrap();
            let pred = EscpPredictor::new(&ds, cfg, p).unwrap();
            let b: Vec<_> = queries.iter().rev().map(|&q| pred.interval(q).unwrap()).collect();
            for (x, y) in a.iter().zip(b.iter().rev()) {
                assert_eq!(x.lower.to_bits(), y.lower.to_bits());
                assert_eq!(x.upper.to_bits(), y.upper.to_bits());
                let (up, down) = (x.upper - x.center, x.center - x.lower);
                assert!((up - down).abs() <= 4.0 * f64::EPSILON * x.center.abs().max(up));
            }
        }
    }

    #[test]
    fn full_neighbourhood_reduces_to_enbpi() {
        let ds = hetero(150, 5);
        let p = StbkrParams::new(5, 0.1).unwrap();
        let mut cfg = EscpConfig::new(150);
        cfg.quantile_mode = QuantileMode::Empirical;
        cfg.point_predictor = PointPredictor::EnsembleMean;
        cfg.bootstraps = 8;
        cfg.batch = 60;
        cfg.seed = 21;
        let pred = EscpPredictor::new(&ds, cfg, p).unwrap();
        for q in [PlanarPoint::new(-10.0, 4.0), PlanarPoint::new(33.0, -7.5)] {
            let stream = seeding::query_seed(cfg.seed, q);
            let enbpi = EnbpiModel::fit_with_stream(&ds, cfg.alpha, cfg.bootstraps, cfg.batch, p, stream).unwrap();
            assert_eq!(pred.interval(q).unwrap(), enbpi.interval(q));
        }
    }

    #[test]
    fn ensemble_query_features_run() {
        let ds = hetero(500, 4);
        let p = StbkrParams::new(10, 0.1).unwrap();
        let mut cfg = EscpConfig::new(40);
        cfg.qrf.trees = 10;
        let pred = EscpPredictor::new(&ds, cfg, p).unwrap().with_query_features(QueryFeatures::Ensemble);
        let tr = pred.explain(PlanarPoint::new(1.0, 1.0)).unwrap();
        assert_eq!(tr.query_features.unwrap().len(), 40);
        assert!(tr.omega >= 0.0);
    }

    #[test]
    fn width_tracks_local_noise() {
        let ds = hetero(2000, 8);
        let p = StbkrParams::new(10, 0.1).unwrap();
        for mode in [QuantileMode::Empirical, QuantileMode::Qrf] {
            let mut cfg = EscpConfig::new(100);
            cfg.quantile_mode = mode;
            cfg.qrf.trees = 30;
            let pred = EscpPredictor::new(&ds, cfg, p).unwrap();
            let mut sides = [0.0, 0.0];
            for j in 0..10 {
                let y = -40.0 + 9.0 * j as f64;
                sides[0] += pred.interval(PlanarPoint::new(-25.0, y)).unwrap().width();
                sides[1] += pred.interval(PlanarPoint::new(25.0, y)).unwrap().width();
            }
            assert!(sides[1] > 1.5 * sides[0], "{mode:?}: low {} high {}", sides[0], sides[1]);
        }
    }
}
