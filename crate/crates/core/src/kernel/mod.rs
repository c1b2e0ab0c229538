//! Nadaraya–Watson regression with a Gaussian kernel and a self-tuning
//! bandwidth `h(x) = c · R_k(x)²`, where `R_k(x)` is the distance from `x`
//! to its k-th nearest training point.

mod cv;

pub use cv::{cross_validate, CvCell, CvConfig, CvOutcome};

use crate::error::{Error, Result};
use crate::geodata::{Dataset, KdTree, PlanarPoint};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Weights below this fraction of the largest weight are skipped when the
/// kernel cutoff is enabled.
pub const CUTOFF_RATIO: f64 = 1e-12;

/// Standard Gaussian density.
pub fn gaussian_kernel(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// How the k-NN radius turns into a bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandwidthScale {
    /// `h = c · R_k²`
    #[default]
    SquaredRadius,
    /// `h = c · R_k`
    Radius,
}

impl BandwidthScale {
    pub fn name(self) -> &'static str {
        match self {
            BandwidthScale::SquaredRadius => "squared",
            BandwidthScale::Radius => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(BandwidthScale::SquaredRadius),
            "linear" => Ok(BandwidthScale::Radius),
            _ => Err(Error::arg(format!("unknown bandwidth scale {s:?} (expected squared|linear)"))),
        }
    }
}

/// Hyperparameters of the self-tuning bandwidth regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StbkrParams {
    pub k: usize,
    pub c: f64,
    pub scale: BandwidthScale,
    /// Skip negligible weights, see [`CUTOFF_RATIO`].
    pub cutoff: bool,
}

impl StbkrParams {
    pub fn new(k: usize, c: f64) -> Result<Self> {
        let p = StbkrParams {
            k,
            c,
            scale: BandwidthScale::SquaredRadius,
            cutoff: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scale(mut self, scale: BandwidthScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_cutoff(mut self, cutoff: bool) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::arg("k must be at least 1"));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::arg(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// Unfloored bandwidth for a k-NN radius.
    pub fn raw_bandwidth(&self, radius: f64) -> f64 {
        match self.scale {
            BandwidthScale::SquaredRadius => self.c * radius * radius,
            BandwidthScale::Radius => self.c * radius,
        }
    }
}

/// A kernel estimate plus whether every weight underflowed, in which case
/// the value is the score of the nearest training point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPrediction {
    pub value: f64,
    pub underflow: bool,
}

/// Fitted regressor. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct KernelModel {
    tree: KdTree,
    targets: Vec<f64>,
    params: StbkrParams,
    h_floor: f64,
    cutoff: bool,
}

impl KernelModel {
    /// Fits on a dataset; targets are the measurement scores.
    pub fn fit(ds: &Dataset, params: StbkrParams) -> Result<Self> {
        Self::from_samples(ds.planar(), ds.scores(), params)
    }

    /// Fits on raw samples. Repeated locations (bootstrap multisets) are
    /// allowed and count as separate points.
    pub fn from_samples(points: Vec<PlanarPoint>, targets: Vec<f64>, params: StbkrParams) -> Result<Self> {
        params.validate()?;
        if points.len() != targets.len() {
            return Err(Error::arg("points and targets differ in length"));
        }
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if params.k > points.len() {
            return Err(Error::arg(format!(
                "k = {} exceeds training size {}",
                params.k,
                points.len()
            )));
        }
        if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::arg(format!("non-finite target {bad}")));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &points {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        let diameter = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        let h_floor = (1e-8 * diameter * diameter).max(f64::MIN_POSITIVE);
        Ok(KernelModel {
            tree: KdTree::build(points.into_iter().map(PlanarPoint::to_array).collect()),
            targets,
            params,
            h_floor,
            cutoff: params.cutoff,
        })
    }

    /// Skip weights below [`CUTOFF_RATIO`] of the largest one, found with a
    /// radius query. Off by default; the exact estimate sums every point.
    pub fn with_cutoff(mut self, cutoff: bool) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn params(&self) -> StbkrParams {
        self.params
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn point(&self, i: usize) -> PlanarPoint {
        let [x, y] = self.tree.point(i);
        PlanarPoint::new(x, y)
    }

    /// Smallest bandwidth ever used: `1e-8 · diameter²`, with the diameter
    /// taken as the bounding-box diagonal of the training points.
    pub fn bandwidth_floor(&self) -> f64 {
        self.h_floor
    }

    /// Fixed-bandwidth Nadaraya–Watson estimate at `q`.
    pub fn kr_predict(&self, q: PlanarPoint, h: f64) -> Result<KernelPrediction> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::arg(format!("bandwidth must be positive, got {h}")));
        }
        Ok(self.weighted_mean(q.to_array(), h, None))
    }

    /// `c · R_k(q)²`, floored at [`Self::bandwidth_floor`].
    pub fn bandwidth(&self, q: PlanarPoint) -> f64 {
        self.bandwidth_excluding(q.to_array(), None)
    }

    /// Self-tuning bandwidth estimate at `q`.
    pub fn predict(&self, q: PlanarPoint) -> f64 {
        self.predict_detailed(q).value
    }

    pub fn predict_detailed(&self, q: PlanarPoint) -> KernelPrediction {
        let q = q.to_array();
        let h = self.bandwidth_excluding(q, None);
        self.weighted_mean(q, h, None)
    }

    /// Leave-one-out estimate at training point `i`: the point is removed
    /// from both the k-NN radius and the weighted sum.
    pub fn predict_loo(&self, i: usize) -> Result<KernelPrediction> {
        if self.len() <= self.params.k {
            return Err(Error::arg(format!(
                "leave-one-out needs more than k = {} points",
                self.params.k
            )));
        }
        let q = self.tree.point(i);
        let h = self.bandwidth_excluding(q, Some(i));
        Ok(self.weighted_mean(q, h, Some(i)))
    }

    fn bandwidth_excluding(&self, q: [f64; 2], exclude: Option<usize>) -> f64 {
        let k = self.params.k;
        let want = if exclude.is_some() { k + 1 } else { k };
        let radius = self
            .tree
            .knn(q, want)
            .into_iter()
            .filter(|nb| Some(nb.index) != exclude)
            .nth(k - 1)
            .map_or(0.0, |nb| nb.distance);
        self.params.raw_bandwidth(radius).max(self.h_floor)
    }

    fn weighted_mean(&self, q: [f64; 2], h: f64, exclude: Option<usize>) -> KernelPrediction {
        let nearest = self
            .tree
            .knn(q, if exclude.is_some() { 2 } else { 1 })
            .into_iter()
            .find(|nb| Some(nb.index) != exclude)
            .expect("model has at least one usable point");
        let (d_min, y_ref) = (nearest.distance, self.targets[nearest.index]);

        // The largest unnormalised weight belongs to the nearest point; if it
        // is zero in floating point, so is every other weight.
        if gaussian_kernel(d_min / h) / h == 0.0 {
            return KernelPrediction {
                value: y_ref,
                underflow: true,
            };
        }

        // Weights are rescaled by the nearest point's weight; the common
        // factor cancels in the ratio.
        let d_min_sq = d_min * d_min;
        let inv_two_h_sq = 0.5 / (h * h);
        let (mut num, mut den) = (0.0, 0.0);
        let (mut lo, mut hi) = (y_ref, y_ref);
        let mut add = |i: usize| {
            if Some(i) == exclude {
                return;
            }
            let d_sq = crate::geodata::kdtree::dist_sq(q, self.tree.point(i));
            let w = (-(d_sq - d_min_sq) * inv_two_h_sq).exp();
            if w > 0.0 {
                let y = self.targets[i];
                num += w * (y - y_ref);
                den += w;
                lo = lo.min(y);
                hi = hi.max(y);
            }
        };
        if self.cutoff {
            let r_sq = d_min_sq + 2.0 * h * h * (1.0 / CUTOFF_RATIO).ln();
            for i in self.tree.within(q, r_sq) {
                add(i);
            }
        } else {
            for i in 0..self.targets.len() {
                add(i);
            }
        }
        KernelPrediction {
            value: (y_ref + num / den).clamp(lo, hi),
            underflow: false,
        }
    }
}
