//! Bootstrap ensembles with out-of-bag (leave-one-out) aggregation, shared
//! by ESCP and the EnbPI baseline.

use rand::Rng;

use crate::error::Result;
use crate::geodata::{Dataset, PlanarPoint};
use crate::kernel::{KernelModel, StbkrParams};
use crate::seeding;

/// B multisets of `s` positions drawn with replacement from `0..members`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapPlan {
    members: usize,
    index_sets: Vec<Vec<usize>>,
    in_bag: Vec<bool>,
}

impl BootstrapPlan {
    pub fn draw(members: usize, bootstraps: usize, batch: usize, seed: u64) -> Self {
        let mut rng = seeding::rng(seed);
        let mut in_bag = vec![false; members * bootstraps];
        let index_sets = (0..bootstraps)
            .map(|b| {
                (0..batch)
                    .map(|_| {
                        let i = rng.random_range(0..members);
                        in_bag[b * members + i] = true;
                        i
                    })
                    .collect()
            })
            .collect();
        BootstrapPlan {
            members,
            index_sets,
            in_bag,
        }
    }

    pub fn bootstraps(&self) -> usize {
        self.index_sets.len()
    }

    pub fn members(&self) -> usize {
        self.members
    }

    /// D_b as positions into the member list, in draw order.
    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    pub fn contains(&self, b: usize, member: usize) -> bool {
        self.in_bag[b * self.members + member]
    }

    /// Bootstraps whose batch contains `member`.
    pub fn membership(&self, member: usize) -> Vec<usize> {
        (0..self.bootstraps()).filter(|&b| self.contains(b, member)).collect()
    }

    /// Bootstraps whose batch does not contain `member`.
    pub fn out_of_bag(&self, member: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.bootstraps()).filter(move |&b| !self.contains(b, member))
    }
}

/// One regressor per bootstrap batch over a fixed member list.
#[derive(Debug, Clone)]
pub(crate) struct Ensemble {
    /// Training-set indices, ascending.
    pub members: Vec<usize>,
    pub plan: BootstrapPlan,
    pub models: Vec<KernelModel>,
}

impl Ensemble {
    pub fn fit(
        train: &Dataset,
        members: Vec<usize>,
        bootstraps: usize,
        batch: usize,
        params: StbkrParams,
        seed: u64,
    ) -> Result<Self> {
        let plan = BootstrapPlan::draw(members.len(), bootstraps, batch, seed);
        let models = plan
            .index_sets()
            .iter()
            .map(|set| {
                let (pts, ys) = set
                    .iter()
                    .map(|&pos| {
                        let m = train.get(members[pos]);
                        (m.planar, m.score)
                    })
                    .unzip();
                KernelModel::from_samples(pts, ys, params)
            })
            .collect::<Result<_>>()?;
        Ok(Ensemble {
            members,
            plan,
            models,
        })
    }

    /// `|y − mean_{b ∌ i} f̂ᵇ(xᵢ)|` for member position `pos`, or `None` when
    /// every batch contains it.
    pub fn oob_residual(&self, train: &Dataset, pos: usize) -> Option<f64> {
        let m = train.get(self.members[pos]);
        let (sum, count) = self
            .plan
            .out_of_bag(pos)
            .fold((0.0, 0usize), |(s, c), b| (s + self.models[b].predict(m.planar), c + 1));
        (count > 0).then(|| (m.score - sum / count as f64).abs())
    }

    pub fn mean_prediction(&self, q: PlanarPoint) -> f64 {
        self.models.iter().map(|m| m.predict(q)).sum::<f64>() / self.models.len() as f64
    }
}
