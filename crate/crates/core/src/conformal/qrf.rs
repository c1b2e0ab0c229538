//! Quantile regression forest.
//!
//! Trees are grown like a regression random forest (bootstrap rows, a random
//! subset of features per split, variance-reducing splits). Each leaf then
//! keeps every training target that lands in it, so the forest estimates a
//! full conditional distribution instead of a conditional mean.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrfConfig {
    pub trees: usize,
    /// Minimum number of bootstrap rows on each side of a split.
    pub min_leaf: usize,
    /// Features tried per split; `None` means `round(√dim)`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for QrfConfig {
    fn default() -> Self {
        QrfConfig {
            trees: 100,
            min_leaf: 5,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(u32),
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    /// Targets retained per leaf, sorted ascending.
    leaves: Vec<Vec<f64>>,
}

impl Tree {
    fn leaf_of(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                Node::Leaf(id) => return id as usize,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x(feature as usize) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct QrfModel {
    trees: Vec<Tree>,
    dim: usize,
    n_train: usize,
}

/// Column-major feature matrix.
struct Columns<'a> {
    data: Vec<f64>,
    n: usize,
    targets: &'a [f64],
}

impl Columns<'_> {
    #[inline]
    fn get(&self, feature: usize, row: usize) -> f64 {
        self.data[feature * self.n + row]
    }
}

/// Fits a forest on `features` (one row per target).
pub fn qrf_fit(features: &[Vec<f64>], targets: &[f64], cfg: &QrfConfig) -> Result<QrfModel> {
    if features.is_empty() || targets.is_empty() {
        return Err(Error::arg("quantile forest needs at least one training row"));
    }
    if features.len() != targets.len() {
        return Err(Error::arg("feature rows and targets differ in length"));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|r| r.len() != dim) {
        return Err(Error::arg("feature rows must share a non-zero dimension"));
    }
    if cfg.trees == 0 || cfg.min_leaf == 0 {
        return Err(Error::arg("forest needs at least one tree and min_leaf >= 1"));
    }
    if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::arg("quantile forest inputs must be finite"));
    }
    let n = targets.len();
    let mut data = vec![0.0; dim * n];
    for (r, row) in features.iter().enumerate() {
        for (f, &v) in row.iter().enumerate() {
            data[f * n + r] = v;
        }
    }
    let cols = Columns { data, n, targets };
    let mtry = cfg
        .max_features
        .unwrap_or_else(|| ((dim as f64).sqrt().round() as usize).max(1))
        .clamp(1, dim);
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| grow_tree(&cols, dim, mtry, cfg.min_leaf, seeding::derive(cfg.seed, t as u64)))
        .collect();
    Ok(QrfModel { trees, dim, n_train: n })
}

fn grow_tree(cols: &Columns, dim: usize, mtry: usize, min_leaf: usize, seed: u64) -> Tree {
    let n = cols.n;
    let mut rng = seeding::rng(seed);
    let mut rows: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
    let mut feats: Vec<u32> = (0..dim as u32).collect();
    let mut buf: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut scratch: Vec<u32> = Vec::with_capacity(n);

    let mut nodes = vec![Node::Leaf(0)];
    let mut n_leaves = 0u32;
    let mut stack = vec![(0usize, 0usize, n)];
    while let Some((node, start, end)) = stack.pop() {
        let size = end - start;
        let split = if size >= 2 * min_leaf {
            best_split(cols, &rows[start..end], &mut feats, mtry, min_leaf, &mut rng, &mut buf)
        } else {
            None
        };
        let Some((feature, threshold)) = split else {
            nodes[node] = Node::Leaf(n_leaves);
            n_leaves += 1;
            continue;
        };

        scratch.clear();
        let slice = &mut rows[start..end];
        let mut write = 0;
        for i in 0..size {
            let r = slice[i];
            if cols.get(feature, r as usize) <= threshold {
                slice[write] = r;
                write += 1;
            } else {
                scratch.push(r);
            }
        }
        slice[write..].copy_from_slice(&scratch);

        let left = nodes.len();
        nodes.push(Node::Leaf(0));
        nodes.push(Node::Leaf(0));
        nodes[node] = Node::Split {
            feature: feature as u32,
            threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        stack.push((left + 1, start + write, end));
        stack.push((left, start, start + write));
    }

    let mut tree = Tree {
        nodes,
        leaves: vec![Vec::new(); n_leaves as usize],
    };
    for r in 0..n {
        let leaf = tree.leaf_of(|f| cols.get(f, r));
        tree.leaves[leaf].push(cols.targets[r]);
    }
    for leaf in &mut tree.leaves {
        leaf.sort_by(f64::total_cmp);
    }
    tree
}

/// Best variance-reducing `(feature, threshold)` over a random feature
/// subset, or `None` when no admissible split lowers the squared error.
fn best_split(
    cols: &Columns,
    rows: &[u32],
    feats: &mut [u32],
    mtry: usize,
    min_leaf: usize,
    rng: &mut impl Rng,
    buf: &mut Vec<(f64, f64)>,
) -> Option<(usize, f64)> {
    let size = rows.len();
    let (mut lo, mut hi, mut total) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &r in rows {
        let y = cols.targets[r as usize];
        lo = lo.min(y);
        hi = hi.max(y);
        total += y;
    }
    if lo == hi {
        return None;
    }
    let parent = total * total / size as f64;
    let (chosen, _) = feats.partial_shuffle(rng, mtry);

    let mut best: Option<(usize, f64, f64)> = None;
    for &f in chosen.iter() {
        let f = f as usize;
        buf.clear();
        buf.extend(rows.iter().map(|&r| (cols.get(f, r as usize), cols.targets[r as usize])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if buf[0].0 == buf[size - 1].0 {
            continue;
        }
        let mut left_sum = 0.0;
        for i in 1..size {
            left_sum += buf[i - 1].1;
            if i < min_leaf {
                continue;
            }
            if size - i < min_leaf {
                break;
            }
            let (a, b) = (buf[i - 1].0, buf[i].0);
            if a == b {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (size - i) as f64;
            if best.is_none_or(|(_, _, s)| score > s) {
                let mid = a + (b - a) * 0.5;
                let threshold = if mid < b { mid } else { a };
                best = Some((f, threshold, score));
            }
        }
    }
    let (f, threshold, score) = best?;
    let tol = 1e-12 * (parent.abs() + 1.0);
    (score - parent > tol).then_some((f, threshold))
}

impl QrfModel {
    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Number of training targets retained across the leaves of each tree.
    pub fn retained_per_tree(&self) -> Vec<usize> {
        self.trees
            .iter()
            .map(|t| t.leaves.iter().map(Vec::len).sum())
            .collect()
    }

    pub fn training_size(&self) -> usize {
        self.n_train
    }

    /// Conditional `tau`-quantile at `x`: every target in the leaf reached in
    /// tree t gets weight `1 / (trees · leaf size)`; the result is the lowest
    /// value whose cumulative weight reaches `tau`.
    pub fn quantile(&self, x: &[f64], tau: f64) -> Result<f64> {
        Ok(self.quantiles(x, &[tau])?[0])
    }

    pub fn quantiles(&self, x: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::arg(format!(
                "feature vector has length {}, forest expects {}",
                x.len(),
                self.dim
            )));
        }
        if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::arg(format!("quantile level must lie in (0, 1], got {t}")));
        }
        let per_tree = 1.0 / self.trees.len() as f64;
        let mut pool: Vec<(f64, f64)> = Vec::new();
        for tree in &self.trees {
            let leaf = &tree.leaves[tree.leaf_of(|f| x[f])];
            let w = per_tree / leaf.len() as f64;
            pool.extend(leaf.iter().map(|&y| (y, w)));
        }
        pool.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(taus
            .iter()
            .map(|&tau| {
                let mut cum = 0.0;
                for &(y, w) in &pool {
                    cum += w;
                    if cum >= tau - 1e-12 {
                        return y;
                    }
                }
                pool.last().expect("leaves are never empty").0
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_leaf(targets: &[f64]) -> QrfModel {
        let x: Vec<Vec<f64>> = (0..targets.len()).map(|i| vec![i as f64, 1.0]).collect();
        qrf_fit(
            &x,
            targets,
            &QrfConfig {
                trees: 1,
                min_leaf: targets.len(),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_tree_is_empirical_quantile() {
        let m = single_leaf(&[3.0, 1.0, 5.0, 2.0, 4.0]);
        assert_eq!(m.quantile(&[0.0, 0.0], 0.8).unwrap(), 4.0);
        assert_eq!(m.quantile(&[100.0, -3.0], 0.2).unwrap(), 1.0);
        assert_eq!(m.quantile(&[1.0, 1.0], 1.0).unwrap(), 5.0);
    }

    #[test]
    fn constant_targets() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, i as f64]).collect();
        let m = qrf_fit(&x, &[2.5; 50], &QrfConfig::default()).unwrap();
        for tau in [0.1, 0.5, 0.9] {
            assert_eq!(m.quantile(&[3.0, 3.0], tau).unwrap(), 2.5);
        }
    }

    #[test]
    fn separated_clusters() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let jitter = (i as f64 * 0.618).fract() * 0.1;
            x.push(vec![jitter, 1.0 - jitter, jitter * 2.0]);
            y.push(jitter * 0.05);
            x.push(vec![5.0 + jitter, 6.0 - jitter, 5.0 + jitter]);
            y.push(1.0 - jitter * 0.05);
        }
        let m = qrf_fit(&x, &y, &QrfConfig { seed: 4, ..Default::default() }).unwrap();
        let a = m.quantile(&[0.05, 0.95, 0.1], 0.5).unwrap();
        let b = m.quantile(&[5.05, 5.95, 5.1], 0.5).unwrap();
        assert!(a < 0.1 && b > 0.9);
        assert!(b - a > 0.8);
    }

    #[test]
    fn leaves_retain_all_targets() {
        let x: Vec<Vec<f64>> = (0..300).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let y: Vec<f64> = (0..300).map(|i| (i as f64 * 0.11).sin().abs()).collect();
        let m = qrf_fit(&x, &y, &QrfConfig { trees: 12, ..Default::default() }).unwrap();
        assert!(m.retained_per_tree().iter().all(|&c| c == 300));
        assert!(m.trees.iter().any(|t| t.leaves.len() > 10));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(qrf_fit(&[], &[], &QrfConfig::default()).is_err());
        assert!(qrf_fit(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], &QrfConfig::default()).is_err());
        let m = single_leaf(&[1.0, 2.0]);
        assert!(m.quantile(&[1.0], 0.5).is_err());
        assert!(m.quantile(&[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn deterministic() {
        let x: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64]).collect();
        let y: Vec<f64> = (0..200).map(|i| (i % 9) as f64).collect();
        let cfg = QrfConfig { trees: 20, seed: 5, ..Default::default() };
        let a = qrf_fit(&x, &y, &cfg).unwrap();
        let b = qrf_fit(&x, &y, &cfg).unwrap();
        for probe in &x[..20] {
            assert_eq!(a.quantiles(probe, &[0.2, 0.8]).unwrap(), b.quantiles(probe, &[0.2, 0.8]).unwrap());
        }
    }

    proptest! {
        #[test]
        fn monotone_in_tau(
            rows in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..10.0), 5..120),
            probe in (0.0f64..1.0, 0.0f64..1.0),
            seed: u64,
            t1 in 0.01f64..1.0, t2 in 0.01f64..1.0,
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.1]).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let m = qrf_fit(&x, &y, &QrfConfig { trees: 10, min_leaf: 3, max_features: None, seed }).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let q = m.quantiles(&[probe.0, probe.1], &[lo, hi]).unwrap();
            prop_assert!(q[0] <= q[1]);
        }
    }
}
