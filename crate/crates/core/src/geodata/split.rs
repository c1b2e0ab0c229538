use rand::seq::SliceRandom;

use super::Dataset;
use crate::seeding;

/// Uniform random partition of `0..n` into `first` and `n - first` indices.
/// Both halves are returned in ascending order.
pub fn split_indices(n: usize, first: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let first = first.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeding::rng(seed));
    let mut a = idx[..first].to_vec();
    let mut b = idx[first..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Random train/test partition with `|train| = round(train_frac · n)`.
pub fn train_test_split(ds: &Dataset, train_frac: f64, seed: u64) -> (Dataset, Dataset) {
    let n_train = (train_frac * ds.len() as f64).round() as usize;
    let (train, test) = split_indices(ds.len(), n_train, seed);
    (ds.subset(&train), ds.subset(&test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_follow_rounding() {
        let (a, b) = split_indices(10, (0.8f64 * 10.0).round() as usize, 3);
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!((0.8f64 * 28587.0).round() as usize, 22870);
    }

    #[test]
    fn deterministic() {
        assert_eq!(split_indices(100, 80, 42), split_indices(100, 80, 42));
        assert_ne!(split_indices(100, 80, 42), split_indices(100, 80, 43));
    }

    proptest! {
        #[test]
        fn partition_property(n in 1usize..300, frac in 0.01f64..0.99, seed: u64) {
            let first = (frac * n as f64).round() as usize;
            let (a, b) = split_indices(n, first, seed);
            let mut all: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(a.len(), first);
        }
    }
}
