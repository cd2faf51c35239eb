//! Small built-in data sets used by the examples and tests.

use crate::exact::{mix_seed, rat, rat_int};
use crate::model::{UncertainPoint, UncertainPointSet};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Ten 1D uncertain points with two readings each, laid out so the twenty
/// location values 1..20 interleave: each point's first reading sits left of
/// every second reading, and the second readings arrive in scrambled order.
///
/// Point id -> (first, second): 1 -> (1, 20), 2 -> (2, 15), 3 -> (3, 7),
/// 4 -> (4, 18), 5 -> (5, 13), 6 -> (6, 19), 7 -> (8, 17), 8 -> (9, 10),
/// 9 -> (11, 16), 10 -> (12, 14).
pub fn interleaved_ten() -> UncertainPointSet {
    let pairs: [(i64, i64); 10] = [
        (1, 20),
        (2, 15),
        (3, 7),
        (4, 18),
        (5, 13),
        (6, 19),
        (8, 17),
        (9, 10),
        (11, 16),
        (12, 14),
    ];
    let points = pairs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| {
            UncertainPoint::new(i as i64 + 1, vec![vec![rat_int(*a)], vec![rat_int(*b)]])
        })
        .collect();
    UncertainPointSet::new(points).expect("valid fixture")
}

/// The coreset `{1, 3, 5, 7, 9}` of [`interleaved_ten`] used throughout the
/// examples.
pub fn interleaved_ten_odd_subset() -> UncertainPointSet {
    interleaved_ten().subset_by_ids(&[1, 3, 5, 7, 9]).expect("ids present")
}

/// Random uncertain point set: integer coordinates drawn uniformly from a
/// grid of roughly `8 * n * k` cells per axis (mostly distinct, occasional
/// ties). Deterministic given the seed.
pub fn random_uniform(n: usize, k: usize, d: usize, seed: u64) -> UncertainPointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x6461_7461, 0));
    let span = (8 * n * k).max(16) as i64;
    let points = (0..n)
        .map(|i| {
            let locations = (0..k)
                .map(|_| (0..d).map(|_| rat_int(rng.random_range(0..span))).collect())
                .collect();
            UncertainPoint::new(i as i64 + 1, locations)
        })
        .collect();
    UncertainPointSet::new(points).expect("valid generated set")
}

/// Like [`random_uniform`] but with quarter-integer coordinates, exercising
/// non-integer rationals.
pub fn random_quarters(n: usize, k: usize, d: usize, seed: u64) -> UncertainPointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7175_6172, 1));
    let span = (16 * n * k).max(32) as i64;
    let points = (0..n)
        .map(|i| {
            let locations = (0..k)
                .map(|_| (0..d).map(|_| rat(rng.random_range(0..span), 4)).collect())
                .collect();
            UncertainPoint::new(i as i64 + 1, locations)
        })
        .collect();
    UncertainPointSet::new(points).expect("valid generated set")
}
