mod common;

use marslab::cluster::{k_wmeans, select_clusters, wasserstein_1d, within_cost, Metric};
use marslab::energy::CbeVector;
use marslab::rng::rng_from;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;

fn vecs(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    let v = move || prop::collection::vec(-50.0f64..50.0, len);
    (v(), v(), v())
}

fn cbes(points: &[Vec<f64>]) -> Vec<CbeVector> {
    points
        .iter()
        .map(|p| CbeVector { values: p.clone(), kappa: 5.0 })
        .collect()
}

/// `n` CBEs of length `len` in two groups centred on different levels.
fn two_groups(seed: u64, n: usize, len: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let split = rng.random_range(1..n);
    let (lo, hi) = (rng.random_range(0.5..2.0), rng.random_range(4.0..8.0));
    let mut out: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let level = if i < split { lo } else { hi };
            (0..len).map(|_| level + rng.random_range(-0.3..0.3)).collect()
        })
        .collect();
    out.shuffle(&mut rng);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wasserstein_is_a_metric_on_multisets((p, q, r) in (1usize..12).prop_flat_map(vecs)) {
        let d = |a: &[f64], b: &[f64]| wasserstein_1d(a, b).unwrap();
        prop_assert!(d(&p, &q) >= 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-9);
        prop_assert!(d(&p, &p) <= 1e-12);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
        let mut shuffled = p.clone();
        shuffled.reverse();
        prop_assert!(d(&shuffled, &q) == d(&p, &q));
        prop_assert!((d(&p, &q) - common::w1_by_cdf(&p, &q)).abs() <= 1e-9);
    }

    #[test]
    fn zero_distance_means_equal_multisets(p in prop::collection::vec(-5i32..5, 1..8)) {
        let a: Vec<f64> = p.iter().map(|&x| x as f64).collect();
        let mut b = a.clone();
        b.rotate_left(1);
        prop_assert_eq!(wasserstein_1d(&a, &b).unwrap(), 0.0);
        b[0] += 0.5;
        prop_assert!(wasserstein_1d(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn reassigning_to_the_nearest_center_never_raises_cost(seed in any::<u64>(), n in 2usize..10, len in 1usize..6) {
        let mut rng = rng_from(seed);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..len).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        let mut assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        assignment[0] = 0;
        assignment[n - 1] = 1;
        let center = |c: usize, a: &[usize]| {
            let m: Vec<&[f64]> = refs.iter().zip(a).filter(|(_, &x)| x == c).map(|(p, _)| *p).collect();
            Metric::Wasserstein.centroid(&m)
        };
        let centers = [center(0, &assignment), center(1, &assignment)];
        let before = within_cost(&refs, &assignment, &centers, Metric::Wasserstein).unwrap();
        let nearest: Vec<usize> = refs
            .iter()
            .map(|p| {
                let d0 = wasserstein_1d(p, &centers[0]).unwrap();
                let d1 = wasserstein_1d(p, &centers[1]).unwrap();
                usize::from(d1 < d0)
            })
            .collect();
        let after = within_cost(&refs, &nearest, &centers, Metric::Wasserstein).unwrap();
        prop_assert!(after <= before + 1e-12);
    }
}

#[test]
fn k_wmeans_finds_the_best_split_of_separated_groups() {
    for seed in 0..20 {
        let n = 3 + (seed as usize % 6);
        let points = two_groups(seed, n, 4);
        let r = k_wmeans(&cbes(&points), seed).unwrap();
        let (best, split) = common::best_partition(&points, Metric::Wasserstein);
        assert!(common::same_split(&r.assignment, &split), "seed {seed}");
        let cost = common::partition_cost(&points, &r.assignment, Metric::Wasserstein);
        assert!((cost - best).abs() < 1e-9);
    }
}

#[test]
fn k_wmeans_is_deterministic() {
    let points = two_groups(7, 8, 5);
    let a = k_wmeans(&cbes(&points), 1).unwrap();
    let b = k_wmeans(&cbes(&points), 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn selection_keeps_the_low_energy_group() {
    let mut points = vec![vec![1.0, 1.1, 0.9]; 5];
    points.push(vec![6.0, 5.0, 7.0]);
    points.push(vec![6.5, 5.5, 7.5]);
    let r = k_wmeans(&cbes(&points), 0).unwrap();
    assert_eq!(select_clusters(&r, 0.03), vec![0, 1, 2, 3, 4]);
    assert_eq!(select_clusters(&r, 100.0).len(), 7);
}

#[test]
fn k_wmeans_finds_the_best_split_of_unstructured_inputs() {
    for seed in 0..50 {
        let mut rng = rng_from(1000 + seed);
        let n = rng.random_range(2..=8);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let r = k_wmeans(&cbes(&points), seed).unwrap();
        let (best, _) = common::best_partition(&points, Metric::Wasserstein);
        let cost = common::partition_cost(&points, &r.assignment, Metric::Wasserstein);
        assert!((cost - best).abs() < 1e-9, "seed {seed}: {cost} vs {best}");
    }
}
