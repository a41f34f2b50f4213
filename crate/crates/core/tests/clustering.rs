mod common;

use clusterreg::clustering::{dbscan, evaluate, silhouette, sse, sweep_params};
use clusterreg::{ClusterAssignment, FeatureMatrix, NeighborhoodParams};
use proptest::prelude::*;

fn matrix(points: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(points).unwrap()
}

fn one_d(values: &[f64]) -> FeatureMatrix {
    matrix(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
}

fn run(points: &[Vec<f64>], eps: f64, min_pts: usize) -> ClusterAssignment {
    dbscan(&matrix(points), NeighborhoodParams::new(eps, min_pts).unwrap()).unwrap()
}

/// True when the two labelings agree up to a relabeling of cluster ids.
fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

#[test]
fn matches_brute_force_oracle_on_seeded_sets() {
    let mut rng = common::rng(7);
    for case in 0..300 {
        let (points, eps, min_pts) = common::random_points(&mut rng);
        let a = run(&points, eps, min_pts);
        common::check_against_oracle(&points, eps, min_pts, &a.labels, &a.core_flags, a.num_clusters)
            .unwrap_or_else(|e| panic!("case {case} (eps={eps}, min_pts={min_pts}): {e}"));
    }
}

#[test]
fn derived_blob_example() {
    let a = dbscan(
        &one_d(&[0.0, 0.5, 1.0, 10.0, 10.5, 11.0]),
        NeighborhoodParams::new(0.6, 2).unwrap(),
    )
    .unwrap();
    assert_eq!(a.num_clusters, 2);
    assert_eq!(a.labels, [0, 0, 0, 1, 1, 1].map(Some));
    assert_eq!(a.noise_count(), 0);
}

#[test]
fn cluster_ids_follow_first_discovery() {
    let a = run(&[vec![10.0], vec![0.0], vec![10.1], vec![0.1]], 0.2, 2);
    assert_eq!(a.labels, vec![Some(0), Some(1), Some(0), Some(1)]);
}

#[test]
fn silhouette_duplicated_clusters_is_one() {
    let pts = one_d(&[0.0, 0.0, 0.0, 5.0, 5.0]);
    let a = dbscan(&pts, NeighborhoodParams::new(0.1, 2).unwrap()).unwrap();
    let s = silhouette(&pts, &a).unwrap();
    assert_eq!(s.mean_sc, 1.0);
    assert!(s.per_point.iter().all(|v| *v == Some(1.0)));
}

#[test]
fn silhouette_two_pairs_hand_values() {
    // a = 1 everywhere; b = 10.5 for the outer points and 9.5 for the inner ones.
    let pts = one_d(&[0.0, 1.0, 10.0, 11.0]);
    let a = dbscan(&pts, NeighborhoodParams::new(1.0, 2).unwrap()).unwrap();
    let s = silhouette(&pts, &a).unwrap();
    let outer = 9.5 / 10.5;
    let inner = 8.5 / 9.5;
    let expected = [outer, inner, inner, outer];
    for (got, want) in s.per_point.iter().zip(expected) {
        assert!((got.unwrap() - want).abs() < 1e-12);
    }
    assert!((s.mean_sc - (outer + inner) / 2.0).abs() < 1e-12);
}

#[test]
fn sse_two_points_is_two() {
    let pts = matrix(&[vec![0.0, 0.0], vec![2.0, 0.0]]);
    let a = ClusterAssignment {
        labels: vec![Some(0), Some(0)],
        num_clusters: 1,
        core_flags: vec![true, true],
    };
    let q = sse(&pts, &a).unwrap();
    assert_eq!(q.sse, 2.0);
    assert_eq!(q.centroids, vec![vec![1.0, 0.0]]);
}

#[test]
fn singletons_have_zero_sse() {
    let mut rng = common::rng(3);
    let (points, _, _) = common::random_points(&mut rng);
    let a = run(&points, 0.0, 1);
    // With eps 0 duplicates merge; everything else is its own cluster.
    let q = sse(&matrix(&points), &a).unwrap();
    assert!(q.sse.abs() < 1e-24);
}

#[test]
fn sweep_prefers_blobs_over_all_noise() {
    let pts = one_d(&[0.0, 0.5, 1.0, 10.0, 10.5, 11.0]);
    let ranked = sweep_params(&pts, &[0.05, 0.6], &[2]).unwrap();
    assert_eq!(ranked.len(), 1, "eps 0.05 leaves everything noise and is not admissible");
    assert_eq!(ranked[0].params.eps, 0.6);
    assert_eq!(ranked[0].quality.c, 2);
    let direct = evaluate(&pts, &ranked[0].assignment).unwrap();
    assert_eq!(direct, ranked[0].quality);
}

#[test]
fn sweep_rank_is_sorted() {
    let mut rng = common::rng(11);
    let points: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let c = (i % 3) as f64;
            vec![c + rand::Rng::random_range(&mut rng, 0.0..0.2), c * 0.5]
        })
        .collect();
    let eps: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
    let ranked = sweep_params(&matrix(&points), &eps, &[1, 2, 3, 4, 5]).unwrap();
    for w in ranked.windows(2) {
        let (a, b) = (&w[0].quality, &w[1].quality);
        let key = |q: &clusterreg::ClusteringQuality| (-q.sc.unwrap(), q.sse, q.c);
        assert!(key(a).partial_cmp(&key(b)).unwrap().is_le(), "{a:?} before {b:?}");
    }
}

fn point_set() -> impl Strategy<Value = (Vec<Vec<f64>>, f64, usize)> {
    (1usize..=4, 1usize..=30).prop_flat_map(|(dims, n)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..=20).prop_map(|v| v as f64 * 0.05), dims), n),
            (0u8..=8).prop_map(|v| v as f64 * 0.05),
            1usize..=5,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_equivalence((points, eps, min_pts) in point_set()) {
        let a = run(&points, eps, min_pts);
        prop_assert_eq!(
            common::check_against_oracle(&points, eps, min_pts, &a.labels, &a.core_flags, a.num_clusters),
            Ok(())
        );
    }

    #[test]
    fn permutation_stability((points, eps, min_pts) in point_set(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.shuffle(&mut common::rng(seed));
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
        let a = run(&points, eps, min_pts);
        let b = run(&shuffled, eps, min_pts);
        let n = points.len();
        let mut b_flags = vec![false; n];
        let mut b_core = vec![None; n];
        let mut b_noise = vec![false; n];
        for (k, &i) in order.iter().enumerate() {
            b_flags[i] = b.core_flags[k];
            b_core[i] = if b.core_flags[k] { b.labels[k] } else { None };
            b_noise[i] = b.labels[k].is_none();
        }
        prop_assert_eq!(&a.core_flags, &b_flags);
        prop_assert_eq!(a.num_clusters, b.num_clusters);
        // Border points may switch between adjacent clusters, so only the
        // core partition and the noise set have to agree.
        let a_core: Vec<Option<usize>> = (0..n).map(|i| if a.core_flags[i] { a.labels[i] } else { None }).collect();
        prop_assert!(same_partition(&a_core, &b_core));
        let a_noise: Vec<bool> = a.labels.iter().map(Option::is_none).collect();
        prop_assert_eq!(a_noise, b_noise);
    }

    #[test]
    fn noise_shrinks_as_eps_grows((points, eps, min_pts) in point_set(), extra in 0u8..=8) {
        let small = run(&points, eps, min_pts);
        let large = run(&points, eps + extra as f64 * 0.05, min_pts);
        prop_assert!(large.noise_count() <= small.noise_count());
    }

    #[test]
    fn quality_bounds((points, eps, min_pts) in point_set()) {
        let pts = matrix(&points);
        let a = run(&points, eps, min_pts);
        if a.num_clusters >= 1 {
            let q = sse(&pts, &a).unwrap();
            prop_assert!(q.sse >= 0.0);
        }
        if a.num_clusters >= 2 {
            let s = silhouette(&pts, &a).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s.mean_sc));
            for v in s.per_point.iter().flatten() {
                prop_assert!((-1.0..=1.0).contains(v));
            }
            for (i, v) in s.per_point.iter().enumerate() {
                prop_assert_eq!(v.is_none(), a.labels[i].is_none());
            }
        }
    }
}
