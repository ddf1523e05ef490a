mod common;

use common::{brute_force_inertia, rng, uniform_vec};
use latent_gfl_core::clustering::{kmeans, kmeans_pp_seeds, lloyd, select_k, silhouette, Points};
use proptest::prelude::*;

#[test]
fn kmeans_reaches_the_exhaustive_optimum_on_small_sets() {
    let mut r = rng(3);
    for t in 0..30 {
        let n = 4 + t % 5;
        let k = 2 + t % 2;
        let data = uniform_vec(&mut r, n * 2, -3.0, 3.0);
        let pts = Points::new(&data, 2).unwrap();
        let res = kmeans(pts, k, 20, t as u64).unwrap();
        let best = brute_force_inertia(&data, 2, k);
        assert!((res.inertia - best).abs() < 1e-9, "set {t}: {} vs {best}", res.inertia);
    }
}

#[test]
fn silhouette_of_two_coincident_pairs() {
    let data = [0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0];
    let pts = Points::new(&data, 2).unwrap();
    let sel = select_k(pts, 2, 5, 0).unwrap();
    assert_eq!(sel.best.k, 2);
    assert_eq!(sel.best.silhouette, 1.0);
    assert!(silhouette(pts, &[0, 1, 0, 1]).unwrap() <= 0.0);
}

#[test]
fn select_k_recovers_three_blobs() {
    let mut r = rng(8);
    let centres = [(-5.0, 0.0), (5.0, 0.0), (0.0, 8.0)];
    let mut data = Vec::new();
    for (cx, cy) in centres {
        for _ in 0..15 {
            let e = uniform_vec(&mut r, 2, -0.5, 0.5);
            data.extend([cx + e[0], cy + e[1]]);
        }
    }
    let pts = Points::new(&data, 2).unwrap();
    let sel = select_k(pts, 6, 5, 1).unwrap();
    assert_eq!(sel.best.k, 3);
    assert_eq!(sel.table.len(), 5);
    assert!(sel.table.iter().all(|row| row.silhouette <= sel.best.silhouette));
}

#[test]
fn silhouette_is_invariant_to_label_ids() {
    let mut r = rng(4);
    let data = uniform_vec(&mut r, 40, -1.0, 1.0);
    let pts = Points::new(&data, 2).unwrap();
    let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
    let renamed: Vec<usize> = labels.iter().map(|l| [7, 2, 40][*l]).collect();
    assert_eq!(silhouette(pts, &labels).unwrap(), silhouette(pts, &renamed).unwrap());
}

proptest! {
    #[test]
    fn lloyd_inertia_never_increases(seed in 0u64..500, n in 3usize..40, k in 2usize..5) {
        prop_assume!(k <= n);
        let mut r = rng(seed);
        let data = uniform_vec(&mut r, n * 3, -2.0, 2.0);
        let pts = Points::new(&data, 3).unwrap();
        let seeds = kmeans_pp_seeds(pts, k, &mut r);
        let run = lloyd(pts, &seeds);
        for w in run.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        for c in 0..k {
            prop_assert!(run.labels.contains(&c));
        }
    }

    #[test]
    fn kmeans_is_deterministic(seed in 0u64..200) {
        let mut r = rng(seed);
        let data = uniform_vec(&mut r, 30, -1.0, 1.0);
        let pts = Points::new(&data, 3).unwrap();
        prop_assert_eq!(kmeans(pts, 3, 4, seed).unwrap(), kmeans(pts, 3, 4, seed).unwrap());
    }
}
