//! Invariants checked on generated inputs.

use multisample::baselines::{kmeans, lloyd, pca_projection, random_projection};
use multisample::bench::{accuracy_best_assignment, sign_test_pvalue};
use multisample::data::{load_dataset, save_dataset};
use multisample::dsc::{build_tree, ClusteringTree, DscConfig, Node};
use multisample::msp::{self, build_basis, operation_count};
use multisample::oracle::{train_with_split, HoldoutSplit, Label, TreeConfig};
use multisample::theory::{brute_force_l1, compute_gap, l1_optimal_set, subset_error};
use multisample::{weighted_mean, Dataset, Point, RngHandle};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

/// `(dim, rows)` with `1..=max_n` rows of dimension `1..=max_dim`.
fn rows(max_dim: usize, max_n: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1..=max_dim).prop_flat_map(move |d| (Just(d), prop::collection::vec(prop::collection::vec(coord(), d), 1..=max_n)))
}

fn weighted_rows_of_dim(d: usize, max_n: usize) -> impl Strategy<Value = Dataset> {
    (prop::collection::vec(prop::collection::vec(coord(), d), 1..=max_n), prop::collection::vec(0.1..10.0f64, max_n))
        .prop_map(move |(r, w)| {
            let flat: Vec<f64> = r.iter().flatten().copied().collect();
            Dataset::with_weights(d, flat, w[..r.len()].to_vec(), "s").unwrap()
        })
}

fn weighted_rows(max_dim: usize, max_n: usize) -> impl Strategy<Value = Dataset> {
    (1..=max_dim).prop_flat_map(move |d| weighted_rows_of_dim(d, max_n))
}

/// Two weighted datasets of a common dimension.
fn weighted_pair(max_dim: usize, max_n: usize) -> impl Strategy<Value = (Dataset, Dataset)> {
    (1..=max_dim).prop_flat_map(move |d| (weighted_rows_of_dim(d, max_n), weighted_rows_of_dim(d, max_n)))
}

fn weight_vector(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001..1.0f64, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn weight_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=8usize).prop_flat_map(|k| (weight_vector(k), weight_vector(k)))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn mean_is_translation_equivariant(d in weighted_rows(4, 20), shift in prop::collection::vec(coord(), 4)) {
        let m = weighted_mean(&d).unwrap();
        let c = &shift[..d.dim()];
        let moved: Vec<f64> = d.rows().flat_map(|r| r.iter().zip(c).map(|(x, s)| x + s).collect::<Vec<_>>()).collect();
        let moved = Dataset::with_weights(d.dim(), moved, d.weights().to_vec(), "s").unwrap();
        let mm = weighted_mean(&moved).unwrap();
        for j in 0..d.dim() {
            prop_assert!((mm.coords[j] - (m.coords[j] + c[j])).abs() <= 1e-9 * (1.0 + m.coords[j].abs() + c[j].abs()));
        }
    }

    #[test]
    fn mean_ignores_weight_scale(d in weighted_rows(4, 20), factor in 0.01..100.0f64) {
        let a = weighted_mean(&d).unwrap();
        let b = weighted_mean(&d.scaled_weights(factor).unwrap()).unwrap();
        for (x, y) in a.coords.iter().zip(&b.coords) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn csv_roundtrip((dim, r) in rows(5, 30)) {
        let d = Dataset::from_rows(&r, "s").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_dataset(&path, &d).unwrap();
        let back = load_dataset(&path, "s").unwrap();
        prop_assert_eq!(back.dim(), dim);
        for (x, y) in d.coords().iter().zip(back.coords()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

/// Sample means in `dim` dimensions spanning an affine space of dimension
/// `rank` (generically), built from `m` random combinations of `rank + 1`
/// anchor points.
fn spanning_means(dim: usize, rank: usize, m: usize, seed: u64) -> Vec<Point> {
    use rand::Rng;
    let mut rng = RngHandle::new(seed, 0).rng();
    let corners: Vec<Vec<f64>> = (0..=rank).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    (0..m)
        .map(|_| {
            let w: Vec<f64> = (0..=rank).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            let c: Vec<f64> = (0..dim).map(|j| (0..=rank).map(|i| w[i] / s * corners[i][j]).sum()).collect();
            Point::new(c).unwrap()
        })
        .collect()
}

proptest! {
    #[test]
    fn msp_basis_is_orthonormal_and_non_expanding(
        (dim, r) in rows(8, 6).prop_filter("two means", |(_, r)| r.len() >= 2),
        x in prop::collection::vec(coord(), 8),
        y in prop::collection::vec(coord(), 8),
    ) {
        let means: Vec<Point> = r.into_iter().map(|c| Point::new(c).unwrap()).collect();
        let basis = build_basis(&means, 1e-6, None).unwrap();
        prop_assume!(!basis.is_degenerate());
        for (a, u) in basis.orthonormal_basis.iter().enumerate() {
            for (b, v) in basis.orthonormal_basis.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - expect).abs() <= 1e-9);
            }
        }
        prop_assert_eq!(basis.effective_rank, basis.orthonormal_basis.len());
        prop_assert!(basis.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let (x, y) = (&x[..dim], &y[..dim]);
        let (px, py) = (basis.project_point(x).unwrap(), basis.project_point(y).unwrap());
        prop_assert!(dist(&px, &py) <= dist(x, y) + 1e-9);
        // idempotence: project, reconstruct, project again
        let rx = basis.reconstruct(&px).unwrap();
        let px2 = basis.project_point(&rx).unwrap();
        for (a, b) in px.iter().zip(&px2) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        // every raw vector lies in the retained span up to truncation
        let scale = basis.singular_values.first().copied().unwrap_or(0.0);
        for rn in &basis.residual_norms {
            prop_assert!(*rn <= 1e-6 * scale + 1e-9);
        }
    }

    #[test]
    fn msp_rank_matches_affine_dimension(dim in 3..12usize, rank in 1..3usize, extra in 0..4usize, seed in any::<u64>()) {
        let means = spanning_means(dim, rank, rank + 1 + extra, seed);
        let basis = build_basis(&means, 1e-6, None).unwrap();
        prop_assert_eq!(basis.effective_rank, rank);
    }

    #[test]
    fn projection_preserves_mean((d, other) in weighted_pair(5, 25)) {
        let basis = msp::fit(&[d.clone(), other], &msp::MspConfig::default()).unwrap();
        prop_assume!(!basis.is_degenerate());
        let projected = msp::project(&basis, &d).unwrap();
        let a = weighted_mean(&projected).unwrap();
        let b = basis.project_point(&weighted_mean(&d).unwrap().coords).unwrap();
        for (x, y) in a.coords.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-7 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn operation_count_is_linear(dim in 1..1000usize, sizes in prop::collection::vec(1..10_000usize, 2..6)) {
        let total: usize = sizes.iter().sum();
        let m = sizes.len();
        prop_assert_eq!(operation_count(dim, &sizes), (dim * total + 2 * dim * (m - 1)) as u64);
        let doubled: Vec<usize> = sizes.iter().map(|s| 2 * s).collect();
        prop_assert_eq!(operation_count(dim, &doubled) - operation_count(dim, &sizes), (dim * total) as u64);
    }
}

/// Two 1-D samples with distinct coordinates.
fn distinct_pair() -> impl Strategy<Value = (Dataset, Dataset)> {
    (4..40usize, 4..40usize, any::<u64>()).prop_map(|(n1, n2, seed)| {
        use rand::seq::SliceRandom;
        let mut xs: Vec<f64> = (0..n1 + n2).map(|i| i as f64 * 0.5).collect();
        xs.shuffle(&mut RngHandle::new(seed, 0).rng());
        (
            Dataset::from_flat(1, xs[..n1].to_vec(), "a").unwrap(),
            Dataset::from_flat(1, xs[n1..].to_vec(), "b").unwrap(),
        )
    })
}

fn halves(n: usize) -> HoldoutSplit {
    HoldoutSplit {
        train: (0..n).filter(|i| i % 3 != 0).collect(),
        holdout: (0..n).filter(|i| i % 3 == 0).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_label_symmetry((s1, s2) in distinct_pair()) {
        // fully grown trees have pure leaves, so no label ties can arise
        let cfg = TreeConfig { max_depth: 64, min_leaf_weight: 0.0, holdout_fraction: 0.3 };
        let (h1, h2) = (halves(s1.len()), halves(s2.len()));
        let w2 = s1.len() as f64 / s2.len() as f64;
        let a = train_with_split(&s1, &s2, 1.0, w2, &cfg, &h1, &h2).unwrap();
        let b = train_with_split(&s2, &s1, w2, 1.0, &cfg, &h2, &h1).unwrap();
        prop_assert!((a.error_estimate - b.error_estimate).abs() <= 1e-12);
        for x in s1.rows().chain(s2.rows()) {
            prop_assert_eq!(a.classifier.predict(x), b.classifier.predict(x).flip());
        }
    }

    #[test]
    fn oracle_depth_and_range((s1, s2) in distinct_pair(), depth in 0..8usize, seed in any::<u64>()) {
        let cfg = TreeConfig { max_depth: depth, ..TreeConfig::default() };
        let out = multisample::oracle::train(&s1, &s2, 1.0, 1.0, &cfg, RngHandle::new(seed, 0)).unwrap();
        prop_assert!(out.classifier.depth() <= depth);
        prop_assert!((0.0..=1.0).contains(&out.error_estimate));
        for x in [-1e9, 0.0, 3.25, 1e9] {
            let l = out.classifier.predict(&[x]);
            prop_assert!(l == Label::Pos || l == Label::Neg);
        }
    }
}

fn leaf_paths(tree: &ClusteringTree, x: &[f64]) -> Vec<bool> {
    let mut path = Vec::new();
    let mut node = &tree.root;
    while let Node::Internal { classifier, neg_child, pos_child, .. } = node {
        let pos = classifier.decision(x) >= 0.0;
        path.push(pos);
        node = if pos { pos_child } else { neg_child };
    }
    path
}

fn check_nodes(node: &Node, tau: f64, depth: usize, max: usize) -> Result<(), TestCaseError> {
    prop_assert!(depth <= max);
    if let Node::Internal { error_estimate, neg_child, pos_child, classifier } = node {
        prop_assert!(*error_estimate < 0.5 - tau);
        prop_assert!(classifier.depth() <= classifier.training_config.max_depth);
        check_nodes(neg_child, tau, depth + 1, max)?;
        check_nodes(pos_child, tau, depth + 1, max)?;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dsc_tree_invariants(
        w in 0.05..0.95f64,
        n in 100..600usize,
        tau in 0.01..0.3f64,
        max_splits in 1..6usize,
        seed in any::<u64>(),
        probes in prop::collection::vec(-2.0..6.0f64, 20),
    ) {
        use multisample::mixture::{Component, MixtureSpec};
        let comps = vec![Component::Interval { lo: 0.0, hi: 1.0 }, Component::Interval { lo: 2.0, hi: 3.0 }, Component::Interval { lo: 3.5, hi: 4.0 }];
        let spec = MixtureSpec::new(vec![vec![w, (1.0 - w) / 2.0, (1.0 - w) / 2.0], vec![1.0 - w, w / 2.0, w / 2.0]], Some(comps)).unwrap();
        let (a, b) = multisample::theory::discrete_dsc_simulate(&spec, n, n, RngHandle::new(seed, 0)).unwrap();
        let cfg = DscConfig { tau, max_splits, ..DscConfig::default() };
        let tree = build_tree(&a.data, &b.data, &cfg, RngHandle::new(seed, 1)).unwrap();
        check_nodes(&tree.root, tau, 0, max_splits)?;
        let ids: Vec<usize> = tree.leaves().iter().map(|l| match l { Node::Leaf { leaf_id, .. } => *leaf_id, _ => unreachable!() }).collect();
        prop_assert_eq!(ids, (0..tree.num_leaves).collect::<Vec<_>>());
        for x in &probes {
            let leaf = tree.assign(&[*x]).unwrap();
            prop_assert!(leaf < tree.num_leaves);
        }
        // refinement: points sharing a path prefix of length k+1 share the prefix of length k
        for x in &probes {
            for y in &probes {
                let (px, py) = (leaf_paths(&tree, &[*x]), leaf_paths(&tree, &[*y]));
                for k in 0..px.len().min(py.len()) {
                    if px[..=k] == py[..=k] {
                        prop_assert_eq!(&px[..k], &py[..k]);
                    }
                }
                if px == py {
                    prop_assert_eq!(tree.assign(&[*x]).unwrap(), tree.assign(&[*y]).unwrap());
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn l1_value_matches_subset_search((p, q) in weight_pair()) {
        let (set, value) = l1_optimal_set(&p, &q).unwrap();
        let search = brute_force_l1(&p, &q, 1e-12).unwrap();
        prop_assert!((value - search.best_value).abs() <= 1e-12);
        prop_assert!(search.maximizers.contains(&set));
    }

    #[test]
    fn gap_is_symmetric((p, q) in weight_pair()) {
        let a = compute_gap(&p, &q).unwrap();
        let b = compute_gap(&q, &p).unwrap();
        prop_assert!((a.gap - b.gap).abs() <= 1e-15);
        prop_assert!((a.recommended_tau - a.gap / 8.0).abs() <= 1e-15);
    }

    #[test]
    fn error_equals_one_minus_l1_of_set((p, q) in weight_pair()) {
        let k = p.len();
        for mask in 0u32..(1 << k) {
            let a: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let d: f64 = a.iter().map(|&i| p[i] - q[i]).sum();
            prop_assert!((subset_error(&p, &q, &a).unwrap() + d - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn accuracy_is_permutation_invariant(
        truth in prop::collection::vec(0..4usize, 1..60),
        pred_seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        use rand::{Rng, seq::SliceRandom};
        let mut rng = RngHandle::new(pred_seed, 0).rng();
        let pred: Vec<usize> = truth.iter().map(|_| rng.random_range(0..5)).collect();
        let base = accuracy_best_assignment(&pred, &truth, 4).unwrap();
        let mut prng = RngHandle::new(perm_seed, 0).rng();
        let mut p1: Vec<usize> = (0..5).collect();
        p1.shuffle(&mut prng);
        let mut p2: Vec<usize> = (0..4).collect();
        p2.shuffle(&mut prng);
        let pred2: Vec<usize> = pred.iter().map(|c| p1[*c] + 10).collect();
        let truth2: Vec<usize> = truth.iter().map(|c| p2[*c]).collect();
        prop_assert_eq!(accuracy_best_assignment(&pred2, &truth2, 4).unwrap(), base);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn sign_test_is_a_decreasing_tail(trials in 1..300u64) {
        let mut prev = 1.0 + 1e-12;
        for w in 0..=trials {
            let p = sign_test_pvalue(w, trials).unwrap();
            prop_assert!(p <= prev + 1e-12 && p > 0.0);
            prev = p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lloyd_inertia_never_increases(d in weighted_rows(3, 40), k in 1..5usize, seed in any::<u64>()) {
        use rand::seq::IndexedRandom;
        let mut rng = RngHandle::new(seed, 0).rng();
        let idx: Vec<usize> = (0..d.len()).collect();
        let centers: Vec<Vec<f64>> = (0..k).map(|_| d.point(*idx.choose(&mut rng).unwrap()).to_vec()).collect();
        let run = lloyd(&d, centers, 100);
        for w in run.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-9);
        }
        prop_assert!(run.result.inertia >= 0.0);
    }

    #[test]
    fn kmeans_assigns_nearest_center(d in weighted_rows(3, 40), k in 1..4usize, seed in any::<u64>()) {
        match kmeans(&d, k, 3, 100, RngHandle::new(seed, 0)) {
            Ok(r) => {
                for (i, x) in d.rows().enumerate() {
                    let a = r.assignments[i];
                    let da = dist(x, &r.centers[a]);
                    for c in &r.centers {
                        prop_assert!(da <= dist(x, c) + 1e-9);
                    }
                }
                let again = kmeans(&d, k, 3, 100, RngHandle::new(seed, 0)).unwrap();
                prop_assert_eq!(again, r);
            }
            Err(e) => {
                let too_few = matches!(e, multisample::Error::TooFewDistinctPoints { .. });
                prop_assert!(too_few, "unexpected error {}", e);
            }
        }
    }

    #[test]
    fn pca_output_has_diagonal_covariance(d in weighted_rows(6, 40), t in 1..4usize) {
        prop_assume!(t <= d.dim());
        let Ok(p) = pca_projection(&d, t) else { return Ok(()); };
        let out = &p.data;
        let m = weighted_mean(out).unwrap().coords;
        let total = out.total_weight();
        let dims = out.dim();
        for a in 0..dims {
            for b in 0..dims {
                let cov: f64 = out.rows().enumerate().map(|(i, r)| out.weight(i) * (r[a] - m[a]) * (r[b] - m[b])).sum::<f64>() / total;
                if a == b {
                    prop_assert!((cov - p.eigenvalues[a]).abs() <= 1e-6 * p.eigenvalues[0].max(1.0));
                } else {
                    prop_assert!(cov.abs() <= 1e-6 * p.eigenvalues[0].max(1.0));
                }
            }
        }
        prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn random_projection_is_deterministic(d in weighted_rows(6, 20), seed in any::<u64>()) {
        let a = random_projection(&d, 1, RngHandle::new(seed, 1)).unwrap();
        let b = random_projection(&d, 1, RngHandle::new(seed, 1)).unwrap();
        prop_assert_eq!(a, b);
    }
}
