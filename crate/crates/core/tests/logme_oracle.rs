use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specprobe_core::logme::{logme_score, LogMEResult};
use specprobe_core::FeatureMatrix;

mod oracles;
use oracles::{direct_evidence, grid_max_evidence, grid_step, local_max_evidence, one_hot};

fn random_instance(seed: u64, n: usize, d: usize, classes: u32) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    // every class present at least once
    let mut labels: Vec<u32> = (0..n).map(|i| (i as u32) % classes).collect();
    labels.shuffle(&mut rng);
    FeatureMatrix::from_dmatrix(&x, classes, labels).unwrap()
}

const GRID_POINTS: usize = 200;
const GRID_LO: f64 = 1e-6;
const GRID_HI: f64 = 1e6;

/// Checks each class's fixed point against the coarse grid and a fine local
/// grid. Returns the largest gap to the coarse grid maximum.
fn check_against_grids(f: &FeatureMatrix, result: &LogMEResult) -> f64 {
    let x = f.to_dmatrix();
    let step = grid_step(GRID_POINTS, GRID_LO, GRID_HI);
    let mut worst = 0.0f64;
    for ce in &result.per_class {
        let y = one_hot(f.labels(), ce.class);
        let at_fixed_point = direct_evidence(&x, &y, ce.alpha, ce.beta);
        assert!((at_fixed_point - ce.evidence).abs() < 1e-9, "evidence formula mismatch");

        let (grid, _, _) = grid_max_evidence(&x, &y, GRID_POINTS, GRID_LO, GRID_HI);
        assert!(ce.evidence >= grid - 1e-12, "grid node beats fixed point: {grid} > {}", ce.evidence);
        if ce.converged {
            let local = local_max_evidence(&x, &y, ce.alpha, ce.beta, step, 101);
            assert!(ce.evidence >= local - 1e-10, "nearby point beats fixed point: {local} > {}", ce.evidence);
        }

        // A maximum between nodes can be up to half a step from the nearest
        // node along each axis. The per-sample curvature of the evidence in
        // log space is at most about one, so this bounds the coarse-grid gap.
        assert!(ce.evidence - grid <= 0.25 * step * step, "gap {}", ce.evidence - grid);
        worst = worst.max(ce.evidence - grid);
    }
    worst
}

#[test]
fn eight_by_three_fixed_point_is_grid_maximum() {
    let f = random_instance(3, 8, 3, 2);
    let r = logme_score(&f).unwrap();
    assert!(r.converged);
    check_against_grids(&f, &r);
}

#[test]
fn random_instances_reach_grid_maximum() {
    let mut sizes = ChaCha8Rng::seed_from_u64(2024);
    for seed in 0..20 {
        let n = sizes.random_range(8..=16);
        let d = sizes.random_range(2..=8);
        let classes = sizes.random_range(2..=3);
        let f = random_instance(100 + seed, n, d, classes);
        check_against_grids(&f, &logme_score(&f).unwrap());
    }
    // fewer samples than dimensions
    let f = random_instance(7, 6, 8, 2);
    check_against_grids(&f, &logme_score(&f).unwrap());
}

#[test]
fn sample_and_feature_permutations_leave_score_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let f = random_instance(seed, 40, 6, 3);
        let base = logme_score(&f).unwrap().score;

        let mut order: Vec<usize> = (0..f.n()).collect();
        order.shuffle(&mut rng);
        let rows = f.select_rows(&order).unwrap();
        assert!((logme_score(&rows).unwrap().score - base).abs() < 1e-9);

        let mut cols: Vec<usize> = (0..f.d()).collect();
        cols.shuffle(&mut rng);
        let x = f.to_dmatrix();
        let permuted = DMatrix::from_fn(f.n(), f.d(), |i, j| x[(i, cols[j])]);
        let g = FeatureMatrix::from_dmatrix(&permuted, f.num_classes(), f.labels().to_vec()).unwrap();
        assert!((logme_score(&g).unwrap().score - base).abs() < 1e-9);
    }
}

#[test]
fn one_hot_features_beat_shuffled_labels() {
    let (n, c) = (60usize, 3u32);
    let mut wins = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<u32> = (0..n).map(|i| (i as u32) % c).collect();
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut rng);
        let x = DMatrix::from_fn(n, c as usize, |i, j| if labels[i] == j as u32 { 1.0 } else { 0.0 });
        let informative = FeatureMatrix::from_dmatrix(&x, c, labels).unwrap();
        let scrambled = FeatureMatrix::from_dmatrix(&x, c, shuffled).unwrap();
        if logme_score(&informative).unwrap().score > logme_score(&scrambled).unwrap().score {
            wins += 1;
        }
    }
    assert_eq!(wins, 20);
}

#[test]
fn repeated_scoring_is_identical() {
    let f = random_instance(9, 30, 5, 4);
    assert_eq!(logme_score(&f).unwrap(), logme_score(&f).unwrap());
}
