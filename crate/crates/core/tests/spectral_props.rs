use nalgebra::DMatrix;
use proptest::prelude::*;
use specprobe_core::spectral::{project_split, select_energy_rank, split_components, thin_svd};

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

mod oracles;
use oracles::minimal_k_scan;

fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (8usize..=128, 4usize..=256).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f64..10.0, n * d)
            .prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
    })
}

fn low_rank_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=96, 2usize..=160)
        .prop_flat_map(|(n, d)| (Just(n), Just(d), 1usize..=n.min(d)))
        .prop_flat_map(|(n, d, r)| {
            (
                prop::collection::vec(-10.0f64..10.0, n * r),
                prop::collection::vec(-10.0f64..10.0, r * d),
            )
                .prop_map(move |(a, b)| DMatrix::from_row_slice(n, r, &a) * DMatrix::from_row_slice(r, d, &b))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn svd_factor_invariants(f in matrix_strategy()) {
        let s = thin_svd(&f).unwrap();
        let r = f.nrows().min(f.ncols());
        prop_assert_eq!(s.sigma.len(), r);
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.sigma.iter().all(|&x| x >= 0.0));
        let eye = DMatrix::<f64>::identity(r, r);
        prop_assert!(max_abs(&(s.u.transpose() * &s.u - &eye)) < 1e-5);
        prop_assert!(max_abs(&(s.v.transpose() * &s.v - &eye)) < 1e-5);
        let rec = s.reconstruct(0..r);
        prop_assert!(frob(&(&rec - &f)) / frob(&f) < 1e-5);
    }

    #[test]
    fn low_rank_svd_reconstructs(f in low_rank_strategy()) {
        let s = thin_svd(&f).unwrap();
        let r = s.sigma.len();
        let eye = DMatrix::<f64>::identity(r, r);
        prop_assert!(max_abs(&(s.v.transpose() * &s.v - &eye)) < 1e-10);
        prop_assert!(frob(&(s.reconstruct(0..r) - &f)) / frob(&f) < 1e-10);
    }

    #[test]
    fn split_invariants(f in matrix_strategy()) {
        let s = split_components(&f, 0.8).unwrap();
        let norm = frob(&f);
        prop_assert!(frob(&(&s.main + &s.residual - &f)) / norm < 1e-4);
        prop_assert!(s.main.dot(&s.residual).abs() <= 1e-4 * norm * norm);
        prop_assert_eq!(s.k, minimal_k_scan(&s.factors.sigma, 0.8));
        let total: f64 = s.factors.sigma.iter().sum();
        prop_assert!(s.factors.sigma[..s.k].iter().sum::<f64>() / total >= 0.8);
        if s.k > 1 {
            prop_assert!(s.factors.sigma[..s.k - 1].iter().sum::<f64>() / total < 0.8);
        }
        // leading singular values of F_m are σ[..k]
        let sm = thin_svd(&s.main).unwrap();
        for i in 0..s.k {
            let want = s.factors.sigma[i];
            prop_assert!((sm.sigma[i] - want).abs() <= 1e-5 * want.max(1e-12));
        }
    }

    #[test]
    fn projection_reproduces_main(f in matrix_strategy()) {
        let s = split_components(&f, 0.8).unwrap();
        let (main, resid) = project_split(&s.factors.v, s.k, &f).unwrap();
        prop_assert!(frob(&(&main - &s.main)) / frob(&f) < 1e-4);
        prop_assert!(max_abs(&(&main + &resid - &f)) < 1e-9);
    }

    #[test]
    fn scale_equivariance(f in matrix_strategy(), c in 0.01f64..100.0) {
        let a = split_components(&f, 0.8).unwrap();
        let b = split_components(&(&f * c), 0.8).unwrap();
        prop_assert_eq!(a.k, b.k);
        prop_assert!(frob(&(&b.main - &a.main * c)) / (c * frob(&f)) < 1e-6);
    }

    #[test]
    fn rank_rule_matches_scan(mut sigma in prop::collection::vec(0.0f64..5.0, 1..40), t in 0.05f64..=1.0) {
        sigma.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sigma[0] > 0.0);
        prop_assert_eq!(select_energy_rank(&sigma, t).unwrap(), minimal_k_scan(&sigma, t));
    }
}

#[test]
fn training_row_projects_like_split() {
    // rank-2 matrix in R^{6x4}: nothing lives beyond r
    let f = DMatrix::from_fn(6, 4, |i, j| (i as f64 + 1.0) * (j as f64) + ((i * j) % 3) as f64);
    let s = split_components(&f, 0.8).unwrap();
    let row = f.rows(2, 1).into_owned();
    let (m, r) = s.project(&row).unwrap();
    assert!(max_abs(&(&m - s.main.rows(2, 1))) < 1e-4);
    assert!(max_abs(&(&r - s.residual.rows(2, 1))) < 1e-4);
}
