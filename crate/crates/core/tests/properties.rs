use cycle_mld::intersect::enumerate_points;
use cycle_mld::mle::{solve_mle, MleResult};
use cycle_mld::model::{conjugate_sign, CycleModel, SignDiag, SymMatrix};
use cycle_mld::poly::{p_poly, Polynomial, DEFAULT_ROOT_TOL};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use proptest::prelude::*;

fn poly_strategy() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(-20i64..=20, 0..7).prop_map(|c| Polynomial::from_i64(&c))
}

fn pd_strategy(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |w| {
        let w = DMatrix::from_vec(n, n, w);
        SymMatrix::from_real(&(&w * w.transpose() + DMatrix::identity(n, n) * 0.3))
    })
}

fn fit(s: &SymMatrix) -> MleResult {
    solve_mle(s, 1e-11, 200).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ring_laws(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a - &b) + &b, a.clone());
        prop_assert_eq!(&a * &b, &b * &a);
    }

    #[test]
    fn division_by_monic_reconstructs(a in poly_strategy(), b in poly_strategy()) {
        let monic = &b + &Polynomial::monomial(1, b.degree().map_or(0, |d| d + 1));
        let (q, r) = a.div_rem(&monic).unwrap();
        prop_assert_eq!(&(&q * &monic) + &r, a);
        prop_assert!(r.degree().is_none_or(|d| d < monic.degree().unwrap()));
    }

    #[test]
    fn p_poly_is_even_with_unit_constant(k in 0i64..40) {
        let p = p_poly(k).unwrap();
        prop_assert!(p.is_even());
        prop_assert_eq!(p.coeff(0), BigInt::from(1));
    }

    #[test]
    fn mle_is_sign_equivariant(s in pd_strategy(5), mask in 0u64..32) {
        let d = SignDiag::from_mask(5, mask);
        let direct = fit(&s).k_hat;
        let flipped = fit(&conjugate_sign(&s, &d).unwrap()).k_hat;
        let expected = conjugate_sign(&direct, &d).unwrap();
        prop_assert!(flipped.distance(&expected) <= 1e-8 * expected.frobenius());
    }

    #[test]
    fn mle_is_idempotent(s in pd_strategy(6)) {
        let first = fit(&s);
        let second = fit(&first.sigma_hat);
        prop_assert!(second.k_hat.distance(&first.k_hat) <= 1e-8 * first.k_hat.frobenius());
    }

    #[test]
    fn mle_completes_on_support(s in pd_strategy(6)) {
        let r = fit(&s);
        let model = CycleModel::new(6).unwrap();
        for (i, j) in model.support() {
            prop_assert!((r.sigma_hat.get(i, j) - s.get(i, j)).norm() <= 1e-8 * s.max_abs());
        }
        for (i, j) in model.off_support() {
            prop_assert_eq!(r.k_hat.get(i, j).norm(), 0.0);
        }
        prop_assert!(r.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0)));
    }
}

#[test]
fn census_is_independent_of_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| enumerate_points(8, DEFAULT_ROOT_TOL).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
}
