use cycle_mld::intersect::{enumerate_points, ml_degree_formula};
use cycle_mld::mle::{
    critical_points_oracle, critical_points_oracle_covariance, generic_s, oracle_generic, Formulation,
};
use cycle_mld::model::SymMatrix;
use cycle_mld::poly::DEFAULT_ROOT_TOL;
use num_traits::ToPrimitive;

fn formula(n: usize) -> usize {
    ml_degree_formula(n).unwrap().to_usize().unwrap()
}

#[test]
fn formulations_agree_on_generic_data() {
    for n in [4usize, 5] {
        let s = generic_s(n, 77);
        let k_form = critical_points_oracle(n, &s, 800, 1, 1e-12).unwrap();
        let sigma_form = critical_points_oracle_covariance(n, &s, 800, 2, 1e-12).unwrap();
        assert_eq!(k_form.distinct_critical_points, formula(n));
        assert_eq!(sigma_form.distinct_critical_points, formula(n));
        // inverting each K solution lands on a covariance-formulation solution
        for k in &k_form.points {
            let sigma = SymMatrix::from_dmatrix(&k.to_dmatrix().try_inverse().unwrap());
            let near = sigma_form
                .points
                .iter()
                .any(|p| p.distance(&sigma) <= 1e-6 * p.frobenius());
            assert!(near, "n = {n}");
        }
    }
}

#[test]
fn concentration_oracle_at_identity_stays_in_census() {
    // the checkerboards are singular, so no finite K reaches them; whatever
    // is found must still be a census point
    let r = critical_points_oracle(4, &SymMatrix::identity(4), 300, 0, 1e-12).unwrap();
    assert!(r.distinct_critical_points <= formula(4));
    let census = enumerate_points(4, DEFAULT_ROOT_TOL).unwrap();
    for k in &r.points {
        let sigma = SymMatrix::from_dmatrix(&k.to_dmatrix().try_inverse().unwrap());
        assert!(census.points.iter().any(|p| p.matrix.distance(&sigma) < 1e-6));
    }
}

#[test]
fn six_cycle_count_is_a_lower_bound() {
    let r = oracle_generic(6, 4000, 3, 1e-12, Formulation::Concentration).unwrap();
    eprintln!("n = 6 oracle: {} of {}", r.distinct_critical_points, formula(6));
    assert!(r.distinct_critical_points <= formula(6));
    assert!(r.distinct_critical_points + 3 >= formula(6));
    assert!(r.max_residual <= 1e-9);
}
