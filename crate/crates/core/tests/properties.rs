mod common;

use common::*;
use msm_core::model::ModelFamily;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rows_sum_to_one_competing_risks(p in params(ModelFamily::CompetingRisks), cov in covariates(),
                                       s in 0.0f64..4.0, dt in 0.0f64..6.0) {
        rows_sum_to_one_cr(&p, &cov, s, dt)?;
    }

    #[test]
    fn rows_sum_to_one_illness_death(p in params(ModelFamily::IllnessDeath), cov in covariates(),
                                     t in 0.01f64..8.0, t12 in 0.0f64..3.0) {
        rows_sum_to_one_id(&p, &cov, t, t12)?;
    }

    #[test]
    fn cif_is_nondecreasing(p in params(ModelFamily::CompetingRisks), cov in covariates(),
                            t1 in 0.0f64..8.0, dt in 0.0f64..4.0) {
        cif_nondecreasing(&p, &cov, t1, dt)?;
    }

    #[test]
    fn survival_is_nonincreasing(p in params(ModelFamily::IllnessDeath), cov in covariates(),
                                 t1 in 0.0f64..10.0, dt in 0.0f64..10.0) {
        survival_nonincreasing(&p, &cov, t1, dt)?;
    }

    #[test]
    fn hazard_is_derivative_of_cumulative(v in transition_values(), cov in covariates(), t in 0.01f64..10.0) {
        hazard_matches_derivative(v, &cov, t)?;
    }

    #[test]
    fn hazards_proportional_over_time(v in transition_values(), c1 in covariates(), c2 in covariates()) {
        hazards_proportional(v, &c1, &c2)?;
    }

    #[test]
    fn node_doubling_is_stable(p in params(ModelFamily::IllnessDeath), cov in covariates(), t in 0.01f64..10.0) {
        node_doubling_stable(&p, &cov, t)?;
    }

    #[test]
    fn dataset_csv_round_trip(case in round_trip_case()) {
        csv_round_trip(&case)?;
    }

    #[test]
    fn seed_reproduces_draws(seed in any::<u64>(), sim_seed in any::<u64>(), family in family()) {
        same_seed_same_draws(seed, sim_seed, family)?;
    }
}
