//! Strategies and property checks shared by the `properties` suite and the
//! acceptance run.

#![allow(dead_code)]

use msm_core::bayes::{sample_posterior, ChainConfig, PriorSpec};
use msm_core::hazard::{all_causes_survival, cumulative_hazard, hazard_at, CovariateVector, Transition, TransitionParams};
use msm_core::io::{read_dataset, write_dataset, AgeCenter};
use msm_core::model::{reference_posterior_means, ModelFamily, ParameterSet};
use msm_core::outcome::{
    cumulative_incidence, evaluate_many, transition_probabilities_cr, transition_probabilities_id, Functional,
    IdProbabilities, IdStart, Quadrature, QuadratureConfig,
};
use msm_core::simulate::{simulate_cohort, Censoring, SimulationSpec};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

pub fn transition_values() -> impl Strategy<Value = [f64; 4]> {
    (0.3f64..3.0, -6.0f64..2.0, -1.0f64..1.0, -0.1f64..0.1).prop_map(|(a, ll, b1, b2)| [a, ll.exp(), b1, b2])
}

pub fn params(family: ModelFamily) -> impl Strategy<Value = ParameterSet> {
    let n = family.transitions().len();
    prop::collection::vec(transition_values(), n)
        .prop_map(move |v| ParameterSet::from_values(family, &v.concat()).unwrap())
}

pub fn covariates() -> impl Strategy<Value = CovariateVector> {
    (any::<bool>(), 65.0f64..105.0).prop_map(|(w, age)| CovariateVector::from_age(w, age, 83.4).unwrap())
}

pub fn family() -> impl Strategy<Value = ModelFamily> {
    prop_oneof![Just(ModelFamily::CompetingRisks), Just(ModelFamily::IllnessDeath)]
}

pub fn quad(nodes: usize) -> Quadrature {
    Quadrature::new(QuadratureConfig::default().with_nodes(nodes)).unwrap()
}

/// p13 of the illness-death model by direct quadrature: death before
/// refracture plus refracture followed by death before `t`.
pub fn id_p13_direct(p: &ParameterSet, cov: &CovariateVector, t: f64, q: &Quadrature) -> f64 {
    let fr = p.transition(Transition::Refracture);
    let fd = p.transition(Transition::Death);
    let rd = p.transition(Transition::DeathAfterRefracture);
    let direct = cumulative_incidence(p, cov, Transition::Death, t, q).unwrap();
    let via_refracture = q
        .integrate(0.0, t, |u, rem| {
            if u <= 0.0 {
                return 0.0;
            }
            let stay = (-(fr.cumulative_hazard(cov, u) + fd.cumulative_hazard(cov, u))).exp();
            stay * fr.hazard(cov, u).unwrap() * -(-rd.cumulative_hazard(cov, rem)).exp_m1()
        })
        .unwrap();
    direct + via_refracture
}

pub fn rows_sum_to_one_cr(p: &ParameterSet, cov: &CovariateVector, s: f64, dt: f64) -> Check {
    let r = transition_probabilities_cr(p, cov, s, s + dt, &quad(64)).unwrap();
    prop_assert!((r.p11 + r.p12 + r.p13 - 1.0).abs() < 1e-6, "{r:?}");
    Ok(())
}

pub fn rows_sum_to_one_id(p: &ParameterSet, cov: &CovariateVector, t: f64, t12: f64) -> Check {
    let q = quad(64);
    let p11 = transition_probabilities_cr(&p.restrict(ModelFamily::CompetingRisks).unwrap(), cov, 0.0, t, &q)
        .unwrap()
        .p11;
    let p12 = match transition_probabilities_id(p, cov, IdStart::Initial, 0.0, t, &q).unwrap() {
        IdProbabilities::FromInitial(r) => r.p12,
        IdProbabilities::FromRefracture(_) => unreachable!(),
    };
    let p13 = id_p13_direct(p, cov, t, &q);
    prop_assert!((p11 + p12 + p13 - 1.0).abs() < 1e-6, "{p11} {p12} {p13}");
    match transition_probabilities_id(p, cov, IdStart::Refractured { t12 }, t12, t12 + t, &q).unwrap() {
        IdProbabilities::FromRefracture(r) => {
            prop_assert!((r.p22 + r.p23 - 1.0).abs() < 1e-6);
            prop_assert!((0.0..=1.0).contains(&r.p22));
        }
        IdProbabilities::FromInitial(_) => unreachable!(),
    }
    Ok(())
}

pub fn cif_nondecreasing(p: &ParameterSet, cov: &CovariateVector, t1: f64, dt: f64) -> Check {
    let q = quad(64);
    for cause in [Transition::Refracture, Transition::Death] {
        let a = cumulative_incidence(p, cov, cause, t1, &q).unwrap();
        let b = cumulative_incidence(p, cov, cause, t1 + dt, &q).unwrap();
        prop_assert!(a <= b + 1e-12, "{cause}: {a} > {b}");
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
    }
    Ok(())
}

pub fn survival_nonincreasing(p: &ParameterSet, cov: &CovariateVector, t1: f64, dt: f64) -> Check {
    let first = [p.transition(Transition::Refracture), p.transition(Transition::Death)];
    let a = all_causes_survival(first, cov, t1).unwrap();
    let b = all_causes_survival(first, cov, t1 + dt).unwrap();
    prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
    prop_assert!(b <= a);
    for tp in p.iter() {
        prop_assert!(cumulative_hazard(tp, cov, t1) <= cumulative_hazard(tp, cov, t1 + dt));
    }
    Ok(())
}

pub fn hazard_matches_derivative(v: [f64; 4], cov: &CovariateVector, t: f64) -> Check {
    let tp = TransitionParams::new(Transition::Death, v[0], v[1], v[2], v[3]).unwrap();
    let eps = 1e-5 * t;
    let fd = (cumulative_hazard(&tp, cov, t + eps) - cumulative_hazard(&tp, cov, t - eps)) / (2.0 * eps);
    let h = hazard_at(&tp, cov, t).unwrap();
    prop_assert!(((fd - h) / h).abs() < 1e-4, "fd {fd} h {h}");
    Ok(())
}

pub fn hazards_proportional(v: [f64; 4], c1: &CovariateVector, c2: &CovariateVector) -> Check {
    let tp = TransitionParams::new(Transition::Refracture, v[0], v[1], v[2], v[3]).unwrap();
    let ratios: Vec<f64> = [0.1, 0.5, 1.0, 2.0, 5.0, 9.0]
        .iter()
        .map(|&t| hazard_at(&tp, c1, t).unwrap() / hazard_at(&tp, c2, t).unwrap())
        .collect();
    let r0 = ratios[0];
    prop_assert!(ratios.iter().all(|r| ((r - r0) / r0).abs() < 1e-12), "{ratios:?}");
    Ok(())
}

pub fn node_doubling_stable(p: &ParameterSet, cov: &CovariateVector, t: f64) -> Check {
    let fs = [
        Functional::Cif(Transition::Refracture),
        Functional::Cif(Transition::Death),
        Functional::P12,
        Functional::P13,
    ];
    let a = evaluate_many(p, &fs, cov, t, &quad(64)).unwrap();
    let b = evaluate_many(p, &fs, cov, t, &quad(128)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        prop_assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
    Ok(())
}

pub struct RoundTripCase {
    pub family: ModelFamily,
    pub values: Vec<[f64; 4]>,
    pub n: usize,
    pub seed: u64,
    pub c: f64,
    pub staggered: bool,
}

pub fn round_trip_case() -> impl Strategy<Value = RoundTripCase> {
    (
        family(),
        prop::collection::vec(transition_values(), 3),
        0usize..60,
        any::<u64>(),
        0.5f64..10.0,
        any::<bool>(),
    )
        .prop_map(|(family, values, n, seed, c, staggered)| RoundTripCase {
            family,
            values,
            n,
            seed,
            c,
            staggered,
        })
}

impl std::fmt::Debug for RoundTripCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} n={} seed={} c={} staggered={} {:?}",
            self.family.short_name(),
            self.n,
            self.seed,
            self.c,
            self.staggered,
            self.values
        )
    }
}

pub fn csv_round_trip(case: &RoundTripCase) -> Check {
    let family = case.family;
    let truth = ParameterSet::from_values(family, &case.values.concat()[..4 * family.transitions().len()]).unwrap();
    let mut spec = SimulationSpec::new(family, truth, case.n, case.seed);
    spec.censoring = if case.staggered {
        Censoring::Staggered {
            accrual: case.c / 2.0,
            study_end: case.c,
        }
    } else {
        Censoring::Administrative(case.c)
    };
    let data = simulate_cohort(&spec).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &data, &[]).unwrap();
    let back = read_dataset(buf.as_slice(), "mem", AgeCenter::Fixed(spec.age_center)).unwrap();
    prop_assert_eq!(back.dataset, data);
    Ok(())
}

pub fn same_seed_same_draws(seed: u64, sim_seed: u64, family: ModelFamily) -> Check {
    let spec = SimulationSpec::new(family, reference_posterior_means(family), 40, sim_seed);
    let data = simulate_cohort(&spec).unwrap();
    prop_assert_eq!(&data, &simulate_cohort(&spec).unwrap());
    let config = ChainConfig {
        n_chains: 2,
        n_iterations: 40,
        n_burnin: 20,
        seed,
        ..ChainConfig::default()
    };
    let prior = PriorSpec::default_for(family);
    let a = sample_posterior(family, &data, &prior, &config).unwrap();
    let b = sample_posterior(family, &data, &prior, &config).unwrap();
    prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    Ok(())
}
