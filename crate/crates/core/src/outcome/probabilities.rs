//! Cumulative incidences and transition probabilities for fixed parameters.

use crate::error::{Error, Result};
use crate::hazard::{linear_predictor, CovariateVector, Transition, TransitionParams};
use crate::model::{ModelFamily, ParameterSet};
use crate::outcome::quadrature::Quadrature;

/// A transition's hazard with covariates folded in.
#[derive(Debug, Clone, Copy)]
struct Rate {
    shape: f64,
    log_shape: f64,
    /// `log(lambda) + beta' x`
    log_rate: f64,
    rate: f64,
}

impl Rate {
    fn new(tp: &TransitionParams, cov: &CovariateVector) -> Self {
        let log_rate = tp.scale().ln() + linear_predictor(&tp.coeffs, cov);
        Self {
            shape: tp.shape(),
            log_shape: tp.shape().ln(),
            log_rate,
            rate: log_rate.exp(),
        }
    }

    fn cumulative(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            self.rate * u.powf(self.shape)
        }
    }

    fn log_hazard(&self, u: f64) -> f64 {
        self.log_shape + self.log_rate + (self.shape - 1.0) * u.ln()
    }
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite()) || s < 0.0 {
        return Err(Error::InvalidParameter(format!("times must be finite and nonnegative, got s={s}, t={t}")));
    }
    if s > t {
        return Err(Error::InvalidParameter(format!("start time {s} exceeds end time {t}")));
    }
    Ok(())
}

fn first_event_rates(params: &ParameterSet, cov: &CovariateVector) -> (Rate, Rate) {
    (
        Rate::new(params.transition(Transition::Refracture), cov),
        Rate::new(params.transition(Transition::Death), cov),
    )
}

/// `int_s^t p11(s, u) h_cause(u) du`.
fn leave_initial_by(
    fr: Rate,
    fd: Rate,
    cause: Rate,
    s: f64,
    t: f64,
    quad: &Quadrature,
) -> Result<f64> {
    let base = fr.cumulative(s) + fd.cumulative(s);
    quad.integrate(s, t, |u, _| {
        if u <= 0.0 {
            return 0.0;
        }
        (cause.log_hazard(u) - (fr.cumulative(u) + fd.cumulative(u) - base)).exp()
    })
}

fn cause_rate(params: &ParameterSet, cov: &CovariateVector, cause: Transition) -> Result<Rate> {
    match cause {
        Transition::Refracture | Transition::Death => Ok(Rate::new(params.transition(cause), cov)),
        Transition::DeathAfterRefracture => Err(Error::InvalidParameter(
            "cumulative incidence is defined for transitions out of the initial state".into(),
        )),
    }
}

/// Probability of leaving the initial state through `cause` by time `t`.
pub fn cumulative_incidence(
    params: &ParameterSet,
    cov: &CovariateVector,
    cause: Transition,
    t: f64,
    quad: &Quadrature,
) -> Result<f64> {
    check_times(0.0, t)?;
    let rate = cause_rate(params, cov, cause)?;
    let (fr, fd) = first_event_rates(params, cov);
    leave_initial_by(fr, fd, rate, 0.0, t, quad)
}

/// Occupation probabilities at `t` for a subject in the initial state at `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FromInitial {
    pub p11: f64,
    pub p12: f64,
    pub p13: f64,
}

/// Occupation probabilities at `t` for a subject in the refracture state at `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FromRefracture {
    pub p22: f64,
    pub p23: f64,
}

fn stay_initial(fr: Rate, fd: Rate, s: f64, t: f64) -> f64 {
    (-((fr.cumulative(t) - fr.cumulative(s)) + (fd.cumulative(t) - fd.cumulative(s)))).exp()
}

/// Probability of remaining in the initial state over `(s, t]`, identical
/// under both families.
pub fn stay_probability(params: &ParameterSet, cov: &CovariateVector, s: f64, t: f64) -> Result<f64> {
    check_times(s, t)?;
    let (fr, fd) = first_event_rates(params, cov);
    Ok(stay_initial(fr, fd, s, t))
}

/// Competing-risks transition probabilities; both exits computed by quadrature.
pub fn transition_probabilities_cr(
    params: &ParameterSet,
    cov: &CovariateVector,
    s: f64,
    t: f64,
    quad: &Quadrature,
) -> Result<FromInitial> {
    check_times(s, t)?;
    let (fr, fd) = first_event_rates(params, cov);
    Ok(FromInitial {
        p11: stay_initial(fr, fd, s, t),
        p12: leave_initial_by(fr, fd, fr, s, t, quad)?,
        p13: leave_initial_by(fr, fd, fd, s, t, quad)?,
    })
}

/// Where an illness-death subject is at the start time `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdStart {
    Initial,
    /// In the refracture state since time `t12 <= s`.
    Refractured { t12: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdProbabilities {
    FromInitial(FromInitial),
    FromRefracture(FromRefracture),
}

/// Illness-death transition probabilities with the post-refracture clock
/// reset at refracture; `p13` and `p23` come from the complements.
pub fn transition_probabilities_id(
    params: &ParameterSet,
    cov: &CovariateVector,
    start: IdStart,
    s: f64,
    t: f64,
    quad: &Quadrature,
) -> Result<IdProbabilities> {
    check_times(s, t)?;
    params.ensure_family(ModelFamily::IllnessDeath)?;
    let rd = Rate::new(params.transition(Transition::DeathAfterRefracture), cov);
    match start {
        IdStart::Refractured { t12 } => {
            if !(t12.is_finite() && t12 >= 0.0 && t12 <= s) {
                return Err(Error::InvalidParameter(format!(
                    "refracture time {t12} must lie in [0, s = {s}]"
                )));
            }
            let p22 = (-(rd.cumulative(t - t12) - rd.cumulative(s - t12))).exp();
            Ok(IdProbabilities::FromRefracture(FromRefracture { p22, p23: 1.0 - p22 }))
        }
        IdStart::Initial => {
            let (fr, fd) = first_event_rates(params, cov);
            let p11 = stay_initial(fr, fd, s, t);
            let base = fr.cumulative(s) + fd.cumulative(s);
            let p12 = quad.integrate(s, t, |u, remaining| {
                if u <= 0.0 {
                    return 0.0;
                }
                (fr.log_hazard(u) - (fr.cumulative(u) + fd.cumulative(u) - base) - rd.cumulative(remaining)).exp()
            })?;
            Ok(IdProbabilities::FromInitial(FromInitial {
                p11,
                p12,
                p13: 1.0 - p11 - p12,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_posterior_means, REFERENCE_AGE_CENTER};
    use crate::outcome::quadrature::QuadratureConfig;

    fn quad() -> Quadrature {
        Quadrature::new(QuadratureConfig::default()).unwrap()
    }

    fn profile(woman: bool, age: f64) -> CovariateVector {
        CovariateVector::from_age(woman, age, REFERENCE_AGE_CENTER).unwrap()
    }

    #[test]
    fn one_year_incidence_women_70() {
        let cr = reference_posterior_means(ModelFamily::CompetingRisks);
        let x = profile(true, 70.0);
        let fr = cumulative_incidence(&cr, &x, Transition::Refracture, 1.0, &quad()).unwrap();
        let fd = cumulative_incidence(&cr, &x, Transition::Death, 1.0, &quad()).unwrap();
        assert!((fr - 0.0196).abs() < 0.0005, "{fr}");
        assert!((fd - 0.0736).abs() < 0.001, "{fd}");
        assert_eq!(cumulative_incidence(&cr, &x, Transition::Refracture, 0.0, &quad()).unwrap(), 0.0);
        assert!(cumulative_incidence(&cr, &x, Transition::DeathAfterRefracture, 1.0, &quad()).is_err());
    }

    #[test]
    fn death_after_refracture_one_year() {
        let id = reference_posterior_means(ModelFamily::IllnessDeath);
        let start = IdStart::Refractured { t12: 0.0 };
        let p23 = |woman, age| match transition_probabilities_id(&id, &profile(woman, age), start, 0.0, 1.0, &quad()).unwrap() {
            IdProbabilities::FromRefracture(r) => r.p23,
            _ => unreachable!(),
        };
        assert!((p23(true, 70.0) - 0.1477).abs() < 0.003);
        assert!((p23(false, 90.0) - 0.5503).abs() < 0.005);
    }

    #[test]
    fn degenerate_intervals() {
        let id = reference_posterior_means(ModelFamily::IllnessDeath);
        let x = profile(false, 80.0);
        let r = transition_probabilities_id(&id, &x, IdStart::Refractured { t12: 0.5 }, 1.5, 1.5, &quad()).unwrap();
        assert_eq!(r, IdProbabilities::FromRefracture(FromRefracture { p22: 1.0, p23: 0.0 }));
        let cr = id.restrict(ModelFamily::CompetingRisks).unwrap();
        let r = transition_probabilities_cr(&cr, &x, 2.0, 2.0, &quad()).unwrap();
        assert_eq!((r.p11, r.p12, r.p13), (1.0, 0.0, 0.0));
    }

    #[test]
    fn argument_errors() {
        let id = reference_posterior_means(ModelFamily::IllnessDeath);
        let x = profile(true, 80.0);
        assert!(transition_probabilities_id(&id, &x, IdStart::Initial, 2.0, 1.0, &quad()).is_err());
        assert!(transition_probabilities_id(&id, &x, IdStart::Refractured { t12: 1.0 }, 0.5, 1.0, &quad()).is_err());
        let cr = id.restrict(ModelFamily::CompetingRisks).unwrap();
        assert!(transition_probabilities_id(&cr, &x, IdStart::Initial, 0.0, 1.0, &quad()).is_err());
        assert!(transition_probabilities_cr(&cr, &x, 1.0, 0.5, &quad()).is_err());
    }

    #[test]
    fn cr_start_at_zero_matches_cif() {
        let cr = reference_posterior_means(ModelFamily::CompetingRisks);
        let x = profile(true, 85.0);
        let p = transition_probabilities_cr(&cr, &x, 0.0, 3.0, &quad()).unwrap();
        assert_eq!(p.p12, cumulative_incidence(&cr, &x, Transition::Refracture, 3.0, &quad()).unwrap());
        assert_eq!(p.p13, cumulative_incidence(&cr, &x, Transition::Death, 3.0, &quad()).unwrap());
    }

    #[test]
    fn equal_shapes_closed_form() {
        // Proportional hazards across causes: CIF_j = H_j / (H_1 + H_2) * (1 - S).
        let p = ParameterSet::from_values(
            ModelFamily::CompetingRisks,
            &[0.55, 0.2, 0.3, 0.01, 0.55, 0.9, -0.2, 0.05],
        )
        .unwrap();
        let x = profile(true, 78.0);
        let h1 = p.transition(Transition::Refracture).cumulative_hazard(&x, 2.5);
        let h2 = p.transition(Transition::Death).cumulative_hazard(&x, 2.5);
        let exact = h1 / (h1 + h2) * (1.0 - (-(h1 + h2)).exp());
        let cif = cumulative_incidence(&p, &x, Transition::Refracture, 2.5, &quad()).unwrap();
        assert!((cif - exact).abs() < 1e-12, "{cif} vs {exact}");
    }

    #[test]
    fn exponential_illness_death_closed_form() {
        // alpha = 1 everywhere: p12(0,t) = a (e^{-ct} - e^{-(a+b)t}) / (a + b - c)
        let p = ParameterSet::from_values(
            ModelFamily::IllnessDeath,
            &[1.0, 0.3, 0.0, 0.0, 1.0, 0.2, 0.0, 0.0, 1.0, 0.7, 0.0, 0.0],
        )
        .unwrap();
        let x = profile(false, 83.4);
        let (a, b, c, t) = (0.3f64, 0.2f64, 0.7f64, 2.0f64);
        let exact = a * ((-c * t).exp() - (-(a + b) * t).exp()) / (a + b - c);
        match transition_probabilities_id(&p, &x, IdStart::Initial, 0.0, t, &quad()).unwrap() {
            IdProbabilities::FromInitial(r) => {
                assert!((r.p12 - exact).abs() < 1e-13);
                assert!((r.p11 - (-(a + b) * t).exp()).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }
}
