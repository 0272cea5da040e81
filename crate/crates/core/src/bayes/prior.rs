use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hazard::Transition;
use crate::model::{ModelFamily, ParamId, ParamKind, ParameterSet};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Prior of a single scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamPrior {
    Normal { mean: f64, sd: f64 },
    /// Gamma with shape `shape` and rate `rate`.
    Gamma { shape: f64, rate: f64 },
    /// Held at `value`, excluded from sampling.
    Fixed(f64),
}

impl ParamPrior {
    pub fn is_fixed(&self) -> bool {
        matches!(self, ParamPrior::Fixed(_))
    }

    fn check(&self, kind: ParamKind) -> Result<()> {
        match *self {
            ParamPrior::Normal { mean, sd } => {
                if kind.is_positive() {
                    return Err(Error::Config(format!("{} needs a gamma prior, not normal", kind.name())));
                }
                if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                    return Err(Error::Config(format!("normal prior needs finite mean and sd > 0, got ({mean}, {sd})")));
                }
            }
            ParamPrior::Gamma { shape, rate } => {
                if !kind.is_positive() {
                    return Err(Error::Config(format!("{} needs a normal prior, not gamma", kind.name())));
                }
                if !(shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0) {
                    return Err(Error::Config(format!("gamma prior needs positive hyperparameters, got ({shape}, {rate})")));
                }
            }
            ParamPrior::Fixed(v) => {
                if !v.is_finite() || (kind.is_positive() && v <= 0.0) {
                    return Err(Error::Config(format!("invalid fixed value {v} for {}", kind.name())));
                }
            }
        }
        Ok(())
    }

    /// Log density at `x`; fixed parameters contribute nothing.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            ParamPrior::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            ParamPrior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            ParamPrior::Fixed(_) => 0.0,
        }
    }

    /// Log density of `log x` when `x` carries this prior: adds the Jacobian `log x`.
    pub fn log_density_of_log(&self, log_x: f64) -> f64 {
        match *self {
            ParamPrior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + shape * log_x - rate * log_x.exp()
            }
            _ => self.log_density(log_x.exp()) + log_x,
        }
    }
}

impl fmt::Display for ParamPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPrior::Normal { mean, sd } => write!(f, "normal:{mean}:{sd}"),
            ParamPrior::Gamma { shape, rate } => write!(f, "gamma:{shape}:{rate}"),
            ParamPrior::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for ParamPrior {
    type Err = Error;

    /// Parses `normal:MEAN:SD`, `gamma:SHAPE:RATE` or `fixed:VALUE`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {x:?} in prior {s:?}")))
        };
        match parts.as_slice() {
            ["normal", m, sd] => Ok(ParamPrior::Normal { mean: num(m)?, sd: num(sd)? }),
            ["gamma", a, b] => Ok(ParamPrior::Gamma { shape: num(a)?, rate: num(b)? }),
            ["fixed", v] => Ok(ParamPrior::Fixed(num(v)?)),
            _ => Err(Error::Config(format!("cannot parse prior {s:?}"))),
        }
    }
}

/// Independent priors for every parameter of a model family.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    family: ModelFamily,
    priors: BTreeMap<ParamId, ParamPrior>,
}

impl PriorSpec {
    /// Wide defaults: `normal(0, 100)` on coefficients, `gamma(0.01, 0.01)` on
    /// shapes and scales.
    pub fn default_for(family: ModelFamily) -> Self {
        let priors = ParamId::all(family)
            .into_iter()
            .map(|id| {
                let p = if id.kind.is_positive() {
                    ParamPrior::Gamma { shape: 0.01, rate: 0.01 }
                } else {
                    ParamPrior::Normal { mean: 0.0, sd: 100.0 }
                };
                (id, p)
            })
            .collect();
        Self { family, priors }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn set(&mut self, id: ParamId, prior: ParamPrior) -> Result<()> {
        if !self.family.transitions().contains(&id.transition) {
            return Err(Error::FamilyMismatch(format!("{id} is not a parameter of family {}", self.family)));
        }
        prior.check(id.kind)?;
        self.priors.insert(id, prior);
        Ok(())
    }

    pub fn with(mut self, id: ParamId, prior: ParamPrior) -> Result<Self> {
        self.set(id, prior)?;
        Ok(self)
    }

    /// Holds every parameter of `t` fixed at the values in `params`.
    pub fn fix_transition(mut self, t: Transition, params: &ParameterSet) -> Result<Self> {
        for kind in ParamKind::ALL {
            let id = ParamId::new(t, kind);
            let v = params
                .value(id)
                .ok_or_else(|| Error::FamilyMismatch(format!("{id} missing from parameters")))?;
            self.set(id, ParamPrior::Fixed(v))?;
        }
        Ok(self)
    }

    /// The same priors for `family`: shared parameters are copied, the rest
    /// take the defaults.
    pub fn for_family(&self, family: ModelFamily) -> Self {
        let mut out = Self::default_for(family);
        for (id, p) in self.iter() {
            if out.priors.contains_key(&id) {
                out.priors.insert(id, p);
            }
        }
        out
    }

    pub fn get(&self, id: ParamId) -> ParamPrior {
        self.priors[&id]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, ParamPrior)> + '_ {
        self.priors.iter().map(|(k, v)| (*k, *v))
    }

    pub fn all_fixed(&self) -> bool {
        self.priors.values().all(ParamPrior::is_fixed)
    }

    /// Log prior contributed by the parameters of one transition.
    pub fn transition_log_prior(&self, params: &ParameterSet, t: Transition) -> Result<f64> {
        let tp = params
            .get(t)
            .ok_or_else(|| Error::FamilyMismatch(format!("transition {t} missing from parameters")))?;
        if !(tp.shape() > 0.0 && tp.scale() > 0.0) {
            return Err(Error::InvalidParameter(format!("nonpositive shape or scale for {t}")));
        }
        Ok(ParamKind::ALL
            .iter()
            .map(|&k| self.get(ParamId::new(t, k)).log_density(crate::model::param_value(tp, k)))
            .sum())
    }
}

pub fn log_prior(params: &ParameterSet, prior: &PriorSpec) -> Result<f64> {
    if params.family() != prior.family {
        return Err(Error::FamilyMismatch(format!(
            "prior is for family {}, parameters for {}",
            prior.family,
            params.family()
        )));
    }
    let mut total = 0.0;
    for &t in prior.family.transitions() {
        total += prior.transition_log_prior(params, t)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_posterior_means;

    #[test]
    fn normal_at_mode() {
        for sd in [0.5, 1.0, 100.0] {
            let p = ParamPrior::Normal { mean: 0.0, sd };
            let expected = -sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            assert!((p.log_density(0.0) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_mode_is_maximum() {
        let p = ParamPrior::Gamma { shape: 3.0, rate: 2.0 };
        let mode = (3.0 - 1.0) / 2.0;
        let at_mode = p.log_density(mode);
        for x in [0.2, 0.9, 0.99, 1.01, 1.1, 3.0] {
            assert!(p.log_density(x) < at_mode);
        }
        assert_eq!(p.log_density(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_scale_density_includes_jacobian() {
        let p = ParamPrior::Gamma { shape: 2.5, rate: 0.7 };
        for x in [0.1f64, 1.0, 4.2] {
            assert!((p.log_density_of_log(x.ln()) - (p.log_density(x) + x.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn all_fixed_contributes_zero() {
        let fam = ModelFamily::CompetingRisks;
        let params = reference_posterior_means(fam);
        let prior = PriorSpec::default_for(fam)
            .fix_transition(Transition::Refracture, &params)
            .unwrap()
            .fix_transition(Transition::Death, &params)
            .unwrap();
        assert!(prior.all_fixed());
        assert_eq!(log_prior(&params, &prior).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let fam = ModelFamily::CompetingRisks;
        let mut prior = PriorSpec::default_for(fam);
        let alpha = ParamId::new(Transition::Refracture, ParamKind::Shape);
        let beta = ParamId::new(Transition::Refracture, ParamKind::BetaAge);
        assert!(prior.set(alpha, ParamPrior::Normal { mean: 0.0, sd: 1.0 }).is_err());
        assert!(prior.set(beta, ParamPrior::Normal { mean: 0.0, sd: 0.0 }).is_err());
        assert!(prior.set(alpha, ParamPrior::Fixed(-1.0)).is_err());
        assert!(prior
            .set(ParamId::new(Transition::DeathAfterRefracture, ParamKind::Shape), ParamPrior::Fixed(1.0))
            .is_err());
        assert!("gamma:1:2".parse::<ParamPrior>().is_ok());
        assert!("gamma:1".parse::<ParamPrior>().is_err());
    }
}
