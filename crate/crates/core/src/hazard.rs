//! Weibull proportional-hazards building blocks.
//!
//! A transition with shape `alpha`, scale `lambda` and regression
//! coefficients `beta` has hazard
//!
//! ```text
//! h(t | x) = alpha * lambda * t^(alpha - 1) * exp(beta' x)
//! H(t | x) = lambda * t^alpha * exp(beta' x)
//! ```
//!
//! Time is measured in years throughout the crate.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The three transitions of the hip-fracture state space.
///
/// `Refracture` and `Death` leave the initial post-discharge state, while
/// `DeathAfterRefracture` leaves the refracture state on a clock that is
/// reset at the moment of refracture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transition {
    Refracture,
    Death,
    DeathAfterRefracture,
}

impl Transition {
    pub const ALL: [Transition; 3] = [
        Transition::Refracture,
        Transition::Death,
        Transition::DeathAfterRefracture,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Transition::Refracture => "FR",
            Transition::Death => "FD",
            Transition::DeathAfterRefracture => "RD",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Transition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FR" => Ok(Transition::Refracture),
            "FD" => Ok(Transition::Death),
            "RD" => Ok(Transition::DeathAfterRefracture),
            other => Err(Error::InvalidParameter(format!("unknown transition {other:?}"))),
        }
    }
}

/// Weibull baseline: `h0(t) = shape * scale * t^(shape - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullShapeScale {
    shape: f64,
    scale: f64,
}

impl WeibullShapeScale {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Weibull shape must be positive and finite, got {shape}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Weibull scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Log hazard ratios for the woman indicator and for centered age (per year).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegressionCoefficients {
    pub beta_sex: f64,
    pub beta_age: f64,
}

impl RegressionCoefficients {
    pub fn new(beta_sex: f64, beta_age: f64) -> Result<Self> {
        if !(beta_sex.is_finite() && beta_age.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regression coefficients must be finite, got ({beta_sex}, {beta_age})"
            )));
        }
        Ok(Self { beta_sex, beta_age })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateVector {
    woman: bool,
    age_centered: f64,
}

impl CovariateVector {
    pub fn new(woman: bool, age_centered: f64) -> Result<Self> {
        if !age_centered.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "centered age must be finite, got {age_centered}"
            )));
        }
        Ok(Self {
            woman,
            age_centered,
        })
    }

    /// Covariates for a subject of raw `age` under centering constant `center`.
    pub fn from_age(woman: bool, age: f64, center: f64) -> Result<Self> {
        Self::new(woman, age - center)
    }

    pub fn is_woman(&self) -> bool {
        self.woman
    }

    pub fn woman_indicator(&self) -> f64 {
        if self.woman {
            1.0
        } else {
            0.0
        }
    }

    pub fn age_centered(&self) -> f64 {
        self.age_centered
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub label: Transition,
    pub baseline: WeibullShapeScale,
    pub coeffs: RegressionCoefficients,
}

impl TransitionParams {
    pub fn new(
        label: Transition,
        shape: f64,
        scale: f64,
        beta_sex: f64,
        beta_age: f64,
    ) -> Result<Self> {
        Ok(Self {
            label,
            baseline: WeibullShapeScale::new(shape, scale)?,
            coeffs: RegressionCoefficients::new(beta_sex, beta_age)?,
        })
    }

    pub fn shape(&self) -> f64 {
        self.baseline.shape
    }

    pub fn scale(&self) -> f64 {
        self.baseline.scale
    }

    /// `log h(t)`, valid for `t > 0`.
    pub fn log_hazard(&self, cov: &CovariateVector, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let WeibullShapeScale { shape, scale } = self.baseline;
        Ok(shape.ln() + scale.ln() + (shape - 1.0) * t.ln() + linear_predictor(&self.coeffs, cov))
    }

    pub fn hazard(&self, cov: &CovariateVector, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let WeibullShapeScale { shape, scale } = self.baseline;
        Ok(shape * scale * t.powf(shape - 1.0) * linear_predictor(&self.coeffs, cov).exp())
    }

    /// `H(t)`; zero for `t <= 0` since no time at risk has accrued.
    pub fn cumulative_hazard(&self, cov: &CovariateVector, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let WeibullShapeScale { shape, scale } = self.baseline;
        scale * linear_predictor(&self.coeffs, cov).exp() * t.powf(shape)
    }
}

/// The exponent `beta' x` of the proportional-hazards factor.
pub fn linear_predictor(coeffs: &RegressionCoefficients, cov: &CovariateVector) -> f64 {
    coeffs.beta_sex * cov.woman_indicator() + coeffs.beta_age * cov.age_centered
}

pub fn hazard_at(tp: &TransitionParams, cov: &CovariateVector, t: f64) -> Result<f64> {
    tp.hazard(cov, t)
}

pub fn cumulative_hazard(tp: &TransitionParams, cov: &CovariateVector, t: f64) -> f64 {
    tp.cumulative_hazard(cov, t)
}

/// Probability of having left the origin state through none of `tps` by `t`.
pub fn all_causes_survival<'a, I>(tps: I, cov: &CovariateVector, t: f64) -> Result<f64>
where
    I: IntoIterator<Item = &'a TransitionParams>,
{
    let mut total = 0.0;
    let mut any = false;
    for tp in tps {
        any = true;
        total += tp.cumulative_hazard(cov, t);
    }
    if !any {
        return Err(Error::InvalidParameter(
            "survival needs at least one transition".into(),
        ));
    }
    Ok((-total).exp())
}
