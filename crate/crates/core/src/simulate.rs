//! Synthetic cohorts generated from latent Weibull event times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::cohort::{validate_dataset, CohortDataset, FirstOutcome, PostRefracture, SecondOutcome, SubjectRecord};
use crate::error::{Error, Result};
use crate::hazard::{CovariateVector, Transition, TransitionParams};
use crate::model::{ModelFamily, ParameterSet, REFERENCE_AGE_CENTER};

/// Subjects generated per random stream.
pub const CHUNK_SIZE: usize = 4096;

/// Resolution of simulated times and ages (years). Values are rounded to a
/// multiple of this so they survive a six-decimal CSV round trip unchanged.
pub const TIME_RESOLUTION: f64 = 1e-6;

/// Sex and age-at-discharge distribution of simulated subjects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateModel {
    pub woman_probability: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
}

/// 74.8% women; age normal(83.4, 6) truncated to [65, 105]. The spread and
/// bounds are a rough match to the reported age bands, not an estimate.
pub fn default_covariate_model() -> CovariateModel {
    CovariateModel {
        woman_probability: 0.748,
        age_mean: 83.4,
        age_sd: 6.0,
        age_min: 65.0,
        age_max: 105.0,
    }
}

impl Default for CovariateModel {
    fn default() -> Self {
        default_covariate_model()
    }
}

impl CovariateModel {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.woman_probability) {
            return Err(Error::InvalidParameter(format!(
                "woman probability must lie in [0, 1], got {}",
                self.woman_probability
            )));
        }
        if !(self.age_mean.is_finite() && self.age_sd >= 0.0 && self.age_sd.is_finite()) {
            return Err(Error::InvalidParameter("age distribution needs a finite mean and nonnegative sd".into()));
        }
        if !(self.age_min.is_finite() && self.age_max.is_finite() && self.age_min >= 0.0 && self.age_min <= self.age_max)
        {
            return Err(Error::InvalidParameter(format!(
                "age bounds must satisfy 0 <= min <= max, got [{}, {}]",
                self.age_min, self.age_max
            )));
        }
        if self.age_sd == 0.0 && !(self.age_min..=self.age_max).contains(&self.age_mean) {
            return Err(Error::InvalidParameter("fixed age lies outside the age bounds".into()));
        }
        Ok(())
    }

    /// Every subject has this sex and age.
    pub fn fixed(woman: bool, age: f64) -> Self {
        Self {
            woman_probability: if woman { 1.0 } else { 0.0 },
            age_mean: age,
            age_sd: 0.0,
            age_min: age,
            age_max: age,
        }
    }

    /// Draws (woman, age). Ages are redrawn until they fall within bounds.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, f64) {
        let woman = rng.random::<f64>() < self.woman_probability;
        if self.age_sd == 0.0 {
            return (woman, self.age_mean);
        }
        let age = loop {
            let z: f64 = StandardNormal.sample(rng);
            let age = self.age_mean + self.age_sd * z;
            if (self.age_min..=self.age_max).contains(&age) {
                break age;
            }
        };
        (woman, age)
    }
}

/// End of follow-up for each subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Censoring {
    /// Everyone followed for `c` years after discharge.
    Administrative(f64),
    /// Discharge uniform over `[0, accrual]`, study closes at `study_end`;
    /// each subject is followed for `study_end - entry` years.
    Staggered { accrual: f64, study_end: f64 },
}

impl Censoring {
    fn validate(&self) -> Result<()> {
        match *self {
            Censoring::Administrative(c) if c > 0.0 && c.is_finite() => Ok(()),
            Censoring::Administrative(c) => {
                Err(Error::InvalidParameter(format!("censoring time must be positive, got {c}")))
            }
            Censoring::Staggered { accrual, study_end }
                if accrual >= 0.0 && study_end.is_finite() && study_end > accrual =>
            {
                Ok(())
            }
            Censoring::Staggered { accrual, study_end } => Err(Error::InvalidParameter(format!(
                "staggered entry needs 0 <= accrual < study end, got {accrual} and {study_end}"
            ))),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Censoring::Administrative(c) => c,
            Censoring::Staggered { accrual, study_end } => study_end - accrual * rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub family: ModelFamily,
    pub true_params: ParameterSet,
    pub n_subjects: usize,
    pub covariates: CovariateModel,
    pub censoring: Censoring,
    /// Constant subtracted from ages, both when generating and in the
    /// resulting dataset.
    pub age_center: f64,
    pub seed: u64,
}

impl SimulationSpec {
    /// Default covariates, centering at 83.4 and 8-year administrative
    /// censoring.
    pub fn new(family: ModelFamily, true_params: ParameterSet, n_subjects: usize, seed: u64) -> Self {
        Self {
            family,
            true_params,
            n_subjects,
            covariates: default_covariate_model(),
            censoring: Censoring::Administrative(8.0),
            age_center: REFERENCE_AGE_CENTER,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.true_params.ensure_family(self.family)?;
        self.covariates.validate()?;
        self.censoring.validate()?;
        if !self.age_center.is_finite() {
            return Err(Error::InvalidParameter("age center must be finite".into()));
        }
        Ok(())
    }
}

/// Inverse-transform draw of a Weibull proportional-hazards event time.
pub fn draw_event_time<R: Rng + ?Sized>(tp: &TransitionParams, cov: &CovariateVector, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    event_time_from_exponential(tp, cov, e)
}

/// The time at which the cumulative hazard reaches `e`.
pub fn event_time_from_exponential(tp: &TransitionParams, cov: &CovariateVector, e: f64) -> f64 {
    let lp = crate::hazard::linear_predictor(&tp.coeffs, cov);
    (e / (tp.scale() * lp.exp())).powf(1.0 / tp.shape())
}

/// Nearest multiple of [`TIME_RESOLUTION`], as the correctly rounded `k / 1e6`.
fn round_to_resolution(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn quantize(x: f64) -> f64 {
    round_to_resolution(x).max(TIME_RESOLUTION)
}

fn subject<R: Rng + ?Sized>(spec: &SimulationSpec, index: usize, rng: &mut R) -> SubjectRecord {
    let (woman, age) = spec.covariates.draw(rng);
    let age = round_to_resolution(age);
    let cov = CovariateVector::from_age(woman, age, spec.age_center).expect("finite age");
    let c = spec.censoring.draw(rng);
    let p = &spec.true_params;
    let t_fr = draw_event_time(p.transition(Transition::Refracture), &cov, rng);
    let t_fd = draw_event_time(p.transition(Transition::Death), &cov, rng);
    let t_rd = match spec.family {
        ModelFamily::IllnessDeath => Some(draw_event_time(p.transition(Transition::DeathAfterRefracture), &cov, rng)),
        ModelFamily::CompetingRisks => None,
    };

    let (t_first, first_outcome) = if t_fr <= t_fd && t_fr <= c {
        (t_fr, FirstOutcome::Refracture)
    } else if t_fd < t_fr && t_fd <= c {
        (t_fd, FirstOutcome::Death)
    } else {
        (c, FirstOutcome::Censored)
    };
    // competing-risks cohorts are not followed past refracture; the record
    // is closed as censored at the end of study
    let post_refracture = (first_outcome == FirstOutcome::Refracture).then(|| {
        let remaining = c - t_first;
        match t_rd {
            Some(t_rd) if t_rd <= remaining => PostRefracture {
                t_second: quantize(t_rd),
                second_outcome: SecondOutcome::Death,
            },
            _ => PostRefracture {
                t_second: quantize(remaining),
                second_outcome: SecondOutcome::Censored,
            },
        }
    });

    SubjectRecord {
        id: format!("{}", index + 1),
        woman_indicator: u8::from(woman),
        age_at_discharge: age,
        t_first: quantize(t_first),
        first_outcome,
        post_refracture,
    }
}

fn chunk(spec: &SimulationSpec, k: usize) -> Vec<SubjectRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    rng.set_stream(k as u64);
    let start = k * CHUNK_SIZE;
    let end = (start + CHUNK_SIZE).min(spec.n_subjects);
    (start..end).map(|i| subject(spec, i, &mut rng)).collect()
}

/// Generates `spec.n_subjects` records in subject order. Each block of
/// [`CHUNK_SIZE`] subjects has its own random stream, so the output does not
/// depend on how chunks are scheduled.
pub fn simulate_cohort(spec: &SimulationSpec) -> Result<CohortDataset> {
    spec.validate()?;
    let n_chunks = spec.n_subjects.div_ceil(CHUNK_SIZE);
    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<SubjectRecord>> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(|k| chunk(spec, k)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<SubjectRecord>> = (0..n_chunks).map(|k| chunk(spec, k)).collect();
    validate_dataset(chunks.into_iter().flatten().collect(), spec.age_center)
}
