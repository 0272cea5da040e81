//! Event-history records for the fracture / refracture / death state space.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, RecordViolation, Result};
use crate::hazard::CovariateVector;
use crate::sum::exact_sum;

/// How follow-up from discharge ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FirstOutcome {
    Censored,
    Refracture,
    Death,
}

impl FirstOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            FirstOutcome::Censored => "censored",
            FirstOutcome::Refracture => "refracture",
            FirstOutcome::Death => "death",
        }
    }
}

impl fmt::Display for FirstOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FirstOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "censored" => Ok(FirstOutcome::Censored),
            "refracture" => Ok(FirstOutcome::Refracture),
            "death" => Ok(FirstOutcome::Death),
            other => Err(format!("unknown first outcome {other:?}")),
        }
    }
}

/// How follow-up after a refracture ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecondOutcome {
    Censored,
    Death,
}

impl SecondOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            SecondOutcome::Censored => "censored",
            SecondOutcome::Death => "death",
        }
    }
}

impl fmt::Display for SecondOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SecondOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "censored" => Ok(SecondOutcome::Censored),
            "death" => Ok(SecondOutcome::Death),
            other => Err(format!("unknown second outcome {other:?}")),
        }
    }
}

/// Follow-up after refracture, timed on the clock reset at refracture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostRefracture {
    pub t_second: f64,
    pub second_outcome: SecondOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// 1 for women, 0 for men.
    pub woman_indicator: u8,
    pub age_at_discharge: f64,
    /// Years from discharge to the first event or censoring.
    pub t_first: f64,
    pub first_outcome: FirstOutcome,
    pub post_refracture: Option<PostRefracture>,
}

impl SubjectRecord {
    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.woman_indicator > 1 {
            out.push(format!(
                "woman indicator must be 0 or 1, got {}",
                self.woman_indicator
            ));
        }
        if !(self.age_at_discharge.is_finite() && self.age_at_discharge >= 0.0) {
            out.push(format!(
                "age at discharge must be finite and nonnegative, got {}",
                self.age_at_discharge
            ));
        }
        if !(self.t_first.is_finite() && self.t_first > 0.0) {
            out.push(format!("t_first must be positive, got {}", self.t_first));
        }
        match (self.first_outcome, &self.post_refracture) {
            (FirstOutcome::Refracture, None) => {
                out.push("refracture outcome requires post-refracture follow-up".into())
            }
            (FirstOutcome::Refracture, Some(post)) => {
                if !(post.t_second.is_finite() && post.t_second > 0.0) {
                    out.push(format!("t_second must be positive, got {}", post.t_second));
                }
            }
            (other, Some(_)) => out.push(format!(
                "post-refracture follow-up present but first outcome is {other}"
            )),
            (_, None) => {}
        }
        out
    }
}

/// Validated records plus the constant subtracted from every age.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortDataset {
    records: Vec<SubjectRecord>,
    age_center: f64,
}

impl CohortDataset {
    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn age_center(&self) -> f64 {
        self.age_center
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn covariates(&self, record: &SubjectRecord) -> CovariateVector {
        CovariateVector::from_age(
            record.woman_indicator == 1,
            record.age_at_discharge,
            self.age_center,
        )
        .expect("validated ages are finite")
    }

    pub fn into_records(self) -> Vec<SubjectRecord> {
        self.records
    }
}

/// Checks every structural rule and reports all violations at once.
pub fn validate_dataset(records: Vec<SubjectRecord>, age_center: f64) -> Result<CohortDataset> {
    if !age_center.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "age center must be finite, got {age_center}"
        )));
    }
    let violations: Vec<RecordViolation> = records
        .iter()
        .enumerate()
        .flat_map(|(index, r)| {
            r.violations().into_iter().map(move |rule| RecordViolation {
                index,
                id: r.id.clone(),
                rule,
            })
        })
        .collect();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(CohortDataset {
        records,
        age_center,
    })
}

/// Validates `records` with ages centered at `center`, or at the mean age
/// when no center is given.
pub fn center_ages(records: Vec<SubjectRecord>, center: Option<f64>) -> Result<CohortDataset> {
    let center = match center {
        Some(c) => c,
        None if records.is_empty() => return Err(Error::EmptyCenter),
        None => exact_sum(records.iter().map(|r| r.age_at_discharge)) / records.len() as f64,
    };
    validate_dataset(records, center)
}
