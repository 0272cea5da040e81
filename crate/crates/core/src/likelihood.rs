//! Right-censored log-likelihood, factorized by transition.
//!
//! Each transition contributes `sum(log h(t_i))` over its events and
//! `-sum(H(t_i))` over every subject at risk for it. The refracture -> death
//! transition uses the clock reset at refracture. Components are accumulated
//! with [`ExactSum`], so their values do not depend on record order.

use std::collections::BTreeMap;

use crate::cohort::{CohortDataset, FirstOutcome, SecondOutcome};
use crate::error::{Error, Result};
use crate::hazard::{Transition, TransitionParams};
use crate::model::{ModelFamily, ParameterSet};
use crate::sum::{exact_sum, ExactSum};

/// Exposure rows and event statistics of one transition.
#[derive(Debug, Clone)]
pub struct TransitionData {
    transition: Transition,
    log_time: Vec<f64>,
    woman: Vec<f64>,
    age: Vec<f64>,
    n_events: usize,
    events_log_time: f64,
    events_woman: f64,
    events_age: f64,
    exposure: f64,
}

impl TransitionData {
    pub fn new(transition: Transition, data: &CohortDataset) -> Result<Self> {
        let mut rows = Vec::with_capacity(data.len());
        for r in data.records() {
            let (time, event) = match transition {
                Transition::Refracture => (r.t_first, r.first_outcome == FirstOutcome::Refracture),
                Transition::Death => (r.t_first, r.first_outcome == FirstOutcome::Death),
                Transition::DeathAfterRefracture => match r.post_refracture {
                    Some(post) => (post.t_second, post.second_outcome == SecondOutcome::Death),
                    None => continue,
                },
            };
            if !(time > 0.0) {
                return Err(Error::NonPositiveTime(time));
            }
            let cov = data.covariates(r);
            rows.push((time, event, cov.woman_indicator(), cov.age_centered()));
        }

        let events = || rows.iter().filter(|row| row.1);
        Ok(Self {
            transition,
            n_events: events().count(),
            events_log_time: exact_sum(events().map(|row| row.0.ln())),
            events_woman: exact_sum(events().map(|row| row.2)),
            events_age: exact_sum(events().map(|row| row.3)),
            exposure: exact_sum(rows.iter().map(|row| row.0)),
            log_time: rows.iter().map(|row| row.0.ln()).collect(),
            woman: rows.iter().map(|row| row.2).collect(),
            age: rows.iter().map(|row| row.3).collect(),
        })
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    pub fn n_at_risk(&self) -> usize {
        self.log_time.len()
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    /// Total time at risk (years).
    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn log_likelihood(&self, tp: &TransitionParams) -> f64 {
        self.log_likelihood_raw(
            tp.shape().ln(),
            tp.scale().ln(),
            tp.coeffs.beta_sex,
            tp.coeffs.beta_age,
        )
    }

    /// Same as [`log_likelihood`](Self::log_likelihood) with shape and scale
    /// given on the log scale, as the sampler holds them.
    pub fn log_likelihood_raw(&self, log_shape: f64, log_scale: f64, beta_sex: f64, beta_age: f64) -> f64 {
        let shape = log_shape.exp();
        let d = self.n_events as f64;
        let mut acc = ExactSum::new();
        if self.n_events > 0 {
            acc.add(d * (log_shape + log_scale));
            acc.add((shape - 1.0) * self.events_log_time);
            acc.add(beta_sex * self.events_woman);
            acc.add(beta_age * self.events_age);
        }
        for ((lt, w), a) in self.log_time.iter().zip(&self.woman).zip(&self.age) {
            acc.add(-(log_scale + shape * lt + beta_sex * w + beta_age * a).exp());
        }
        acc.value()
    }
}

/// Per-transition data for a model family, built once and evaluated many times.
#[derive(Debug, Clone)]
pub struct LikelihoodTerms {
    family: ModelFamily,
    parts: Vec<TransitionData>,
}

impl LikelihoodTerms {
    pub fn new(family: ModelFamily, data: &CohortDataset) -> Result<Self> {
        let parts = family
            .transitions()
            .iter()
            .map(|&t| TransitionData::new(t, data))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, parts })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn parts(&self) -> &[TransitionData] {
        &self.parts
    }

    pub fn part(&self, t: Transition) -> Option<&TransitionData> {
        self.parts.iter().find(|p| p.transition == t)
    }

    pub fn components(&self, params: &ParameterSet) -> Result<BTreeMap<Transition, f64>> {
        params.ensure_family(self.family)?;
        Ok(self
            .parts
            .iter()
            .map(|p| (p.transition, p.log_likelihood(params.transition(p.transition))))
            .collect())
    }

    pub fn total(&self, params: &ParameterSet) -> Result<f64> {
        Ok(exact_sum(self.components(params)?.into_values()))
    }
}

pub fn log_likelihood(family: ModelFamily, params: &ParameterSet, data: &CohortDataset) -> Result<f64> {
    params.ensure_family(family)?;
    LikelihoodTerms::new(family, data)?.total(params)
}

/// Additive decomposition of [`log_likelihood`] by transition.
pub fn per_transition_log_likelihood(
    family: ModelFamily,
    params: &ParameterSet,
    data: &CohortDataset,
) -> Result<BTreeMap<Transition, f64>> {
    params.ensure_family(family)?;
    LikelihoodTerms::new(family, data)?.components(params)
}
