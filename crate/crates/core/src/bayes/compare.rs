//! Side-by-side comparison of the transitions shared by a competing-risks
//! fit and an illness-death fit of the same data.

use crate::bayes::diagnostics::diagnostics;
use crate::bayes::posterior::PosteriorDraws;
use crate::bayes::summary::Summary;
use crate::error::{Error, Result};
use crate::model::{ModelFamily, ParamId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub mean: f64,
    pub sd: f64,
    pub mcse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub id: ParamId,
    pub competing: FitSummary,
    pub illness_death: FitSummary,
    pub abs_diff: f64,
    /// `sqrt(mcse_cr^2 + mcse_id^2)`.
    pub combined_mcse: Option<f64>,
    /// `abs_diff / combined_mcse`; zero when both are zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    /// Largest discrepancy ratio, `None` if any ratio is undefined.
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| r.ratio)
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }
}

fn fit_summary(draws: &PosteriorDraws, id: ParamId, mcse: Option<f64>) -> FitSummary {
    let p = draws.param_index(id).expect("shared parameter present");
    let pooled: Vec<f64> = (0..draws.total_draws()).map(|i| draws.row(i)[p]).collect();
    let s = Summary::of(&pooled);
    FitSummary {
        mean: s.mean,
        sd: s.sd,
        mcse: if s.sd == 0.0 { Some(0.0) } else { mcse },
    }
}

pub fn compare_fits(competing: &PosteriorDraws, illness_death: &PosteriorDraws) -> Result<Comparison> {
    if competing.family() != ModelFamily::CompetingRisks || illness_death.family() != ModelFamily::IllnessDeath {
        return Err(Error::FamilyMismatch(
            "comparison needs a competing-risks fit and an illness-death fit".into(),
        ));
    }
    let d_cr = diagnostics(competing)?;
    let d_id = diagnostics(illness_death)?;
    let rows = ParamId::all(ModelFamily::CompetingRisks)
        .into_iter()
        .map(|id| {
            let cr = fit_summary(competing, id, d_cr.get(id).and_then(|d| d.mcse));
            let idf = fit_summary(illness_death, id, d_id.get(id).and_then(|d| d.mcse));
            let abs_diff = (cr.mean - idf.mean).abs();
            let combined_mcse = cr.mcse.zip(idf.mcse).map(|(a, b)| a.hypot(b));
            let ratio = combined_mcse.map(|m| if abs_diff == 0.0 { 0.0 } else { abs_diff / m });
            CompareRow {
                id,
                competing: cr,
                illness_death: idf,
                abs_diff,
                combined_mcse,
                ratio,
            }
        })
        .collect();
    Ok(Comparison { rows })
}
