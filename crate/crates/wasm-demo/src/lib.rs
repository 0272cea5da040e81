//! Browser bindings: transition-probability curves, the refracture
//! occupancy decomposition and the one-year incidence table for a single
//! illness-death parameter vector.
//!
//! Parameter vectors hold 12 values in the order
//! `FR.alpha, FR.lambda, FR.beta_sex, FR.beta_age`, then FD, then RD.

use msm_core::bayes::PosteriorDraws;
use msm_core::hazard::Transition;
use msm_core::model::{reference_posterior_means, ModelFamily, ParameterSet, REFERENCE_AGE_CENTER};
use msm_core::outcome::{
    evaluate_many, incidence_table as table, occupancy_decomposition, Functional, Profile, Quadrature,
    QuadratureConfig, TimeGrid,
};
use wasm_bindgen::prelude::*;

fn err(e: msm_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn params(values: &[f64]) -> Result<ParameterSet, JsError> {
    ParameterSet::from_values(ModelFamily::IllnessDeath, values).map_err(err)
}

fn quadrature() -> Quadrature {
    Quadrature::new(QuadratureConfig::default()).expect("default quadrature is valid")
}

/// Illness-death posterior means of the reference cohort.
#[wasm_bindgen]
pub fn reference_parameters() -> Vec<f64> {
    reference_posterior_means(ModelFamily::IllnessDeath).values()
}

#[wasm_bindgen]
pub fn parameter_labels() -> Vec<String> {
    msm_core::model::ParamId::all(ModelFamily::IllnessDeath)
        .iter()
        .map(ToString::to_string)
        .collect()
}

/// Curves on `points` equally spaced times in `[0, t_max]`, concatenated as
/// `t | cif_fr | cif_fd | p11 | p12 | p13`.
#[wasm_bindgen]
pub fn transition_curves(values: &[f64], woman: bool, age: f64, t_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let p = params(values)?;
    let cov = Profile { woman, age }.covariates(REFERENCE_AGE_CENTER).map_err(err)?;
    let grid = TimeGrid::uniform(t_max, points).map_err(err)?;
    let fs = [
        Functional::Cif(Transition::Refracture),
        Functional::Cif(Transition::Death),
        Functional::P11,
        Functional::P12,
        Functional::P13,
    ];
    let quad = quadrature();
    let n = grid.len();
    let mut out = vec![0.0; n * (fs.len() + 1)];
    for (k, &t) in grid.times().iter().enumerate() {
        out[k] = t;
        let v = evaluate_many(&p, &fs, &cov, t, &quad).map_err(err)?;
        for (j, x) in v.into_iter().enumerate() {
            out[(j + 1) * n + k] = x;
        }
    }
    Ok(out)
}

/// Ever refractured versus alive after refracture, concatenated as
/// `t | cif_refracture | occupancy_refracture | dead_after_refracture`.
#[wasm_bindgen]
pub fn decomposition(values: &[f64], woman: bool, age: f64, t_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let draws = PosteriorDraws::from_point(&params(values)?, REFERENCE_AGE_CENTER);
    let cov = Profile { woman, age }.covariates(REFERENCE_AGE_CENTER).map_err(err)?;
    let grid = TimeGrid::uniform(t_max, points).map_err(err)?;
    let d = occupancy_decomposition(&draws, &cov, &grid, &quadrature()).map_err(err)?;
    let mut out = grid.times().to_vec();
    out.extend(d.cif_refracture);
    out.extend(d.occupancy_refracture);
    out.extend(d.dead_after_refracture);
    Ok(out)
}

/// Incidences in percent at `horizon` years: rows FR, FD, RD; columns
/// women 70/80/90 then men 70/80/90.
#[wasm_bindgen]
pub fn incidence_table(values: &[f64], horizon: f64) -> Result<Vec<f64>, JsError> {
    let draws = PosteriorDraws::from_point(&params(values)?, REFERENCE_AGE_CENTER);
    let t = table(&draws, &Profile::reference_set(), horizon, &quadrature()).map_err(err)?;
    Ok(t.rows.iter().map(|r| r.mean).collect())
}
