//! Posterior distributions of incidences and transition probabilities.

use std::fmt;
use std::str::FromStr;

use crate::bayes::summary::quantile_sorted;
use crate::bayes::PosteriorDraws;
use crate::error::{Error, Result};
use crate::hazard::{CovariateVector, Transition};
use crate::model::{ModelFamily, ParameterSet};
use crate::sum::exact_sum;
use crate::outcome::probabilities::{
    cumulative_incidence, stay_probability, transition_probabilities_id, IdProbabilities, IdStart,
};
use crate::outcome::quadrature::Quadrature;

/// Strictly increasing evaluation times (years), starting at or after 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("time grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 {
            return Err(Error::InvalidParameter("time grid must be finite and start at or after 0".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(Self(times))
    }

    /// `n` equally spaced points from 0 to `max` inclusive.
    pub fn uniform(max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(max > 0.0) {
            return Err(Error::InvalidParameter(format!("cannot build a grid of {n} points up to {max}")));
        }
        Self::new((0..n).map(|i| max * i as f64 / (n - 1) as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A time-indexed quantity evaluated from the time origin.
///
/// `P22`/`P23` describe a subject entering the refracture state at time 0,
/// so they measure time since refracture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    Cif(Transition),
    P11,
    P12,
    P13,
    P22,
    P23,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::Cif(Transition::Refracture) => "cif_fr",
            Functional::Cif(Transition::Death) => "cif_fd",
            Functional::Cif(Transition::DeathAfterRefracture) => "cif_rd",
            Functional::P11 => "p11",
            Functional::P12 => "p12",
            Functional::P13 => "p13",
            Functional::P22 => "p22",
            Functional::P23 => "p23",
        }
    }

    /// Functionals available for a family.
    pub fn for_family(family: ModelFamily) -> Vec<Functional> {
        let mut out = vec![
            Functional::Cif(Transition::Refracture),
            Functional::Cif(Transition::Death),
            Functional::P11,
            Functional::P12,
            Functional::P13,
        ];
        if family == ModelFamily::IllnessDeath {
            out.extend([Functional::P22, Functional::P23]);
        }
        out
    }

    fn check(self, family: ModelFamily) -> Result<()> {
        match self {
            Functional::Cif(Transition::DeathAfterRefracture) => Err(Error::InvalidParameter(
                "no cumulative incidence for the refracture -> death transition".into(),
            )),
            Functional::P22 | Functional::P23 if family != ModelFamily::IllnessDeath => Err(Error::FamilyMismatch(
                format!("{} needs illness-death parameters", self.name()),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cif_fr" => Ok(Functional::Cif(Transition::Refracture)),
            "cif_fd" => Ok(Functional::Cif(Transition::Death)),
            "p11" => Ok(Functional::P11),
            "p12" => Ok(Functional::P12),
            "p13" => Ok(Functional::P13),
            "p22" => Ok(Functional::P22),
            "p23" => Ok(Functional::P23),
            other => Err(Error::Config(format!("unknown functional {other:?}"))),
        }
    }
}

/// Value of `functional` at time `t` for fixed parameters, clamped to [0, 1].
pub fn evaluate(
    params: &ParameterSet,
    functional: Functional,
    cov: &CovariateVector,
    t: f64,
    quad: &Quadrature,
) -> Result<f64> {
    Ok(evaluate_many(params, &[functional], cov, t, quad)?[0])
}

/// Several functionals at one time point, sharing the underlying integrals.
pub fn evaluate_many(
    params: &ParameterSet,
    functionals: &[Functional],
    cov: &CovariateVector,
    t: f64,
    quad: &Quadrature,
) -> Result<Vec<f64>> {
    let family = params.family();
    for f in functionals {
        f.check(family)?;
    }
    let mut cif_fr = None;
    let mut cif_fd = None;
    let mut p12_id = None;
    let mut p11 = None;
    let mut out = Vec::with_capacity(functionals.len());
    for &f in functionals {
        let cif = |cause: Transition, slot: &mut Option<f64>| -> Result<f64> {
            if slot.is_none() {
                *slot = Some(cumulative_incidence(params, cov, cause, t, quad)?);
            }
            Ok(slot.unwrap())
        };
        let v = match (f, family) {
            (Functional::Cif(Transition::Refracture), _) | (Functional::P12, ModelFamily::CompetingRisks) => {
                cif(Transition::Refracture, &mut cif_fr)?
            }
            (Functional::Cif(Transition::Death), _) | (Functional::P13, ModelFamily::CompetingRisks) => {
                cif(Transition::Death, &mut cif_fd)?
            }
            (Functional::P11, _) => *p11.get_or_insert(stay_probability(params, cov, 0.0, t)?),
            (Functional::P12 | Functional::P13, ModelFamily::IllnessDeath) => {
                if p12_id.is_none() {
                    p12_id = Some(match transition_probabilities_id(params, cov, IdStart::Initial, 0.0, t, quad)? {
                        IdProbabilities::FromInitial(r) => r,
                        IdProbabilities::FromRefracture(_) => unreachable!(),
                    });
                }
                let r = p12_id.unwrap();
                if f == Functional::P12 {
                    r.p12
                } else {
                    r.p13
                }
            }
            (Functional::P22 | Functional::P23, _) => {
                match transition_probabilities_id(params, cov, IdStart::Refractured { t12: 0.0 }, 0.0, t, quad)? {
                    IdProbabilities::FromRefracture(r) if f == Functional::P22 => r.p22,
                    IdProbabilities::FromRefracture(r) => r.p23,
                    IdProbabilities::FromInitial(_) => unreachable!(),
                }
            }
            (Functional::Cif(Transition::DeathAfterRefracture), _) => unreachable!(),
        };
        out.push(v.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Pointwise posterior mean and equal-tailed credible band.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub grid: TimeGrid,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

fn for_each_draw<T, F>(draws: &PosteriorDraws, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ParameterSet) -> Result<T> + Sync,
{
    let n = draws.total_draws();
    let eval = |i: usize| f(&draws.params(i));
    #[cfg(feature = "parallel")]
    let out: Vec<Result<T>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<T>> = (0..n).map(eval).collect();
    out.into_iter().collect()
}

fn band(values: &mut [f64], level: f64) -> (f64, f64, f64) {
    let mean = exact_sum(values.iter().copied()) / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    (mean, quantile_sorted(values, tail), quantile_sorted(values, 1.0 - tail))
}

/// Evaluates `functional` at every draw and grid time.
pub fn posterior_curve(
    draws: &PosteriorDraws,
    functional: Functional,
    cov: &CovariateVector,
    grid: &TimeGrid,
    quad: &Quadrature,
    level: f64,
) -> Result<CurveEstimate> {
    Ok(posterior_curves(draws, &[functional], cov, grid, quad, level)?.remove(0))
}

/// One curve per functional, in order, from a single pass over the draws.
pub fn posterior_curves(
    draws: &PosteriorDraws,
    functionals: &[Functional],
    cov: &CovariateVector,
    grid: &TimeGrid,
    quad: &Quadrature,
    level: f64,
) -> Result<Vec<CurveEstimate>> {
    for f in functionals {
        f.check(draws.family())?;
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("credible level must lie in (0, 1), got {level}")));
    }
    let nf = functionals.len();
    // per draw: values[k * nf + j] for time k and functional j
    let per_draw = for_each_draw(draws, |p| {
        let mut values = Vec::with_capacity(grid.len() * nf);
        for &t in grid.times() {
            values.extend(evaluate_many(p, functionals, cov, t, quad)?);
        }
        Ok(values)
    })?;
    let mut column = vec![0.0; per_draw.len()];
    let curves = (0..nf)
        .map(|j| {
            let mut mean = Vec::with_capacity(grid.len());
            let mut lower = Vec::with_capacity(grid.len());
            let mut upper = Vec::with_capacity(grid.len());
            for k in 0..grid.len() {
                for (c, row) in column.iter_mut().zip(&per_draw) {
                    *c = row[k * nf + j];
                }
                let (m, lo, hi) = band(&mut column, level);
                mean.push(m);
                lower.push(lo);
                upper.push(hi);
            }
            CurveEstimate {
                grid: grid.clone(),
                mean,
                lower,
                upper,
                level,
            }
        })
        .collect();
    Ok(curves)
}

/// A covariate profile: sex and age at discharge (years, uncentered).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub woman: bool,
    pub age: f64,
}

impl Profile {
    pub fn covariates(&self, age_center: f64) -> Result<CovariateVector> {
        CovariateVector::from_age(self.woman, self.age, age_center)
    }

    pub fn sex_label(&self) -> &'static str {
        if self.woman {
            "W"
        } else {
            "M"
        }
    }

    /// The six sex-by-age profiles of the reference incidence table.
    pub fn reference_set() -> Vec<Profile> {
        [true, false]
            .into_iter()
            .flat_map(|woman| [70.0, 80.0, 90.0].map(|age| Profile { woman, age }))
            .collect()
    }

    /// Parses `w:70,m:80,...`.
    pub fn parse_list(s: &str) -> Result<Vec<Profile>> {
        let profiles = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Profile>>>()?;
        if profiles.is_empty() {
            return Err(Error::Config("profile list is empty".into()));
        }
        Ok(profiles)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", if self.woman { "w" } else { "m" }, self.age)
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (sex, age) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("profile {s:?} is not of the form w:70")))?;
        let woman = match sex.trim().to_ascii_lowercase().as_str() {
            "w" => true,
            "m" => false,
            other => return Err(Error::Config(format!("unknown sex {other:?} in profile {s:?}"))),
        };
        let age: f64 = age
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad age in profile {s:?}")))?;
        if !(age.is_finite() && age >= 0.0) {
            return Err(Error::Config(format!("bad age in profile {s:?}")));
        }
        Ok(Profile { woman, age })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceRow {
    pub transition: Transition,
    pub profile: Profile,
    /// Percentages.
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceTable {
    pub family: ModelFamily,
    pub horizon: f64,
    pub level: f64,
    pub rows: Vec<IncidenceRow>,
}

impl IncidenceTable {
    pub fn get(&self, transition: Transition, profile: Profile) -> Option<&IncidenceRow> {
        self.rows
            .iter()
            .find(|r| r.transition == transition && r.profile == profile)
    }
}

/// The functional behind each incidence-table column.
pub fn incidence_functional(transition: Transition) -> Functional {
    match transition {
        Transition::DeathAfterRefracture => Functional::P23,
        cause => Functional::Cif(cause),
    }
}

/// Posterior incidences at `horizon` per transition and profile, in percent.
/// The refracture -> death column appears only for illness-death draws.
pub fn incidence_table(
    draws: &PosteriorDraws,
    profiles: &[Profile],
    horizon: f64,
    quad: &Quadrature,
) -> Result<IncidenceTable> {
    if profiles.is_empty() {
        return Err(Error::InvalidParameter("no profiles requested".into()));
    }
    let level = 0.95;
    let grid = TimeGrid::new(vec![horizon])?;
    let transitions = draws.family().transitions();
    let functionals: Vec<Functional> = transitions.iter().map(|&t| incidence_functional(t)).collect();
    let mut per_profile = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let cov = profile.covariates(draws.age_center())?;
        per_profile.push(posterior_curves(draws, &functionals, &cov, &grid, quad, level)?);
    }
    let mut rows = Vec::new();
    for (j, &transition) in transitions.iter().enumerate() {
        for (&profile, curves) in profiles.iter().zip(&per_profile) {
            let c = &curves[j];
            rows.push(IncidenceRow {
                transition,
                profile,
                mean: 100.0 * c.mean[0],
                lower: 100.0 * c.lower[0],
                upper: 100.0 * c.upper[0],
            });
        }
    }
    Ok(IncidenceTable {
        family: draws.family(),
        horizon,
        level,
        rows,
    })
}

/// Ever-refractured versus currently-refractured decomposition over time.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyDecomposition {
    pub grid: TimeGrid,
    /// Posterior mean cumulative incidence of refracture.
    pub cif_refracture: Vec<f64>,
    /// Posterior mean probability of being alive in the refracture state.
    pub occupancy_refracture: Vec<f64>,
    /// Refractured and since deceased: the difference of the two.
    pub dead_after_refracture: Vec<f64>,
}

pub fn occupancy_decomposition(
    draws: &PosteriorDraws,
    cov: &CovariateVector,
    grid: &TimeGrid,
    quad: &Quadrature,
) -> Result<OccupancyDecomposition> {
    if draws.family() != ModelFamily::IllnessDeath {
        return Err(Error::FamilyMismatch(
            "occupancy decomposition needs illness-death draws".into(),
        ));
    }
    let pair = [Functional::Cif(Transition::Refracture), Functional::P12];
    let per_draw = for_each_draw(draws, |p| {
        grid.times()
            .iter()
            .map(|&t| evaluate_many(p, &pair, cov, t, quad).map(|v| (v[0], v[1])))
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;
    let n = per_draw.len() as f64;
    let mut cif = vec![0.0; grid.len()];
    let mut occ = vec![0.0; grid.len()];
    for row in &per_draw {
        for (k, (c, o)) in row.iter().enumerate() {
            cif[k] += c;
            occ[k] += o;
        }
    }
    for k in 0..grid.len() {
        cif[k] /= n;
        occ[k] = (occ[k] / n).min(cif[k]);
    }
    let dead = cif.iter().zip(&occ).map(|(c, o)| (c - o).max(0.0)).collect();
    Ok(OccupancyDecomposition {
        grid: grid.clone(),
        cif_refracture: cif,
        occupancy_refracture: occ,
        dead_after_refracture: dead,
    })
}
