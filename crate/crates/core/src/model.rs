use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hazard::{Transition, TransitionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// Refracture and death as competing terminal events.
    CompetingRisks,
    /// Refracture as a transient state from which death remains reachable.
    IllnessDeath,
}

impl ModelFamily {
    pub fn transitions(self) -> &'static [Transition] {
        match self {
            ModelFamily::CompetingRisks => &Transition::ALL[..2],
            ModelFamily::IllnessDeath => &Transition::ALL[..],
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ModelFamily::CompetingRisks => "cr",
            ModelFamily::IllnessDeath => "id",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cr" | "competing-risks" => Ok(ModelFamily::CompetingRisks),
            "id" | "illness-death" => Ok(ModelFamily::IllnessDeath),
            other => Err(Error::Config(format!("unknown model family {other:?} (expected cr or id)"))),
        }
    }
}

/// The four scalar parameters of one transition, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKind {
    Shape,
    Scale,
    BetaSex,
    BetaAge,
}

impl ParamKind {
    pub const ALL: [ParamKind; 4] = [
        ParamKind::Shape,
        ParamKind::Scale,
        ParamKind::BetaSex,
        ParamKind::BetaAge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Shape => "alpha",
            ParamKind::Scale => "lambda",
            ParamKind::BetaSex => "beta_sex",
            ParamKind::BetaAge => "beta_age",
        }
    }

    /// Shape and scale live on the positive half-line.
    pub fn is_positive(self) -> bool {
        matches!(self, ParamKind::Shape | ParamKind::Scale)
    }
}

impl FromStr for ParamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "alpha" | "shape" => Ok(ParamKind::Shape),
            "lambda" | "scale" => Ok(ParamKind::Scale),
            "beta_sex" | "beta1" => Ok(ParamKind::BetaSex),
            "beta_age" | "beta2" => Ok(ParamKind::BetaAge),
            other => Err(Error::Config(format!("unknown parameter name {other:?}"))),
        }
    }
}

/// A scalar parameter identified by its transition, e.g. `FR.alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId {
    pub transition: Transition,
    pub kind: ParamKind,
}

impl ParamId {
    pub fn new(transition: Transition, kind: ParamKind) -> Self {
        Self { transition, kind }
    }

    /// All parameters of `family` in reporting order.
    pub fn all(family: ModelFamily) -> Vec<ParamId> {
        family
            .transitions()
            .iter()
            .flat_map(|&t| ParamKind::ALL.iter().map(move |&k| ParamId::new(t, k)))
            .collect()
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.transition.label(), self.kind.name())
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (t, k) = s
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("parameter label {s:?} is not of the form FR.alpha")))?;
        Ok(ParamId::new(t.parse()?, k.parse()?))
    }
}

pub fn param_value(tp: &TransitionParams, kind: ParamKind) -> f64 {
    match kind {
        ParamKind::Shape => tp.shape(),
        ParamKind::Scale => tp.scale(),
        ParamKind::BetaSex => tp.coeffs.beta_sex,
        ParamKind::BetaAge => tp.coeffs.beta_age,
    }
}

/// Parameters for every transition of a model family.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    family: ModelFamily,
    transitions: BTreeMap<Transition, TransitionParams>,
}

impl ParameterSet {
    pub fn new<I>(family: ModelFamily, params: I) -> Result<Self>
    where
        I: IntoIterator<Item = TransitionParams>,
    {
        let mut transitions = BTreeMap::new();
        for tp in params {
            if transitions.insert(tp.label, tp).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "transition {} given twice",
                    tp.label
                )));
            }
        }
        let expected = family.transitions();
        if transitions.len() != expected.len() || !expected.iter().all(|t| transitions.contains_key(t)) {
            let got: Vec<_> = transitions.keys().map(|t| t.label()).collect();
            return Err(Error::FamilyMismatch(format!(
                "family {family} needs transitions {:?}, got {got:?}",
                expected.iter().map(|t| t.label()).collect::<Vec<_>>()
            )));
        }
        Ok(Self {
            family,
            transitions,
        })
    }

    /// Builds a set from flat values ordered as [`ParamId::all`].
    pub fn from_values(family: ModelFamily, values: &[f64]) -> Result<Self> {
        let n = family.transitions().len();
        if values.len() != 4 * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for family {family}, got {}",
                4 * n,
                values.len()
            )));
        }
        let params = family
            .transitions()
            .iter()
            .zip(values.chunks_exact(4))
            .map(|(&t, v)| TransitionParams::new(t, v[0], v[1], v[2], v[3]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(family, params)
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn get(&self, t: Transition) -> Option<&TransitionParams> {
        self.transitions.get(&t)
    }

    /// Panics if `t` is not part of this family.
    pub fn transition(&self, t: Transition) -> &TransitionParams {
        self.transitions
            .get(&t)
            .unwrap_or_else(|| panic!("transition {t} not in family {}", self.family))
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionParams> {
        self.transitions.values()
    }

    pub fn value(&self, id: ParamId) -> Option<f64> {
        self.get(id.transition).map(|tp| param_value(tp, id.kind))
    }

    /// Flat values ordered as [`ParamId::all`].
    pub fn values(&self) -> Vec<f64> {
        ParamId::all(self.family)
            .into_iter()
            .map(|id| self.value(id).unwrap())
            .collect()
    }

    /// Same transitions under another family; dropping RD or requiring it.
    pub fn restrict(&self, family: ModelFamily) -> Result<Self> {
        let params = family
            .transitions()
            .iter()
            .map(|t| {
                self.get(*t).copied().ok_or_else(|| {
                    Error::FamilyMismatch(format!("transition {t} missing from {} parameters", self.family))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(family, params)
    }

    pub fn ensure_family(&self, family: ModelFamily) -> Result<()> {
        if self.family != family {
            return Err(Error::FamilyMismatch(format!(
                "parameters are for family {}, model is {family}",
                self.family
            )));
        }
        Ok(())
    }
}

/// Posterior means reported for the hip-fracture cohort (ages centered at
/// [`REFERENCE_AGE_CENTER`]); used as simulation truth and plugin reference.
pub fn reference_posterior_means(family: ModelFamily) -> ParameterSet {
    let values: &[f64] = match family {
        ModelFamily::CompetingRisks => &[
            0.9197, 0.0279, 0.0254, 0.0244, //
            0.7759, 0.3310, -0.5088, 0.0705,
        ],
        ModelFamily::IllnessDeath => &[
            0.9198, 0.0279, 0.0262, 0.0244, //
            0.7759, 0.3311, -0.5092, 0.0705, //
            0.6234, 0.5769, -0.6127, 0.0498,
        ],
    };
    ParameterSet::from_values(family, values).expect("reference values are valid")
}

/// Mean age at first fracture in the reference cohort (years).
pub const REFERENCE_AGE_CENTER: f64 = 83.4;
