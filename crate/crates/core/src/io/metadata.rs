use std::io::Write;

use crate::bayes::{ChainConfig, PriorSpec, RNG_ALGORITHM};
use crate::model::ModelFamily;
use crate::outcome::QuadratureConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ordered `key: value` pairs written as `# ` comment lines atop every file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        let mut m = Self::default();
        m.push("artifact", format!("msm {VERSION}"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn family(&mut self, family: ModelFamily) -> &mut Self {
        self.push("family", family.short_name())
    }

    pub fn priors(&mut self, prior: &PriorSpec) -> &mut Self {
        for (id, p) in prior.iter() {
            self.push(format!("prior.{id}"), p);
        }
        self
    }

    pub fn chains(&mut self, config: &ChainConfig) -> &mut Self {
        self.push("seed", config.seed)
            .push("chains", config.n_chains)
            .push("iterations", config.n_iterations)
            .push("burnin", config.n_burnin)
            .push("thin", config.thin)
            .push("target_acceptance", config.target_acceptance)
            .push("rng", RNG_ALGORITHM)
    }

    pub fn quadrature(&mut self, q: &QuadratureConfig) -> &mut Self {
        let tol = q.tolerance.map_or_else(|| "off".to_string(), |t| t.to_string());
        self.push(
            "quadrature",
            format!(
                "gauss-legendre nodes={} panels_per_year={} min_panels={} grading={} refinement_tolerance={tol}",
                q.nodes, q.panels_per_unit, q.min_panels, q.grading
            ),
        )
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}: {v}")?;
        }
        Ok(())
    }

    /// Collects `# key: value` lines; other lines are skipped.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .filter_map(|l| l.split_once(':'))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }
}
