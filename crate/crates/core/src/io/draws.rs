//! Posterior draws as CSV: `chain,iteration,<one column per parameter>`.
//!
//! Values are written in shortest round-trip form, so reading a file back
//! reproduces the draws bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bayes::{ChainConfig, ParamPrior, PosteriorDraws, PriorSpec};
use crate::error::{io_at, Error, Result};
use crate::io::metadata::Metadata;
use crate::model::{ModelFamily, ParamId};

pub fn draws_metadata(draws: &PosteriorDraws) -> Metadata {
    let mut m = Metadata::new();
    m.family(draws.family()).push("age_center", draws.age_center());
    if let Some(c) = draws.config() {
        m.chains(c);
    }
    if let Some(p) = draws.prior() {
        m.priors(p);
    }
    m
}

pub fn write_draws<W: Write>(mut out: W, draws: &PosteriorDraws) -> Result<()> {
    draws_metadata(draws).write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(draws.labels().iter().map(ToString::to_string));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for c in 0..draws.n_chains() {
        for i in 0..draws.n_draws() {
            row.clear();
            row.push(c.to_string());
            row.push(i.to_string());
            row.extend(draws.row(c * draws.n_draws() + i).iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn meta_number<T: std::str::FromStr>(meta: &Metadata, key: &str, source: &str) -> Result<Option<T>> {
    meta.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("{source}: bad metadata value {key}: {v:?}")))
        })
        .transpose()
}

pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    parse_draws(&text, &path.display().to_string())
}

pub fn parse_draws(text: &str, source: &str) -> Result<PosteriorDraws> {
    let meta = Metadata::parse(text);
    let family: ModelFamily = meta
        .get("family")
        .ok_or_else(|| Error::Config(format!("{source}: missing family metadata")))?
        .parse()?;
    let age_center: f64 = meta_number(&meta, "age_center", source)?
        .ok_or_else(|| Error::Config(format!("{source}: missing age_center metadata")))?;

    let labels = ParamId::all(family);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let expected: Vec<String> = ["chain".to_string(), "iteration".to_string()]
        .into_iter()
        .chain(labels.iter().map(ToString::to_string))
        .collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            path: source.into(),
            line: rdr.position().line(),
            message: format!("columns must be {}", expected.join(",")),
        });
    }

    let mut values = Vec::new();
    let mut chain_lengths: Vec<usize> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: source.into(),
            line,
            message,
        };
        let chain: usize = row[0].parse().map_err(|_| bad(format!("bad chain index {:?}", &row[0])))?;
        let iteration: usize = row[1].parse().map_err(|_| bad(format!("bad iteration {:?}", &row[1])))?;
        if chain == chain_lengths.len() {
            chain_lengths.push(0);
        }
        if chain + 1 != chain_lengths.len() || iteration != chain_lengths[chain] {
            return Err(bad("draws must be grouped by chain with consecutive iterations".into()));
        }
        chain_lengths[chain] += 1;
        for field in row.iter().skip(2) {
            values.push(field.parse::<f64>().map_err(|_| bad(format!("bad value {field:?}")))?);
        }
    }
    let n_draws = chain_lengths.first().copied().unwrap_or(0);
    if chain_lengths.iter().any(|&n| n != n_draws) {
        return Err(Error::Config(format!("{source}: chains have unequal lengths")));
    }
    let draws = PosteriorDraws::from_parts(family, chain_lengths.len(), n_draws, values, age_center)?;

    let config = match meta_number::<u64>(&meta, "seed", source)? {
        Some(seed) => Some(ChainConfig {
            seed,
            n_chains: meta_number(&meta, "chains", source)?.unwrap_or(chain_lengths.len()),
            n_iterations: meta_number(&meta, "iterations", source)?.unwrap_or_default(),
            n_burnin: meta_number(&meta, "burnin", source)?.unwrap_or_default(),
            thin: meta_number(&meta, "thin", source)?.unwrap_or(1),
            target_acceptance: meta_number(&meta, "target_acceptance", source)?.unwrap_or(0.234),
            ..ChainConfig::default()
        }),
        None => None,
    };
    let mut prior = PriorSpec::default_for(family);
    let mut any_prior = false;
    for id in &labels {
        if let Some(p) = meta.get(&format!("prior.{id}")) {
            prior.set(*id, p.parse::<ParamPrior>()?)?;
            any_prior = true;
        }
    }
    Ok(draws.with_metadata(config, any_prior.then_some(prior)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_posterior_means;

    #[test]
    fn round_trip_is_exact() {
        let p = reference_posterior_means(ModelFamily::CompetingRisks);
        let mut values = Vec::new();
        for k in 0..6 {
            values.extend(p.values().iter().map(|v| v * (1.0 + 0.1 / (k as f64 + 3.0))));
        }
        let prior = PriorSpec::default_for(ModelFamily::CompetingRisks);
        let draws = PosteriorDraws::from_parts(ModelFamily::CompetingRisks, 2, 3, values, 83.4)
            .unwrap()
            .with_metadata(Some(ChainConfig::default()), Some(prior.clone()));
        let mut buf = Vec::new();
        write_draws(&mut buf, &draws).unwrap();
        let back = parse_draws(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back.values(), draws.values());
        assert_eq!(back.n_chains(), 2);
        assert_eq!(back.prior(), Some(&prior));
        assert_eq!(back.config().unwrap().seed, ChainConfig::default().seed);
    }

    #[test]
    fn rejects_wrong_columns() {
        let text = "# family: cr\n# age_center: 83.4\nchain,iteration,FR.alpha\n0,0,1\n";
        assert!(matches!(parse_draws(text, "mem"), Err(Error::Parse { .. })));
        assert!(parse_draws("chain,iteration\n", "mem").is_err());
    }
}
