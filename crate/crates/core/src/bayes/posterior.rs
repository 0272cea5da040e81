use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::bayes::metropolis::{adaptive_metropolis, BlockRun, MetropolisSettings};
use crate::bayes::prior::{ParamPrior, PriorSpec};
use crate::cohort::CohortDataset;
use crate::error::{Error, Result};
use crate::hazard::Transition;
use crate::likelihood::{LikelihoodTerms, TransitionData};
use crate::model::{ModelFamily, ParamId, ParamKind, ParameterSet};
use crate::sum::exact_sum;

/// Generator used for every chain; recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha12 (rand_chacha 0.9), seed_from_u64(seed), stream = 8 * chain + transition";

const MAX_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_chains: usize,
    /// Total iterations per chain, burn-in included.
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    /// Initial proposal sd on the transformed scale; `None` derives it from
    /// the local curvature of the target at the starting point.
    pub initial_scale: Option<f64>,
    /// Sd of the Gaussian jitter applied to starting points (transformed scale).
    pub init_jitter: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_iterations: 10_000,
            n_burnin: 5_000,
            thin: 1,
            seed: 20_160_101,
            target_acceptance: 0.234,
            initial_scale: None,
            init_jitter: 0.1,
        }
    }
}

impl ChainConfig {
    pub fn n_retained(&self) -> usize {
        if self.thin == 0 {
            return 0;
        }
        self.n_iterations.saturating_sub(self.n_burnin) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.n_burnin >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.n_burnin, self.n_iterations
            )));
        }
        if self.n_retained() == 0 {
            return Err(Error::Config("configuration retains zero draws".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config("target acceptance must lie in (0, 1)".into()));
        }
        if let Some(s) = self.initial_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("initial scale must be positive".into()));
            }
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(Error::Config("init jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// MCMC output: `values[(chain * n_draws + draw) * n_params + param]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    family: ModelFamily,
    labels: Vec<ParamId>,
    n_chains: usize,
    n_draws: usize,
    values: Vec<f64>,
    age_center: f64,
    /// Post burn-in acceptance rate per chain and transition block, `None`
    /// for blocks with every parameter fixed.
    acceptance: Vec<BTreeMap<Transition, Option<f64>>>,
    config: Option<ChainConfig>,
    prior: Option<PriorSpec>,
}

impl PosteriorDraws {
    /// Assembles draws from raw storage; labels must follow [`ParamId::all`].
    pub fn from_parts(
        family: ModelFamily,
        n_chains: usize,
        n_draws: usize,
        values: Vec<f64>,
        age_center: f64,
    ) -> Result<Self> {
        let labels = ParamId::all(family);
        if n_chains == 0 || n_draws == 0 {
            return Err(Error::InsufficientDraws("draws must be non-empty".into()));
        }
        if values.len() != n_chains * n_draws * labels.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                n_chains * n_draws * labels.len(),
                values.len()
            )));
        }
        for row in values.chunks_exact(labels.len()) {
            for (id, v) in labels.iter().zip(row) {
                if !v.is_finite() || (id.kind.is_positive() && *v <= 0.0) {
                    return Err(Error::InvalidParameter(format!("invalid draw {v} for {id}")));
                }
            }
        }
        Ok(Self {
            family,
            labels,
            n_chains,
            n_draws,
            values,
            age_center,
            acceptance: Vec::new(),
            config: None,
            prior: None,
        })
    }

    /// A single degenerate draw at `params`, for plugin evaluation.
    pub fn from_point(params: &ParameterSet, age_center: f64) -> Self {
        Self::from_parts(params.family(), 1, 1, params.values(), age_center)
            .expect("parameter sets hold valid values")
    }

    pub fn with_metadata(mut self, config: Option<ChainConfig>, prior: Option<PriorSpec>) -> Self {
        self.config = config;
        self.prior = prior;
        self
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn labels(&self) -> &[ParamId] {
        &self.labels
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    /// Retained draws per chain.
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn total_draws(&self) -> usize {
        self.n_chains * self.n_draws
    }

    pub fn age_center(&self) -> f64 {
        self.age_center
    }

    pub fn config(&self) -> Option<&ChainConfig> {
        self.config.as_ref()
    }

    pub fn prior(&self) -> Option<&PriorSpec> {
        self.prior.as_ref()
    }

    pub fn acceptance(&self) -> &[BTreeMap<Transition, Option<f64>>] {
        &self.acceptance
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Parameter vector of draw `index` in chain-major order.
    pub fn row(&self, index: usize) -> &[f64] {
        let p = self.labels.len();
        &self.values[index * p..(index + 1) * p]
    }

    pub fn params(&self, index: usize) -> ParameterSet {
        ParameterSet::from_values(self.family, self.row(index)).expect("draws hold valid values")
    }

    pub fn param_index(&self, id: ParamId) -> Option<usize> {
        self.labels.iter().position(|l| *l == id)
    }

    /// Draws of one parameter split by chain.
    pub fn chains_of(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains)
            .map(|c| {
                (0..self.n_draws)
                    .map(|i| self.row(c * self.n_draws + i)[param])
                    .collect()
            })
            .collect()
    }

    /// Keeps at most `max` draws, evenly spaced over the pooled sequence.
    pub fn thinned(&self, max: usize) -> Self {
        let total = self.total_draws();
        if max == 0 || total <= max {
            return self.clone();
        }
        let p = self.labels.len();
        let mut values = Vec::with_capacity(max * p);
        for k in 0..max {
            let idx = k * total / max;
            values.extend_from_slice(self.row(idx));
        }
        Self {
            n_chains: 1,
            n_draws: max,
            values,
            acceptance: Vec::new(),
            ..self.clone()
        }
    }
}

/// Unnormalized log posterior, accumulated transition by transition.
pub fn log_posterior(
    family: ModelFamily,
    params: &ParameterSet,
    data: &CohortDataset,
    prior: &PriorSpec,
) -> Result<f64> {
    Ok(exact_sum(per_transition_log_posterior(family, params, data, prior)?.into_values()))
}

/// Log-likelihood component plus log-prior terms of each transition.
pub fn per_transition_log_posterior(
    family: ModelFamily,
    params: &ParameterSet,
    data: &CohortDataset,
    prior: &PriorSpec,
) -> Result<BTreeMap<Transition, f64>> {
    params.ensure_family(family)?;
    if prior.family() != family {
        return Err(Error::FamilyMismatch(format!("prior is for family {}", prior.family())));
    }
    let ll = LikelihoodTerms::new(family, data)?.components(params)?;
    ll.into_iter()
        .map(|(t, v)| Ok((t, v + prior.transition_log_prior(params, t)?)))
        .collect()
}

/// Sampling target of one transition on (log alpha, log lambda, beta_sex,
/// beta_age), restricted to the coordinates that are not fixed.
struct BlockTarget<'a> {
    data: &'a TransitionData,
    priors: [ParamPrior; 4],
    free: Vec<usize>,
    /// Full transformed vector with fixed entries filled in.
    template: [f64; 4],
}

impl<'a> BlockTarget<'a> {
    fn new(data: &'a TransitionData, prior: &PriorSpec) -> Self {
        let t = data.transition();
        let priors = ParamKind::ALL.map(|k| prior.get(ParamId::new(t, k)));
        let mut template = [0.0; 4];
        let mut free = Vec::new();
        for (i, p) in priors.iter().enumerate() {
            match *p {
                ParamPrior::Fixed(v) => template[i] = if i < 2 { v.ln() } else { v },
                _ => free.push(i),
            }
        }
        Self {
            data,
            priors,
            free,
            template,
        }
    }

    fn full(&self, x: &[f64]) -> [f64; 4] {
        let mut z = self.template;
        for (&i, v) in self.free.iter().zip(x) {
            z[i] = *v;
        }
        z
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let z = self.full(x);
        let mut lp = self.data.log_likelihood_raw(z[0], z[1], z[2], z[3]);
        for &i in &self.free {
            lp += if i < 2 {
                self.priors[i].log_density_of_log(z[i])
            } else {
                self.priors[i].log_density(z[i])
            };
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Moment-matched start: alpha = 1, lambda = events / exposure, betas 0.
    fn base_point(&self) -> Vec<f64> {
        let rate = if self.data.n_events() > 0 && self.data.exposure() > 0.0 {
            self.data.n_events() as f64 / self.data.exposure()
        } else {
            1.0
        };
        let base = [0.0, rate.ln(), 0.0, 0.0];
        self.free.iter().map(|&i| base[i]).collect()
    }

    fn curvature_scales(&self, x: &[f64]) -> Vec<f64> {
        let f0 = self.log_density(x);
        (0..x.len())
            .map(|j| {
                let h = 1e-4 * x[j].abs().max(1.0);
                let mut xp = x.to_vec();
                xp[j] += h;
                let fp = self.log_density(&xp);
                xp[j] -= 2.0 * h;
                let fm = self.log_density(&xp);
                let c = -(fp - 2.0 * f0 + fm) / (h * h);
                if c.is_finite() && c > 0.0 {
                    (1.0 / c.sqrt()).clamp(1e-6, 10.0)
                } else {
                    1.0
                }
            })
            .collect()
    }
}

fn run_block(
    target: &BlockTarget<'_>,
    config: &ChainConfig,
    chain: usize,
) -> Result<Option<BlockRun>> {
    if target.free.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream((8 * chain + target.data.transition().index()) as u64);

    let base = target.base_point();
    let jitter = Normal::new(0.0, config.init_jitter.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut init = None;
    for _ in 0..MAX_INIT_ATTEMPTS {
        let candidate: Vec<f64> = base
            .iter()
            .map(|b| if config.init_jitter > 0.0 { b + jitter.sample(&mut rng) } else { *b })
            .collect();
        if target.log_density(&candidate).is_finite() {
            init = Some(candidate);
            break;
        }
    }
    let init = init.ok_or_else(|| {
        Error::DivergentTarget(format!(
            "no finite starting point for transition {} after {MAX_INIT_ATTEMPTS} attempts",
            target.data.transition()
        ))
    })?;

    let initial_scale = match config.initial_scale {
        Some(s) => vec![s; init.len()],
        None => target.curvature_scales(&init),
    };
    let settings = MetropolisSettings {
        n_iterations: config.n_iterations,
        n_burnin: config.n_burnin,
        thin: config.thin,
        target_acceptance: config.target_acceptance,
        initial_scale,
    };
    adaptive_metropolis(|x| target.log_density(x), &init, &settings, &mut rng).map(Some)
}

/// Samples the posterior with one adaptive Metropolis block per transition.
///
/// The target factorizes over transitions, so each block evolves as its own
/// Markov chain with its own random stream; chains and blocks run in parallel
/// and the output is identical for a given `(data, prior, config)`.
pub fn sample_posterior(
    family: ModelFamily,
    data: &CohortDataset,
    prior: &PriorSpec,
    config: &ChainConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    if prior.family() != family {
        return Err(Error::FamilyMismatch(format!("prior is for family {}", prior.family())));
    }
    if prior.all_fixed() {
        return Err(Error::Config("every parameter is fixed; nothing to sample".into()));
    }
    let terms = LikelihoodTerms::new(family, data)?;
    let targets: Vec<BlockTarget<'_>> = terms.parts().iter().map(|p| BlockTarget::new(p, prior)).collect();

    let jobs: Vec<(usize, usize)> = (0..config.n_chains)
        .flat_map(|c| (0..targets.len()).map(move |b| (c, b)))
        .collect();
    let run = |&(c, b): &(usize, usize)| run_block(&targets[b], config, c);
    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Option<BlockRun>>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Option<BlockRun>>> = jobs.iter().map(run).collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let n_draws = config.n_retained();
    let labels = ParamId::all(family);
    let n_blocks = targets.len();
    let mut values = Vec::with_capacity(config.n_chains * n_draws * labels.len());
    let mut acceptance = Vec::with_capacity(config.n_chains);
    for c in 0..config.n_chains {
        let chain_runs = &runs[c * n_blocks..(c + 1) * n_blocks];
        acceptance.push(
            targets
                .iter()
                .zip(chain_runs)
                .map(|(t, r)| (t.data.transition(), r.as_ref().map(|r| r.acceptance)))
                .collect(),
        );
        for i in 0..n_draws {
            for (target, run) in targets.iter().zip(chain_runs) {
                let z = match run {
                    Some(r) => target.full(r.draw(i)),
                    None => target.template,
                };
                for (k, prior) in target.priors.iter().enumerate() {
                    let v = match *prior {
                        ParamPrior::Fixed(v) => v,
                        _ if k < 2 => z[k].exp(),
                        _ => z[k],
                    };
                    values.push(v);
                }
            }
        }
    }

    let mut draws = PosteriorDraws::from_parts(family, config.n_chains, n_draws, values, data.age_center())
        .map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::DivergentTarget(format!("sampler produced {msg}")),
            other => other,
        })?;
    draws.acceptance = acceptance;
    draws.config = Some(config.clone());
    draws.prior = Some(prior.clone());
    Ok(draws)
}
