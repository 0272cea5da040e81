use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bayes::{
    compare_fits, diagnostics, sample_posterior, summarize_draws, ChainConfig, ParamPrior, PosteriorDraws, PriorSpec,
};
use crate::cohort::CohortDataset;
use crate::error::{Error, Result};
use crate::io::{
    parse_dataset_csv, read_draws, write_comparison, write_curves, write_dataset, write_decomposition,
    write_diagnostics, write_draws, write_incidence, write_summary, AgeCenter, ConfigFile, Metadata, OutputDir,
};
use crate::model::{reference_posterior_means, ModelFamily, ParamId, ParameterSet, REFERENCE_AGE_CENTER};
use crate::outcome::{
    incidence_table, occupancy_decomposition, posterior_curves, Functional, Profile, Quadrature, QuadratureConfig,
    TimeGrid,
};
use crate::simulate::{simulate_cohort, Censoring, SimulationSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

const DEFAULT_PROFILES: &str = "w:70,w:80,w:90,m:70,m:80,m:90";

#[derive(Parser, Debug)]
#[command(name = "msm", version, about = "Bayesian Weibull multi-state models for fracture follow-up")]
pub struct Cli {
    /// Flat key = value run file; command line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort and write it as dataset.csv
    Simulate(SimulateArgs),
    /// Sample the posterior; writes draws.csv, summary.csv and diagnostics.csv
    Fit(FitArgs),
    /// Incidence table and transition-probability curves from saved draws
    Predict(PredictArgs),
    /// Ever-refractured versus currently-refractured curves (illness-death)
    Decompose(DecomposeArgs),
    /// Fit both families to one dataset and compare the shared transitions
    Compare(CompareArgs),
}

#[derive(Args, Debug, Default)]
struct SimulationArgs {
    /// Number of simulated subjects
    #[arg(long)]
    n: Option<usize>,
    /// Administrative censoring time (years)
    #[arg(long)]
    censor: Option<f64>,
    /// Staggered entry: discharge uniform over [0, ACCRUAL] years before the censoring horizon
    #[arg(long)]
    accrual: Option<f64>,
    /// Seed of the simulated cohort (defaults to --seed)
    #[arg(long)]
    sim_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "YEARS")]
    age_center: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimulationArgs,
}

#[derive(Args, Debug)]
struct SamplerArgs {
    #[arg(long)]
    family: Option<String>,
    /// Subject CSV; without it a cohort is simulated (see --n)
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Age centering constant, or `auto` for the dataset mean
    #[arg(long, value_name = "YEARS|auto")]
    age_center: Option<String>,
    #[arg(long)]
    chains: Option<usize>,
    /// Iterations per chain, burn-in included
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Prior override, e.g. `FR.alpha=gamma:0.01:0.01` or `FD.beta_sex=fixed:0`
    #[arg(long, value_name = "PARAM=PRIOR")]
    prior: Vec<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimulationArgs,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Run the illness-death fit on a different seed than the competing-risks fit
    #[arg(long)]
    independent_seeds: bool,
}

#[derive(Args, Debug)]
struct QuadArgs {
    /// Gauss-Legendre nodes per panel
    #[arg(long)]
    nodes: Option<usize>,
    /// Refinement tolerance, or `off`
    #[arg(long)]
    quad_tolerance: Option<String>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Draws file written by `fit`
    #[arg(long, value_name = "PATH")]
    draws: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<String>,
    /// Incidence horizon (years)
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Evenly spaced subset of draws used for curves and tables
    #[arg(long)]
    max_draws: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long, value_name = "PATH")]
    draws: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<String>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    max_draws: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    quad: QuadArgs,
}

/// Flag values layered over a run file.
struct Settings {
    file: ConfigFile,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Self { file })
    }

    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn or<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    fn family(&self, flag: Option<String>, default: ModelFamily) -> Result<ModelFamily> {
        match self.pick(flag, "family")? {
            Some(s) => s.parse(),
            None => Ok(default),
        }
    }

    fn age_center(&self, flag: Option<String>) -> Result<AgeCenter> {
        match self.pick(flag, "age-center")? {
            Some(s) => s.parse(),
            None => Ok(AgeCenter::Fixed(REFERENCE_AGE_CENTER)),
        }
    }

    fn truth(&self, family: ModelFamily) -> Result<ParameterSet> {
        let mut values = reference_posterior_means(family).values();
        let labels = ParamId::all(family);
        for (key, v) in self.file.with_prefix("truth.") {
            let id: ParamId = key.parse()?;
            let slot = labels
                .iter()
                .position(|l| *l == id)
                .ok_or_else(|| Error::Config(format!("truth.{key} is not a {} parameter", family.short_name())))?;
            values[slot] = v
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {v:?} for truth.{key}")))?;
        }
        ParameterSet::from_values(family, &values)
    }

    fn prior(&self, family: ModelFamily, flags: &[String]) -> Result<PriorSpec> {
        let mut prior = PriorSpec::default_for(family);
        let from_flags = flags.iter().map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("--prior expects PARAM=PRIOR, got {s:?}")))
        });
        let from_file = self.file.with_prefix("prior.").map(Ok);
        // file entries first so that flags overwrite them
        for entry in from_file.chain(from_flags) {
            let (k, v) = entry?;
            prior.set(k.parse()?, v.parse::<ParamPrior>()?)?;
        }
        Ok(prior)
    }

    fn quadrature(&self, args: &QuadArgs) -> Result<QuadratureConfig> {
        let mut q = QuadratureConfig::default();
        if let Some(n) = self.pick(args.nodes, "nodes")? {
            q.nodes = n;
        }
        if let Some(tol) = self.pick(args.quad_tolerance.clone(), "quad-tolerance")? {
            q.tolerance = if tol.eq_ignore_ascii_case("off") {
                None
            } else {
                Some(
                    tol.parse()
                        .map_err(|_| Error::Config(format!("invalid quadrature tolerance {tol:?}")))?,
                )
            };
        }
        Ok(q)
    }

    fn simulation(
        &self,
        family: ModelFamily,
        args: &SimulationArgs,
        seed: u64,
        age_center: f64,
    ) -> Result<SimulationSpec> {
        let n = self.or(args.n, "n", 1000)?;
        let censor = self.or(args.censor, "censor", 8.0)?;
        let censoring = match self.pick(args.accrual, "accrual")? {
            Some(accrual) => Censoring::Staggered {
                accrual,
                study_end: censor,
            },
            None => Censoring::Administrative(censor),
        };
        let mut spec = SimulationSpec::new(family, self.truth(family)?, n, self.or(args.sim_seed, "sim-seed", seed)?);
        spec.censoring = censoring;
        spec.age_center = age_center;
        spec.validate()?;
        Ok(spec)
    }
}

/// Where the subjects of a run come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Dataset { path: PathBuf, age_center: AgeCenter },
    Simulation(SimulationSpec),
}

/// Everything a fitting run needs, after merging run file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: ModelFamily,
    pub prior: PriorSpec,
    pub chains: ChainConfig,
    pub quadrature: QuadratureConfig,
    pub profiles: Vec<Profile>,
    pub out: PathBuf,
    pub input: InputSource,
}

impl RunConfig {
    fn from_args(settings: &Settings, args: &SamplerArgs, default_family: ModelFamily) -> Result<Self> {
        let family = settings.family(args.family.clone(), default_family)?;
        let defaults = ChainConfig::default();
        let chains = ChainConfig {
            n_chains: settings.or(args.chains, "chains", defaults.n_chains)?,
            n_iterations: settings.or(args.iters, "iters", defaults.n_iterations)?,
            n_burnin: settings.or(args.burnin, "burnin", defaults.n_burnin)?,
            thin: settings.or(args.thin, "thin", defaults.thin)?,
            seed: settings.or(args.seed, "seed", defaults.seed)?,
            ..defaults
        };
        chains.validate()?;
        let age_center = settings.age_center(args.age_center.clone())?;
        let data: Option<PathBuf> = settings.pick(args.data.clone(), "data")?;
        let simulated = args.sim.n.is_some() || settings.file.get_str("n").is_some();
        let input = match (data, simulated) {
            (Some(_), true) => {
                return Err(Error::Config("give either a dataset (--data) or a simulation size (--n), not both".into()))
            }
            (Some(path), false) => InputSource::Dataset { path, age_center },
            (None, true) => {
                let center = match age_center {
                    AgeCenter::Fixed(c) => c,
                    AgeCenter::DatasetMean => {
                        return Err(Error::Config("simulated cohorts need a numeric age center".into()))
                    }
                };
                InputSource::Simulation(settings.simulation(family, &args.sim, chains.seed, center)?)
            }
            (None, false) => return Err(Error::Config("no input: pass --data PATH or --n N".into())),
        };
        let profiles = Profile::parse_list(settings.file.get_str("profiles").unwrap_or(DEFAULT_PROFILES))?;
        Ok(Self {
            family,
            prior: settings.prior(family, &args.prior)?,
            chains,
            quadrature: QuadratureConfig::default(),
            profiles,
            out: settings.or(args.out.clone(), "out", PathBuf::from("out"))?,
            input,
        })
    }

    pub fn load_dataset(&self) -> Result<CohortDataset> {
        match &self.input {
            InputSource::Dataset { path, age_center } => {
                let parsed = parse_dataset_csv(path, *age_center)?;
                for w in &parsed.warnings {
                    eprintln!("warning: {w}");
                }
                Ok(parsed.dataset)
            }
            InputSource::Simulation(spec) => simulate_cohort(spec),
        }
    }

    fn metadata(&self, family: ModelFamily, prior: &PriorSpec) -> Metadata {
        let mut m = Metadata::new();
        m.family(family).chains(&self.chains).priors(prior);
        match &self.input {
            InputSource::Dataset { path, .. } => m.push("data", path.display()),
            InputSource::Simulation(spec) => m.push("data", format!("simulated n={} seed={}", spec.n_subjects, spec.seed)),
        };
        m
    }
}

fn resolve_draws(settings: &Settings, flag: Option<PathBuf>) -> Result<PosteriorDraws> {
    let path: PathBuf = settings
        .pick(flag, "draws")?
        .ok_or_else(|| Error::Config("--draws PATH is required".into()))?;
    read_draws(&path)
}

fn profile_tag(p: &Profile) -> String {
    format!("{}{}", p.sex_label().to_ascii_lowercase(), p.age)
}

fn draws_header(draws: &PosteriorDraws, quad: &QuadratureConfig) -> Metadata {
    let mut m = Metadata::new();
    m.family(draws.family()).push("age_center", draws.age_center());
    if let Some(c) = draws.config() {
        m.chains(c);
    }
    if let Some(p) = draws.prior() {
        m.priors(p);
    }
    m.quadrature(quad);
    m
}

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn report_manifest(out: &OutputDir) {
    for p in out.manifest() {
        say!("wrote {}", p.display());
    }
}

fn cmd_simulate(settings: &Settings, args: SimulateArgs) -> Result<()> {
    let family = settings.family(args.family, ModelFamily::IllnessDeath)?;
    let center = match settings.age_center(args.age_center)? {
        AgeCenter::Fixed(c) => c,
        AgeCenter::DatasetMean => return Err(Error::Config("simulate needs a numeric age center".into())),
    };
    let seed = settings.or(args.seed, "seed", ChainConfig::default().seed)?;
    let spec = settings.simulation(family, &args.sim, seed, center)?;
    let dataset = simulate_cohort(&spec)?;
    let mut meta = Metadata::new();
    meta.family(family)
        .push("n", spec.n_subjects)
        .push("seed", spec.seed)
        .push("censoring", format!("{:?}", spec.censoring))
        .push("age_center", spec.age_center);
    for (id, v) in ParamId::all(family).iter().zip(spec.true_params.values()) {
        meta.push(format!("truth.{id}"), v);
    }
    let comments: Vec<String> = meta.entries().iter().map(|(k, v)| format!("{k}: {v}")).collect();
    let mut out = OutputDir::create(&settings.or(args.out, "out", PathBuf::from("."))?)?;
    out.write("dataset.csv", |w| write_dataset(w, &dataset, &comments))?;
    report_manifest(&out);
    Ok(())
}

fn fit_and_report(
    config: &RunConfig,
    family: ModelFamily,
    prior: &PriorSpec,
    chains: &ChainConfig,
    data: &CohortDataset,
    out: &mut OutputDir,
    suffix: &str,
) -> Result<PosteriorDraws> {
    let draws =
        sample_posterior(family, data, prior, chains)?.with_metadata(Some(chains.clone()), Some(prior.clone()));
    let mut meta = config.metadata(family, prior);
    meta.push("age_center", data.age_center());
    let summary = summarize_draws(&draws);
    out.write(&format!("draws{suffix}.csv"), |w| write_draws(w, &draws))?;
    out.write(&format!("summary{suffix}.csv"), |w| write_summary(w, &meta, &summary))?;
    match diagnostics(&draws) {
        Ok(report) => {
            out.write(&format!("diagnostics{suffix}.csv"), |w| write_diagnostics(w, &meta, &report))?;
        }
        Err(e @ Error::InsufficientDraws(_)) => eprintln!("warning: diagnostics skipped: {e}"),
        Err(e) => return Err(e),
    }
    Ok(draws)
}

fn cmd_fit(settings: &Settings, args: FitArgs) -> Result<()> {
    let config = RunConfig::from_args(settings, &args.sampler, ModelFamily::IllnessDeath)?;
    let data = config.load_dataset()?;
    let mut out = OutputDir::create(&config.out)?;
    let draws = fit_and_report(&config, config.family, &config.prior, &config.chains, &data, &mut out, "")?;
    say!("{:<16}{:>12}{:>12}", "parameter", "mean", "sd");
    for (id, summary) in summarize_draws(&draws) {
        say!("{:<16}{:>12.4}{:>12.4}", id.to_string(), summary.mean, summary.sd);
    }
    report_manifest(&out);
    Ok(())
}

fn cmd_compare(settings: &Settings, args: CompareArgs) -> Result<()> {
    let config = RunConfig::from_args(settings, &args.sampler, ModelFamily::IllnessDeath)?;
    let data = config.load_dataset()?;
    let mut out = OutputDir::create(&config.out)?;
    let prior_id = config.prior.for_family(ModelFamily::IllnessDeath);
    let prior_cr = prior_id.for_family(ModelFamily::CompetingRisks);
    let chains_cr = config.chains.clone();
    let mut chains_id = config.chains.clone();
    if args.independent_seeds {
        chains_id.seed = chains_id.seed.wrapping_add(1);
    }
    let cr = fit_and_report(&config, ModelFamily::CompetingRisks, &prior_cr, &chains_cr, &data, &mut out, "_cr")?;
    let id = fit_and_report(&config, ModelFamily::IllnessDeath, &prior_id, &chains_id, &data, &mut out, "_id")?;
    let cmp = compare_fits(&cr, &id)?;
    let mut meta = config.metadata(ModelFamily::IllnessDeath, &prior_id);
    meta.push("seed_cr", chains_cr.seed).push("seed_id", chains_id.seed);
    out.write("compare.csv", |w| write_comparison(w, &meta, &cmp))?;
    match cmp.max_ratio() {
        Some(r) => say!("max |mean_cr - mean_id| / combined MCSE: {r:.4}"),
        None => say!("max discrepancy ratio undefined (zero-variance parameter)"),
    }
    report_manifest(&out);
    Ok(())
}

fn grid(settings: &Settings, max: Option<f64>, points: Option<usize>, default_max: f64) -> Result<TimeGrid> {
    TimeGrid::uniform(
        settings.or(max, "grid-max", default_max)?,
        settings.or(points, "grid-points", 21)?,
    )
}

fn cmd_predict(settings: &Settings, args: PredictArgs) -> Result<()> {
    let quad_config = settings.quadrature(&args.quad)?;
    let quad = Quadrature::new(quad_config.clone())?;
    let all = resolve_draws(settings, args.draws)?;
    let draws = all.thinned(settings.or(args.max_draws, "max-draws", 200)?);
    let profiles = Profile::parse_list(&settings.or(args.profiles, "profiles", DEFAULT_PROFILES.to_string())?)?;
    let horizon = settings.or(args.horizon, "horizon", 1.0)?;
    let level = settings.or(args.level, "level", 0.95)?;
    let grid = grid(settings, args.grid_max, args.grid_points, 5.0)?;
    let mut meta = draws_header(&all, &quad_config);
    meta.push("draws_used", draws.total_draws()).push("level", level);

    let table = incidence_table(&draws, &profiles, horizon, &quad)?;
    let functionals = Functional::for_family(draws.family());
    let mut per_profile = Vec::with_capacity(profiles.len());
    for p in &profiles {
        let cov = p.covariates(draws.age_center())?;
        per_profile.push(posterior_curves(&draws, &functionals, &cov, &grid, &quad, level)?);
    }

    let mut out = OutputDir::create(&settings.or(args.out, "out", PathBuf::from("out"))?)?;
    let mut table_meta = meta.clone();
    table_meta.push("horizon", horizon);
    out.write("incidence.csv", |w| write_incidence(w, &table_meta, &table))?;
    for (j, f) in functionals.iter().enumerate() {
        let curves: Vec<(Profile, _)> = profiles
            .iter()
            .zip(&per_profile)
            .map(|(p, c)| (*p, c[j].clone()))
            .collect();
        let mut m = meta.clone();
        m.push("quantity", f.name());
        out.write(&format!("curve_{}.csv", f.name()), |w| write_curves(w, &m, &curves))?;
    }
    report_manifest(&out);
    Ok(())
}

fn cmd_decompose(settings: &Settings, args: DecomposeArgs) -> Result<()> {
    let quad_config = settings.quadrature(&args.quad)?;
    let quad = Quadrature::new(quad_config.clone())?;
    let all = resolve_draws(settings, args.draws)?;
    let draws = all.thinned(settings.or(args.max_draws, "max-draws", 200)?);
    let profiles = Profile::parse_list(&settings.or(args.profiles, "profiles", "w:80".to_string())?)?;
    let grid = grid(settings, args.grid_max, args.grid_points, 8.0)?;
    let mut results = Vec::with_capacity(profiles.len());
    for p in &profiles {
        let cov = p.covariates(draws.age_center())?;
        results.push(occupancy_decomposition(&draws, &cov, &grid, &quad)?);
    }
    let mut out = OutputDir::create(&settings.or(args.out, "out", PathBuf::from("out"))?)?;
    for (p, d) in profiles.iter().zip(&results) {
        let mut m = draws_header(&all, &quad_config);
        m.push("draws_used", draws.total_draws()).push("profile", p);
        out.write(&format!("decompose_{}.csv", profile_tag(p)), |w| write_decomposition(w, &m, d))?;
    }
    report_manifest(&out);
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = Settings::load(cli.config.as_deref()).and_then(|settings| match cli.command {
        Command::Simulate(a) => cmd_simulate(&settings, a),
        Command::Fit(a) => cmd_fit(&settings, a),
        Command::Predict(a) => cmd_predict(&settings, a),
        Command::Decompose(a) => cmd_decompose(&settings, a),
        Command::Compare(a) => cmd_compare(&settings, a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(v) = &e {
                for violation in v.iter().skip(1).take(20) {
                    eprintln!("  {violation}");
                }
            }
            exit_code(&e)
        }
    }
}
