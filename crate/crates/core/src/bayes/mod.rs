//! Priors, posterior sampling, diagnostics and posterior summaries.

pub mod compare;
pub mod diagnostics;
pub mod metropolis;
pub mod posterior;
pub mod prior;
pub mod summary;

pub use compare::{compare_fits, CompareRow, Comparison, FitSummary};
pub use diagnostics::{diagnostics, DiagnosticsReport, ParamDiagnostics};
pub use posterior::{
    log_posterior, per_transition_log_posterior, sample_posterior, ChainConfig, PosteriorDraws, RNG_ALGORITHM,
};
pub use prior::{log_prior, ParamPrior, PriorSpec};
pub use summary::{summarize_draws, Summary};
