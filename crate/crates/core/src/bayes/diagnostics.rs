//! Convergence diagnostics: split R-hat, effective sample size and MCSE.

use crate::bayes::posterior::PosteriorDraws;
use crate::error::{Error, Result};
use crate::model::ParamId;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDiagnostics {
    pub id: ParamId,
    /// `None` when some half-chain has zero variance (R-hat undefined).
    pub rhat: Option<f64>,
    /// `None` when the pooled draws have zero variance.
    pub ess: Option<f64>,
    pub mcse: Option<f64>,
    /// Post burn-in acceptance rate of the parameter's block, per chain.
    pub acceptance: Vec<f64>,
}

impl ParamDiagnostics {
    pub fn rhat_undefined(&self) -> bool {
        self.rhat.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub params: Vec<ParamDiagnostics>,
    pub total_draws: usize,
}

impl DiagnosticsReport {
    pub fn get(&self, id: ParamId) -> Option<&ParamDiagnostics> {
        self.params.iter().find(|p| p.id == id)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Halves every chain; the middle draw of odd-length chains is dropped.
pub fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect()
}

/// Split potential scale reduction; `None` if any half-chain is constant.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let split = split_chains(chains);
    let n = split.first()?.len();
    if n < 2 {
        return None;
    }
    let vars: Vec<f64> = split.iter().map(|c| sample_variance(c)).collect();
    if vars.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let within = mean(&vars);
    let between = nf * sample_variance(&means);
    let var_plus = (nf - 1.0) / nf * within + between / nf;
    Some((var_plus / within).sqrt())
}

fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size on split chains, truncated with Geyer's
/// initial monotone positive sequence and capped at the number of draws.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Option<f64> {
    let split = split_chains(chains);
    let m = split.len();
    let n = split.first()?.len();
    if n < 4 {
        return None;
    }
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let acov_mean = |lag: usize| -> f64 {
        split
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let mean_var = acov_mean(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_variance(&means);
    }
    if !(var_plus > 0.0) {
        return None;
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov_mean(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n + 1];
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[0] = even;
    rho_hat[1] = odd;
    let mut s = 1;
    while s < n - 4 && even + odd > 0.0 {
        even = rho(s + 1);
        odd = rho(s + 2);
        if even + odd >= 0.0 {
            rho_hat[s + 1] = even;
            rho_hat[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if even > 0.0 {
        rho_hat[max_s + 1] = even;
    }
    let mut k = 1;
    while k + 3 <= max_s {
        if rho_hat[k + 1] + rho_hat[k + 2] > rho_hat[k - 1] + rho_hat[k] {
            rho_hat[k + 1] = (rho_hat[k - 1] + rho_hat[k]) / 2.0;
            rho_hat[k + 2] = rho_hat[k + 1];
        }
        k += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s + 1];
    Some((total / tau).min(total))
}

pub fn diagnostics(draws: &PosteriorDraws) -> Result<DiagnosticsReport> {
    if draws.n_chains() < 2 {
        return Err(Error::InsufficientDraws(format!(
            "diagnostics need at least 2 chains, got {}",
            draws.n_chains()
        )));
    }
    if draws.n_draws() < 4 {
        return Err(Error::InsufficientDraws(format!(
            "diagnostics need at least 4 draws per chain, got {}",
            draws.n_draws()
        )));
    }
    let params = draws
        .labels()
        .iter()
        .enumerate()
        .map(|(p, &id)| {
            let chains = draws.chains_of(p);
            let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
            let sd = sample_variance(&pooled).sqrt();
            let ess = if sd > 0.0 { effective_sample_size(&chains) } else { None };
            let acceptance = draws
                .acceptance()
                .iter()
                .filter_map(|per_block| per_block.get(&id.transition).copied().flatten())
                .collect();
            ParamDiagnostics {
                id,
                rhat: split_rhat(&chains),
                ess,
                mcse: ess.map(|e| sd / e.sqrt()),
                acceptance,
            }
        })
        .collect();
    Ok(DiagnosticsReport {
        params,
        total_draws: draws.total_draws(),
    })
}
