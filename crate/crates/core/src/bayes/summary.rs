use crate::bayes::posterior::PosteriorDraws;
use crate::model::ParamId;
use crate::sum::exact_sum;

/// Mean, sd and central quantiles of a set of draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

impl Summary {
    /// Panics on an empty slice.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of no values");
        let n = values.len() as f64;
        let mean = exact_sum(values.iter().copied()) / n;
        let sd = if values.len() > 1 {
            (exact_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            sd,
            q025: quantile_sorted(&sorted, 0.025),
            q50: quantile_sorted(&sorted, 0.5),
            q975: quantile_sorted(&sorted, 0.975),
        }
    }
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// One row per parameter, pooled over chains, on the natural parameter scale.
pub fn summarize_draws(draws: &PosteriorDraws) -> Vec<(ParamId, Summary)> {
    draws
        .labels()
        .iter()
        .enumerate()
        .map(|(p, &id)| {
            let pooled: Vec<f64> = draws.chains_of(p).into_iter().flatten().collect();
            (id, Summary::of(&pooled))
        })
        .collect()
}
