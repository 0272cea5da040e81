//! Adaptive random-walk Metropolis for one block of unconstrained coordinates.
//!
//! During burn-in the proposal covariance is re-estimated over doubling
//! windows and its overall scale follows a Robbins-Monro recursion toward the
//! target acceptance rate. Both are frozen when burn-in ends, so the retained
//! draws come from a fixed Metropolis kernel.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Proposals tried from the start before a target with no finite value is
/// declared divergent.
pub const MAX_INITIAL_FAILURES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisSettings {
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub target_acceptance: f64,
    /// Initial proposal standard deviation per coordinate.
    pub initial_scale: Vec<f64>,
}

impl MetropolisSettings {
    pub fn n_retained(&self) -> usize {
        (self.n_iterations.saturating_sub(self.n_burnin)) / self.thin.max(1)
    }
}

#[derive(Debug, Clone)]
pub struct BlockRun {
    pub dim: usize,
    /// Retained states, row-major (`n_retained x dim`).
    pub draws: Vec<f64>,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance: f64,
}

impl BlockRun {
    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.draws.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Half-open `[start, end)` covariance-estimation windows inside burn-in.
pub fn adaptation_windows(n_burnin: usize) -> Vec<(usize, usize)> {
    if n_burnin < 20 {
        return Vec::new();
    }
    let init = ((n_burnin as f64 * 0.15) as usize).min(75);
    let term = ((n_burnin as f64 * 0.1) as usize).min(50);
    let end = n_burnin - term;
    let mut ends = Vec::new();
    let (mut start, mut width) = (init, 25usize);
    while start < end {
        let mut stop = start + width;
        if stop + 2 * width > end {
            stop = end;
        }
        ends.push((start, stop));
        start = stop;
        width *= 2;
    }
    ends
}

pub fn adaptive_metropolis<F, R>(
    log_density: F,
    init: &[f64],
    settings: &MetropolisSettings,
    rng: &mut R,
) -> Result<BlockRun>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let d = init.len();
    if d == 0 {
        return Err(Error::Config("sampling block has no free coordinates".into()));
    }
    if settings.initial_scale.len() != d {
        return Err(Error::Config("initial scale length does not match block".into()));
    }
    if settings.n_burnin >= settings.n_iterations || settings.thin == 0 || settings.n_retained() == 0 {
        return Err(Error::Config(format!(
            "chain settings retain no draws ({} iterations, {} burn-in, thin {})",
            settings.n_iterations, settings.n_burnin, settings.thin
        )));
    }

    let mut x = init.to_vec();
    let mut fx = log_density(&x);
    if !fx.is_finite() {
        return Err(Error::DivergentTarget(format!("log density at the initial point is {fx}")));
    }

    let mut chol = vec![0.0; d * d];
    for (i, s) in settings.initial_scale.iter().enumerate() {
        chol[i * d + i] = *s;
    }
    let base_log_scale = (2.38 / (d as f64).sqrt()).ln();
    let mut log_scale = base_log_scale;
    let mut since_reset = 0usize;

    let windows = adaptation_windows(settings.n_burnin);
    let mut next_window = 0;
    let mut moments = Welford::new(d);

    let mut draws = Vec::with_capacity(settings.n_retained() * d);
    let mut accepted_after = 0usize;
    let mut finite_seen = 0usize;
    let mut z = vec![0.0; d];
    let mut y = vec![0.0; d];

    for iter in 0..settings.n_iterations {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let step = log_scale.exp();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += chol[i * d + j] * z[j];
            }
            y[i] = x[i] + step * acc;
        }
        let fy = log_density(&y);
        let log_ratio = if fy.is_nan() { f64::NEG_INFINITY } else { fy - fx };
        if fy.is_finite() {
            finite_seen += 1;
        } else if iter + 1 == MAX_INITIAL_FAILURES && finite_seen == 0 {
            return Err(Error::DivergentTarget(format!(
                "no finite log density in the first {MAX_INITIAL_FAILURES} proposals"
            )));
        }
        let u: f64 = rng.random();
        let accept = u.ln() < log_ratio;
        if accept {
            std::mem::swap(&mut x, &mut y);
            fx = fy;
        }

        if iter < settings.n_burnin {
            since_reset += 1;
            let a = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
            log_scale += (a - settings.target_acceptance) / (since_reset as f64).powf(0.6);
            if next_window < windows.len() {
                let (start, end) = windows[next_window];
                if iter >= start {
                    moments.push(&x);
                }
                if iter + 1 == end {
                    if let Some(l) = moments.regularized_cholesky() {
                        chol = l;
                        log_scale = base_log_scale;
                        since_reset = 0;
                    }
                    moments = Welford::new(d);
                    next_window += 1;
                }
            }
        } else {
            if accept {
                accepted_after += 1;
            }
            if (iter - settings.n_burnin + 1) % settings.thin == 0 {
                draws.extend_from_slice(&x);
            }
        }
    }

    Ok(BlockRun {
        dim: d,
        draws,
        acceptance: accepted_after as f64 / (settings.n_iterations - settings.n_burnin) as f64,
    })
}

/// Running mean and covariance.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d * d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        let d = self.mean.len();
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[i * d + j] += after * delta[j];
            }
        }
    }

    /// Cholesky factor of the sample covariance shrunk toward its diagonal,
    /// or `None` when there is too little information.
    fn regularized_cholesky(&self) -> Option<Vec<f64>> {
        let d = self.mean.len();
        if self.n < 3 {
            return None;
        }
        let n = self.n as f64;
        let w = n / (n + 5.0);
        let mut cov = vec![0.0; d * d];
        let mut max_diag = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let c = self.m2[i * d + j] / (n - 1.0);
                cov[i * d + j] = if i == j { c } else { w * c };
            }
            max_diag = max_diag.max(cov[i * d + i]);
        }
        if !(max_diag > 0.0) || (0..d).any(|i| !(cov[i * d + i] > 0.0)) {
            return None;
        }
        for i in 0..d {
            cov[i * d + i] += 1e-10 * max_diag;
        }
        cholesky(&cov, d)
    }
}

/// Lower-triangular Cholesky factor of a row-major `d x d` matrix.
pub fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn settings(n: usize, burn: usize, d: usize) -> MetropolisSettings {
        MetropolisSettings {
            n_iterations: n,
            n_burnin: burn,
            thin: 1,
            target_acceptance: 0.234,
            initial_scale: vec![1.0; d],
        }
    }

    #[test]
    fn windows_partition_burnin() {
        let ends: Vec<usize> = adaptation_windows(5000).iter().map(|w| w.1).collect();
        assert_eq!(ends, vec![100, 150, 250, 450, 850, 1650, 4950]);
        assert!(adaptation_windows(10).is_empty());
        let w = adaptation_windows(500);
        assert_eq!(w[0].0, 75);
        assert!(w.windows(2).all(|p| p[0].1 == p[1].0));
        assert_eq!(w.last().unwrap().1, 450);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let run = adaptive_metropolis(|x| -0.5 * x[0] * x[0], &[3.0], &settings(102_000, 2_000, 1), &mut rng).unwrap();
        assert_eq!(run.len(), 100_000);
        let n = run.len() as f64;
        let mean = run.draws.iter().sum::<f64>() / n;
        let sd = (run.draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
        assert!((0.15..=0.6).contains(&run.acceptance), "acceptance {}", run.acceptance);
    }

    #[test]
    fn correlated_gaussian_adapts() {
        // var = [[1, .9],[.9, 1]] scaled by 0.01^2 on the second axis
        let prec = {
            let (a, b, c) = (1.0, 0.9 * 0.01, 0.0001);
            let det = a * c - b * b;
            [c / det, -b / det, a / det]
        };
        let f = |x: &[f64]| -0.5 * (prec[0] * x[0] * x[0] + 2.0 * prec[1] * x[0] * x[1] + prec[2] * x[1] * x[1]);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let run = adaptive_metropolis(f, &[0.5, 0.0], &settings(40_000, 5_000, 2), &mut rng).unwrap();
        let n = run.len() as f64;
        let m1 = (0..run.len()).map(|i| run.draw(i)[1]).sum::<f64>() / n;
        let sd1 = ((0..run.len()).map(|i| (run.draw(i)[1] - m1).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd1 - 0.01).abs() < 0.001, "sd {sd1}");
        assert!((0.15..=0.40).contains(&run.acceptance), "acceptance {}", run.acceptance);
    }

    #[test]
    fn divergent_targets_are_reported() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let bad_start = adaptive_metropolis(|_| f64::NEG_INFINITY, &[0.0], &settings(100, 10, 1), &mut rng);
        assert!(matches!(bad_start, Err(Error::DivergentTarget(_))));

        let spike = |x: &[f64]| if x[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        let nowhere = adaptive_metropolis(spike, &[0.0], &settings(5_000, 10, 1), &mut rng);
        assert!(matches!(nowhere, Err(Error::DivergentTarget(_))));
    }

    #[test]
    fn zero_retained_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut s = settings(100, 100, 1);
        assert!(adaptive_metropolis(|x| -x[0] * x[0], &[0.0], &s, &mut rng).is_err());
        s.n_burnin = 90;
        s.thin = 20;
        assert!(adaptive_metropolis(|x| -x[0] * x[0], &[0.0], &s, &mut rng).is_err());
    }
}
