//! Convergence and efficiency metrics over multi-chain output.
//!
//! Conventions:
//! * autocorrelations use the biased normalization `c(k) = (1/N) Σ (x_t - x̄)(x_{t+k} - x̄)`;
//! * pooled autocorrelation is the unweighted mean of per-chain autocorrelations,
//!   each about its own chain mean;
//! * ESS truncates the cumulative sum `S(m) = 1 + 2 Σ_{k≤m} ρ(k)` at the first lag
//!   where it stops increasing or `ρ(m) < 0`, and is clamped to `(0, C·N]`.

use crate::aggressive::{mode_stats, ModeStats};
use crate::error::{Error, Result};
use crate::mass::MassMatrix;
use crate::rng::RngStream;
use crate::sampler::ChainResult;
use crate::targets::Target;

pub const DEFAULT_ESS_MAX_LAG: usize = 200;
pub const DEFAULT_MIXING_MAX_LAG: usize = 100;
pub const MIN_ESS_LENGTH: usize = 100;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with `n - 1` in the denominator.
fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Autocovariance at one lag about `m`, biased normalization.
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// `ρ(0..=max_lag)` of one series.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag < 1 || series.len() <= max_lag {
        return Err(Error::InvalidParameter(format!(
            "autocorrelation needs len > max_lag >= 1 (len {}, max_lag {max_lag})",
            series.len()
        )));
    }
    let m = mean(series);
    let c0 = autocov(series, m, 0);
    if !(c0 > 0.0) {
        return Err(Error::DegenerateSeries);
    }
    Ok((0..=max_lag).map(|k| if k == 0 { 1.0 } else { autocov(series, m, k) / c0 }).collect())
}

fn check_chains<S: AsRef<[f64]>>(chains: &[S], min_chains: usize, min_len: usize) -> Result<usize> {
    if chains.len() < min_chains {
        return Err(Error::InvalidParameter(format!("need at least {min_chains} chain(s), got {}", chains.len())));
    }
    let n = chains[0].as_ref().len();
    if chains.iter().any(|c| c.as_ref().len() != n) {
        return Err(Error::InvalidParameter("chains must have equal length".into()));
    }
    if n < min_len {
        return Err(Error::InvalidParameter(format!("chains need at least {min_len} samples, got {n}")));
    }
    Ok(n)
}

/// Mean of per-chain autocorrelations, `ρ(0..=max_lag)`.
pub fn pooled_autocorrelation<S: AsRef<[f64]>>(chains: &[S], max_lag: usize) -> Result<Vec<f64>> {
    check_chains(chains, 1, max_lag + 1)?;
    let mut pooled = vec![0.0; max_lag + 1];
    for c in chains {
        let rho = autocorrelation(c.as_ref(), max_lag)?;
        pooled.iter_mut().zip(rho).for_each(|(p, r)| *p += r);
    }
    let k = chains.len() as f64;
    pooled.iter_mut().for_each(|p| *p /= k);
    Ok(pooled)
}

/// ESS from a pooled autocorrelation sequence over `total = C·N` draws.
fn ess_from_rho(rho: &[f64], total: f64) -> f64 {
    let mut s_prev = 1.0;
    let mut s = 1.0;
    for &r in &rho[1..] {
        s = s_prev + 2.0 * r;
        if s <= s_prev || r < 0.0 {
            break;
        }
        s_prev = s;
    }
    let ess = total / s;
    if ess.is_finite() && ess > 0.0 {
        ess.min(total)
    } else {
        total
    }
}

/// Initial-monotone-sequence ESS with the default maximum lag.
pub fn ess_imse<S: AsRef<[f64]>>(chains: &[S]) -> Result<f64> {
    ess_imse_with_lag(chains, DEFAULT_ESS_MAX_LAG)
}

pub fn ess_imse_with_lag<S: AsRef<[f64]>>(chains: &[S], max_lag: usize) -> Result<f64> {
    let n = check_chains(chains, 1, MIN_ESS_LENGTH)?;
    let rho = pooled_autocorrelation(chains, max_lag.min(n - 1))?;
    Ok(ess_from_rho(&rho, (chains.len() * n) as f64))
}

/// Gelman–Rubin `R̂ = √(Var⁺ / W)` with `Var⁺ = (N-1)/N · W + B/N`.
pub fn rhat<S: AsRef<[f64]>>(chains: &[S]) -> Result<f64> {
    let n = check_chains(chains, 2, 4)? as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c.as_ref())).collect();
    let w = mean(&chains.iter().map(|c| sample_variance(c.as_ref())).collect::<Vec<_>>());
    if !(w > 0.0) {
        return Err(Error::DegenerateChains);
    }
    let b = n * sample_variance(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

fn first_below(rho: &[f64], threshold: f64, cap: usize) -> usize {
    rho.iter().skip(1).position(|r| *r < threshold).map(|i| i + 1).unwrap_or(cap)
}

/// Smallest lag `t ≥ 1` with pooled `ρ(t) < 1/e`, or `max_lag` if none.
pub fn mixing_time<S: AsRef<[f64]>>(chains: &[S], max_lag: usize) -> Result<usize> {
    let n = check_chains(chains, 1, 2)?;
    let lag = max_lag.min(n - 1);
    let rho = pooled_autocorrelation(chains, lag)?;
    Ok(first_below(&rho, (-1.0f64).exp(), max_lag))
}

/// `min_ess / total_grad_evals`.
pub fn ess_per_grad(min_ess: f64, total_grad_evals: usize) -> Result<f64> {
    if total_grad_evals == 0 {
        return Err(Error::InvalidParameter("no gradient evaluations".into()));
    }
    if !(min_ess > 0.0) {
        return Err(Error::InvalidParameter(format!("ESS must be positive, got {min_ess}")));
    }
    Ok(min_ess / total_grad_evals as f64)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Power iteration on `v ↦ op(v)`; returns the Rayleigh quotient of the dominant
/// eigenvector, or zero when the operator annihilates the iterate.
fn power_iteration<F>(dim: usize, iterations: usize, rng: &mut RngStream, mut op: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut v = rng.normal_vec(dim);
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = op(&v)?;
        lambda = dot(&v, &w);
        let wn = norm(&w);
        if !wn.is_finite() {
            return Err(Error::NonFinite("Hessian-vector product"));
        }
        if wn == 0.0 {
            return Ok(0.0);
        }
        let residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / wn).collect();
        if residual <= 1e-12 * wn {
            lambda = dot(&v, &op(&v)?);
            break;
        }
    }
    Ok(lambda)
}

/// Condition number `λ_max / λ_min` of `M⁻¹ D²U(q)`.
///
/// Hessian-vector products are central differences of the gradient with
/// `h = 1e-5 · max(1, ‖q‖∞)`. `λ_max` comes from power iteration, `λ_min` from
/// power iteration on `λ_max I - M⁻¹ D²U`.
pub fn condition_number(
    model: &dyn Target,
    q: &[f64],
    mass: &MassMatrix,
    iterations: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if iterations < 10 {
        return Err(Error::InvalidParameter("condition_number needs at least 10 iterations".into()));
    }
    let d = model.dim();
    crate::error::check_len(d, q.len())?;
    crate::error::check_len(d, mass.dim())?;
    let h = 1e-5 * q.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut hvp = |v: &[f64]| -> Result<Vec<f64>> {
        for i in 0..d {
            x[i] = q[i] + h * v[i];
        }
        model.gradient(&x, &mut gp);
        for i in 0..d {
            x[i] = q[i] - h * v[i];
        }
        model.gradient(&x, &mut gm);
        let mut out: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        mass.apply_inverse_in_place(&mut out);
        Ok(out)
    };
    let lambda_max = power_iteration(d, iterations, rng, &mut hvp)?;
    if !(lambda_max > 0.0) {
        return Err(Error::NonPdHessian(lambda_max));
    }
    let shifted = power_iteration(d, iterations, rng, |v| {
        let a = hvp(v)?;
        Ok(v.iter().zip(a).map(|(vi, ai)| lambda_max * vi - ai).collect())
    })?;
    let lambda_min = lambda_max - shifted.max(0.0);
    if !(lambda_min > 0.0) {
        return Err(Error::NonPdHessian(lambda_min));
    }
    Ok(lambda_max / lambda_min)
}

/// Mode bookkeeping requested from [`build_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeConfig {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
}

/// Metrics of one multi-chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub n_chains: usize,
    pub n_samples: usize,
    pub ess_per_dim: Vec<f64>,
    pub min_ess: f64,
    pub ess_per_grad: f64,
    pub total_grad_evals: usize,
    /// Mean of per-chain acceptance rates (burn-in included).
    pub accept_rate: f64,
    /// Absent for single-chain runs; `+∞` when within-chain variance vanishes.
    pub rhat_per_dim: Option<Vec<f64>>,
    pub max_rhat: Option<f64>,
    pub mixing_per_dim: Vec<usize>,
    pub mixing_time: usize,
    pub mean_per_dim: Vec<f64>,
    pub variance_per_dim: Vec<f64>,
    pub divergences: usize,
    pub wall_seconds: f64,
    /// Aggregate over chains.
    pub mode_stats: Option<ModeStats>,
    pub chain_mode_stats: Vec<ModeStats>,
}

impl DiagnosticsReport {
    /// `v/K` for the mode column, `NaN` when modes are not tracked.
    pub fn modes_field(&self) -> String {
        self.mode_stats.as_ref().map(ModeStats::modes_field).unwrap_or_else(|| "NaN".into())
    }

    /// Standard error of the pooled mean of dimension `j`, `sd / √ESS`.
    pub fn standard_error(&self, j: usize) -> f64 {
        (self.variance_per_dim[j] / self.ess_per_dim[j]).sqrt()
    }
}

/// Per-chain autocorrelations where a constant chain (a chain that never
/// moved) counts as perfectly correlated, `ρ(k) = 1`.
fn pooled_rho_allow_stuck(chains: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    let mut pooled = vec![0.0; max_lag + 1];
    for c in chains {
        match autocorrelation(c, max_lag) {
            Ok(rho) => pooled.iter_mut().zip(rho).for_each(|(p, r)| *p += r),
            Err(Error::DegenerateSeries) => pooled.iter_mut().for_each(|p| *p += 1.0),
            Err(e) => return Err(e),
        }
    }
    let k = chains.len() as f64;
    pooled.iter_mut().for_each(|p| *p /= k);
    Ok(pooled)
}

/// Options of [`build_report_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub ess_max_lag: usize,
    pub mixing_max_lag: usize,
    pub modes: Option<ModeConfig>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { ess_max_lag: DEFAULT_ESS_MAX_LAG, mixing_max_lag: DEFAULT_MIXING_MAX_LAG, modes: None }
    }
}

/// Every metric per dimension, aggregated as min ESS, max R̂ and max mixing time.
pub fn build_report(
    chains: &[ChainResult],
    model: &dyn Target,
    modes: Option<&ModeConfig>,
) -> Result<DiagnosticsReport> {
    let opts = ReportOptions { modes: modes.cloned(), ..ReportOptions::default() };
    build_report_with(chains, model, &opts)
}

pub fn build_report_with(
    chains: &[ChainResult],
    model: &dyn Target,
    opts: &ReportOptions,
) -> Result<DiagnosticsReport> {
    if chains.is_empty() {
        return Err(Error::InvalidParameter("no chains".into()));
    }
    let d = model.dim();
    let n = chains[0].n_samples();
    for c in chains {
        crate::error::check_len(d, c.dim())?;
        if c.n_samples() != n {
            return Err(Error::InvalidParameter("chains must have equal length".into()));
        }
    }
    if n < MIN_ESS_LENGTH {
        return Err(Error::InvalidParameter(format!("need at least {MIN_ESS_LENGTH} samples per chain")));
    }
    let total = (chains.len() * n) as f64;
    let lag = opts.ess_max_lag.max(opts.mixing_max_lag).min(n - 1);
    let mut ess_per_dim = Vec::with_capacity(d);
    let mut mixing_per_dim = Vec::with_capacity(d);
    let mut rhat_per_dim = (chains.len() >= 2).then(Vec::new);
    let mut mean_per_dim = Vec::with_capacity(d);
    let mut variance_per_dim = Vec::with_capacity(d);
    for j in 0..d {
        let traces: Vec<Vec<f64>> = chains.iter().map(|c| c.coordinate(j)).collect();
        let wrap = |e: Error| Error::Metric { dim: j, source: Box::new(e) };
        let rho = pooled_rho_allow_stuck(&traces, lag).map_err(wrap)?;
        ess_per_dim.push(ess_from_rho(&rho[..=opts.ess_max_lag.min(lag)], total));
        let mix_lag = opts.mixing_max_lag.min(lag);
        mixing_per_dim.push(first_below(&rho[..=mix_lag], (-1.0f64).exp(), opts.mixing_max_lag));
        if let Some(r) = rhat_per_dim.as_mut() {
            r.push(match rhat(&traces) {
                Ok(v) => v,
                Err(Error::DegenerateChains) => {
                    let first = traces[0][0];
                    if traces.iter().all(|t| t[0] == first) {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                }
                Err(e) => return Err(wrap(e)),
            });
        }
        let all: Vec<f64> = traces.concat();
        mean_per_dim.push(mean(&all));
        variance_per_dim.push(sample_variance(&all));
    }
    let min_ess = ess_per_dim.iter().copied().fold(f64::INFINITY, f64::min);
    let total_grad_evals = chains.iter().map(|c| c.grad_evals).sum();
    let (chain_mode_stats, mode_total) = match &opts.modes {
        Some(m) => {
            let per: Vec<ModeStats> = chains.iter().map(|c| mode_stats(c.samples(), &m.centers, m.radius)).collect();
            let agg = ModeStats::aggregate(&per);
            (per, Some(agg))
        }
        None => (Vec::new(), None),
    };
    Ok(DiagnosticsReport {
        n_chains: chains.len(),
        n_samples: n,
        min_ess,
        ess_per_grad: ess_per_grad(min_ess, total_grad_evals)?,
        ess_per_dim,
        total_grad_evals,
        accept_rate: chains.iter().map(ChainResult::acceptance_rate).sum::<f64>() / chains.len() as f64,
        max_rhat: rhat_per_dim.as_ref().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        rhat_per_dim,
        mixing_time: mixing_per_dim.iter().copied().max().unwrap_or(0),
        mixing_per_dim,
        mean_per_dim,
        variance_per_dim,
        divergences: chains.iter().map(|c| c.divergences).sum(),
        wall_seconds: chains.iter().map(|c| c.wall_seconds).sum(),
        mode_stats: mode_total,
        chain_mode_stats,
    })
}
