//! The MPL-HMC Markov chain and a deterministic multi-chain runner.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::integrator::Integrator;
use crate::mass::MassMatrix;
use crate::params::MplParameters;
use crate::phase::PhaseState;
use crate::rng::{chain_seed, RngStream};
use crate::targets::Target;

/// How each chain's starting position is chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    Origin,
    /// `q0 ~ N(0, I)`, drawn from the chain's own stream before the first iteration.
    #[default]
    StandardNormal,
    /// Chain `i` starts at `list[i % list.len()]`.
    Explicit(Vec<Vec<f64>>),
}

impl InitialState {
    /// Resolves the starting point of chain `index`, drawing from `rng` if needed.
    pub fn resolve(&self, dim: usize, index: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        match self {
            Self::Origin => Ok(vec![0.0; dim]),
            Self::StandardNormal => Ok(rng.normal_vec(dim)),
            Self::Explicit(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidParameter("explicit initial state list is empty".into()));
                }
                let q = list[index % list.len()].clone();
                check_len(dim, q.len())?;
                Ok(q)
            }
        }
    }
}

/// Multi-chain run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub master_seed: u64,
    pub initial: InitialState,
    /// Keep `(H₀, H*, accepted)` for every iteration.
    pub record_energies: bool,
    /// Negate the final momentum before the Metropolis test. Only a
    /// verification switch; always on in normal use.
    pub negate_momentum: bool,
    /// Upper bound on worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            burn_in: 5_000,
            n_chains: 2,
            master_seed: 0,
            initial: InitialState::StandardNormal,
            record_energies: false,
            negate_momentum: true,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidParameter("n_chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// Settings of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSettings {
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub q0: Vec<f64>,
    pub record_energies: bool,
    pub negate_momentum: bool,
}

impl ChainSettings {
    pub fn new(n_samples: usize, burn_in: usize, seed: u64, q0: Vec<f64>) -> Self {
        Self { n_samples, burn_in, seed, q0, record_energies: false, negate_momentum: true }
    }
}

/// Per-iteration energies, kept when `record_energies` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub h0: f64,
    pub h_star: f64,
    pub accepted: bool,
    pub divergent: bool,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    dim: usize,
    /// Post-burn-in positions, row-major `n_samples × dim`.
    samples: Vec<f64>,
    pub accepted: usize,
    pub iterations: usize,
    pub grad_evals: usize,
    pub divergences: usize,
    pub wall_seconds: f64,
    pub seed: u64,
    pub records: Option<Vec<IterationRecord>>,
}

impl ChainResult {
    pub(crate) fn new(dim: usize, capacity: usize, seed: u64, record: bool) -> Self {
        Self {
            dim,
            samples: Vec::with_capacity(capacity * dim),
            accepted: 0,
            iterations: 0,
            grad_evals: 0,
            divergences: 0,
            wall_seconds: 0.0,
            seed,
            records: record.then(Vec::new),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    /// Row-major sample matrix.
    pub fn flat_samples(&self) -> &[f64] {
        &self.samples
    }

    /// The trace of coordinate `j`.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.samples().map(|s| s[j]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iterations as f64
        }
    }

    pub(crate) fn push_sample(&mut self, q: &[f64]) {
        self.samples.extend_from_slice(q);
    }
}

/// Metropolis test in log space: accept iff `ln u < H₀ - H*`, `u ~ U(0, 1)`.
/// A non-finite `H*` always rejects; the uniform is drawn either way.
pub fn metropolis_accept(rng: &mut RngStream, h0: f64, h_star: f64) -> bool {
    let u = rng.uniform_open();
    h_star.is_finite() && u.ln() < h0 - h_star
}

/// Chain position with its cached potential and gradient.
pub(crate) struct Position {
    pub q: Vec<f64>,
    pub u: f64,
    pub grad: Vec<f64>,
}

impl Position {
    pub fn new(model: &dyn Target, q: Vec<f64>) -> Result<(Self, usize)> {
        check_len(model.dim(), q.len())?;
        let u = model.potential(&q);
        let mut grad = vec![0.0; q.len()];
        model.gradient(&q, &mut grad);
        if !u.is_finite() || grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        Ok((Self { q, u, grad }, 1))
    }
}

/// Outcome of one Hamiltonian proposal from a [`Position`].
pub(crate) struct Proposal {
    pub h0: f64,
    pub h_star: f64,
    pub accepted: bool,
    pub divergent: bool,
    pub grad_evals: usize,
}

/// Integrates from `pos` with momentum `p` using `each_step` to drive the
/// steps, then negates (optionally) and applies the Metropolis test,
/// updating `pos` on acceptance.
pub(crate) fn propose<F>(
    model: &dyn Target,
    mass: &MassMatrix,
    pos: &mut Position,
    p: Vec<f64>,
    negate: bool,
    rng: &mut RngStream,
    mut each_step: F,
) -> Result<Proposal>
where
    F: FnMut(&mut Integrator<'_>, &mut RngStream) -> bool,
{
    let h0 = pos.u + mass.kinetic_unchecked(&p);
    if !h0.is_finite() {
        return Err(Error::NonFinite("initial Hamiltonian"));
    }
    let state = PhaseState::from_parts(pos.q.clone(), p);
    let mut it = Integrator::new(model, mass, state, Some(pos.grad.clone()))?;
    let divergent = !each_step(&mut it, rng);
    let grad_evals = it.grad_evals();
    let (end, grad, _) = it.into_parts();
    let (q, mut p) = end.into_parts();
    let mut h_star = f64::INFINITY;
    let mut u_star = f64::INFINITY;
    if !divergent {
        if negate {
            p.iter_mut().for_each(|x| *x = -*x);
        }
        u_star = model.potential(&q);
        h_star = u_star + mass.kinetic_unchecked(&p);
    }
    let accepted = metropolis_accept(rng, h0, h_star);
    if accepted {
        pos.q = q;
        pos.u = u_star;
        pos.grad = grad;
    }
    Ok(Proposal { h0, h_star, accepted, divergent, grad_evals })
}

/// Runs one MPL-HMC chain for `burn_in + n_samples` iterations.
///
/// Each iteration draws `p ~ N(0, M)`, integrates `L` MPL steps, negates the
/// momentum and accepts with probability `min(1, exp(H₀ - H*))`. Divergent
/// trajectories are rejected. The gradient at the current position is carried
/// across iterations, so a chain costs `1 + (N + B) L` gradient evaluations
/// when no trajectory diverges.
pub fn run_chain(
    model: &dyn Target,
    params: &MplParameters,
    mass: &MassMatrix,
    settings: &ChainSettings,
) -> Result<ChainResult> {
    let start = Instant::now();
    let d = model.dim();
    check_len(d, mass.dim())?;
    if settings.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let mut rng = RngStream::new(settings.seed);
    let (mut pos, evals) = Position::new(model, settings.q0.clone())?;
    let total = settings.n_samples + settings.burn_in;
    let mut out = ChainResult::new(d, settings.n_samples, settings.seed, settings.record_energies);
    out.grad_evals = evals;
    let mut p = vec![0.0; d];
    for k in 1..=total {
        mass.sample_momentum_into(&mut rng, &mut p);
        let prop = propose(model, mass, &mut pos, p.clone(), settings.negate_momentum, &mut rng, |it, _| {
            (0..params.steps()).all(|_| it.step(params))
        })?;
        out.iterations += 1;
        out.grad_evals += prop.grad_evals;
        out.accepted += usize::from(prop.accepted);
        out.divergences += usize::from(prop.divergent);
        if let Some(r) = out.records.as_mut() {
            r.push(IterationRecord {
                h0: prop.h0,
                h_star: prop.h_star,
                accepted: prop.accepted,
                divergent: prop.divergent,
            });
        }
        if k > settings.burn_in {
            out.push_sample(&pos.q);
        }
    }
    out.wall_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Per-chain settings of `config` for chain `index`, resolving the start point.
pub fn chain_settings(config: &RunConfig, dim: usize, index: usize) -> Result<ChainSettings> {
    let seed = chain_seed(config.master_seed, index);
    // Starting points come from a stream distinct from the chain's own.
    let mut init_rng = RngStream::new(chain_seed(config.master_seed ^ INIT_SALT, index));
    let q0 = config.initial.resolve(dim, index, &mut init_rng)?;
    Ok(ChainSettings {
        n_samples: config.n_samples,
        burn_in: config.burn_in,
        seed,
        q0,
        record_energies: config.record_energies,
        negate_momentum: config.negate_momentum,
    })
}

const INIT_SALT: u64 = 0x1a17_5eed_0000_0001;

/// Runs `config.n_chains` chains, possibly in parallel; results are ordered
/// by chain index.
pub fn run_multi_chain(
    model: &dyn Target,
    params: &MplParameters,
    mass: &MassMatrix,
    config: &RunConfig,
) -> Result<Vec<ChainResult>> {
    config.validate()?;
    let settings = (0..config.n_chains)
        .map(|i| chain_settings(config, model.dim(), i))
        .collect::<Result<Vec<_>>>()?;
    run_parallel(config.threads, &settings, |s| run_chain(model, params, mass, s))
}

/// Maps `f` over `items` in parallel with at most `threads` workers, keeping order
/// and attaching the chain index to errors.
pub(crate) fn run_parallel<T, R, F>(threads: Option<usize>, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let work = || {
        items
            .par_iter()
            .enumerate()
            .map(|(i, s)| f(s).map_err(|e| Error::Chain { chain: i, source: Box::new(e) }))
            .collect::<Vec<_>>()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    results.into_iter().collect()
}
