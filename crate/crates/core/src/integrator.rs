//! The MPL step, trajectories, the standard leapfrog oracle and one-step
//! numerical probes (energy drift, Jacobian determinant, reversibility and
//! symplectic defects).

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::mass::MassMatrix;
use crate::params::MplParameters;
use crate::phase::PhaseState;
use crate::targets::Target;

/// How gradients are obtained along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// `∇U(q_{n+1})` from step `n` is reused by step `n + 1`.
    #[default]
    Cached,
    /// Every step recomputes `∇U(q_n)`: two evaluations per step.
    Recompute,
}

/// Result of [`run_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    /// Final state, or the last finite state when `divergent`.
    pub state: PhaseState,
    /// `∇U` at `state.q`.
    pub grad: Vec<f64>,
    pub grad_evals: usize,
    pub divergent: bool,
    pub mode: GradientMode,
}

/// Integration workspace holding `(q, p, ∇U(q))` and the evaluation count.
///
/// Used directly by samplers that need to act on the momentum between steps.
pub struct Integrator<'a> {
    model: &'a dyn Target,
    mass: &'a MassMatrix,
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    q_next: Vec<f64>,
    p_next: Vec<f64>,
    grad_next: Vec<f64>,
    grad_evals: usize,
    mode: GradientMode,
}

impl<'a> Integrator<'a> {
    /// Starts from `state`; `grad` must be `∇U(state.q)` when given, otherwise
    /// it is evaluated here (and counted).
    pub fn new(
        model: &'a dyn Target,
        mass: &'a MassMatrix,
        state: PhaseState,
        grad: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = model.dim();
        check_len(d, state.dim())?;
        check_len(d, mass.dim())?;
        let (q, p) = state.into_parts();
        let mut grad_evals = 0;
        let grad = match grad {
            Some(g) => {
                check_len(d, g.len())?;
                g
            }
            None => {
                let mut g = vec![0.0; d];
                model.gradient(&q, &mut g);
                grad_evals += 1;
                g
            }
        };
        if grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(Self {
            model,
            mass,
            q,
            p,
            grad,
            q_next: vec![0.0; d],
            p_next: vec![0.0; d],
            grad_next: vec![0.0; d],
            grad_evals,
            mode: GradientMode::Cached,
        })
    }

    pub fn with_mode(mut self, mode: GradientMode) -> Self {
        self.mode = mode;
        self
    }

    /// One MPL step. On a non-finite result the state is left unchanged and
    /// `false` is returned.
    pub fn step(&mut self, params: &MplParameters) -> bool {
        let (dt, alpha, beta) = (params.dt(), params.alpha(), params.beta());
        let half = 0.5 * dt;
        if self.mode == GradientMode::Recompute {
            self.model.gradient(&self.q, &mut self.grad);
            self.grad_evals += 1;
        }
        for i in 0..self.q.len() {
            self.q_next[i] = alpha * self.p[i] - half * self.grad[i];
        }
        self.mass.apply_inverse_in_place(&mut self.q_next);
        for i in 0..self.q.len() {
            self.q_next[i] = beta * self.q[i] + dt * self.q_next[i];
        }
        if self.q_next.iter().any(|x| !x.is_finite()) {
            return false;
        }
        self.model.gradient(&self.q_next, &mut self.grad_next);
        self.grad_evals += 1;
        let alpha_sq = alpha * alpha;
        for i in 0..self.p.len() {
            self.p_next[i] = alpha_sq * self.p[i] - half * (alpha * self.grad[i] + self.grad_next[i]);
        }
        let finite = self.grad_next.iter().chain(&self.p_next).all(|x| x.is_finite());
        if !finite {
            return false;
        }
        std::mem::swap(&mut self.q, &mut self.q_next);
        std::mem::swap(&mut self.p, &mut self.p_next);
        std::mem::swap(&mut self.grad, &mut self.grad_next);
        true
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_evals(&self) -> usize {
        self.grad_evals
    }

    pub fn momentum_is_finite(&self) -> bool {
        self.p.iter().all(|x| x.is_finite())
    }

    pub fn into_parts(self) -> (PhaseState, Vec<f64>, usize) {
        (PhaseState::from_parts(self.q, self.p), self.grad, self.grad_evals)
    }
}

/// One MPL step:
///
/// ```text
/// q' = β q + dt M⁻¹ (α p - dt/2 ∇U(q))
/// p' = α² p - dt/2 (α ∇U(q) + ∇U(q'))
/// ```
///
/// Returns the new state and `∇U(q')`. `cached_grad`, if given, must equal
/// `∇U(state.q)`. A non-finite result is [`Error::NonFinite`].
pub fn mpl_step(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
    cached_grad: Option<&[f64]>,
) -> Result<(PhaseState, Vec<f64>)> {
    let mut it = Integrator::new(model, mass, state.clone(), cached_grad.map(<[f64]>::to_vec))?;
    if !it.step(params) {
        return Err(Error::NonFinite("mpl step"));
    }
    let (s, g, _) = it.into_parts();
    Ok((s, g))
}

/// Classical Störmer–Verlet: half kick, drift, half kick.
pub fn standard_leapfrog_step(
    state: &PhaseState,
    dt: f64,
    model: &dyn Target,
    mass: &MassMatrix,
) -> Result<PhaseState> {
    let d = model.dim();
    check_len(d, state.dim())?;
    check_len(d, mass.dim())?;
    let mut g = vec![0.0; d];
    model.gradient(state.q(), &mut g);
    let p_half: Vec<f64> = state.p().iter().zip(&g).map(|(p, g)| p - 0.5 * dt * g).collect();
    let v = mass.apply_inverse(&p_half)?;
    let q: Vec<f64> = state.q().iter().zip(&v).map(|(q, v)| q + dt * v).collect();
    model.gradient(&q, &mut g);
    let p: Vec<f64> = p_half.iter().zip(&g).map(|(p, g)| p - 0.5 * dt * g).collect();
    if q.iter().chain(&p).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("leapfrog step"));
    }
    Ok(PhaseState::from_parts(q, p))
}

/// Applies `params.steps()` MPL steps from `state`, evaluating `∇U` once at
/// the start (`L + 1` evaluations in cached mode).
pub fn run_trajectory(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
) -> Result<TrajectoryOutcome> {
    run_trajectory_with(state, None, params, model, mass, GradientMode::Cached)
}

/// [`run_trajectory`] with an optional known `∇U(state.q)` and a gradient mode.
pub fn run_trajectory_with(
    state: &PhaseState,
    grad: Option<Vec<f64>>,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
    mode: GradientMode,
) -> Result<TrajectoryOutcome> {
    let mut it = Integrator::new(model, mass, state.clone(), grad)?.with_mode(mode);
    let mut divergent = false;
    for _ in 0..params.steps() {
        if !it.step(params) {
            divergent = true;
            break;
        }
    }
    let (state, grad, grad_evals) = it.into_parts();
    Ok(TrajectoryOutcome { state, grad, grad_evals, divergent, mode })
}

/// `H(q, p) = U(q) + ½ pᵀ M⁻¹ p`.
pub fn hamiltonian(state: &PhaseState, model: &dyn Target, mass: &MassMatrix) -> Result<f64> {
    let u = crate::targets::potential(model, state.q())?;
    Ok(u + mass.kinetic_energy(state.p())?)
}

/// Leading-order energy change of one MPL step,
/// `dt² [β₂ ∇U(q)ᵀ q + 2 α₂ pᵀ M⁻¹ p]`.
pub fn energy_drift_prediction(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
) -> Result<f64> {
    let g = crate::targets::gradient(model, state.q())?;
    let gq: f64 = g.iter().zip(state.q()).map(|(a, b)| a * b).sum();
    let pmp = 2.0 * mass.kinetic_energy(state.p())?;
    Ok(params.dt().powi(2) * (params.beta2() * gq + 2.0 * params.alpha2() * pmp))
}

/// Default finite-difference perturbation, `1e-5 · max(1, ‖(q, p)‖∞)`.
pub fn default_fd_step(state: &PhaseState) -> f64 {
    let inf = state.q().iter().chain(state.p()).fold(0.0f64, |a, x| a.max(x.abs()));
    1e-5 * inf.max(1.0)
}

fn step_vector(
    x: &[f64],
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
) -> Result<Vec<f64>> {
    let d = x.len() / 2;
    let s = PhaseState::from_parts(x[..d].to_vec(), x[d..].to_vec());
    let (out, _) = mpl_step(&s, params, model, mass, None)?;
    let (q, p) = out.into_parts();
    Ok(q.into_iter().chain(p).collect())
}

/// The `2d × 2d` Jacobian of one MPL step by central differences in `(q, p)`.
pub fn jacobian_fd(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
    h: f64,
) -> Result<DMatrix<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("fd step must be positive, got {h}")));
    }
    check_len(model.dim(), state.dim())?;
    let x: Vec<f64> = state.q().iter().chain(state.p()).copied().collect();
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for j in 0..n {
        xp[j] = x[j] + h;
        let up = step_vector(&xp, params, model, mass)?;
        xp[j] = x[j] - h;
        let down = step_vector(&xp, params, model, mass)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("jacobian"));
    }
    Ok(jac)
}

/// Determinant of the finite-difference one-step Jacobian.
pub fn jacobian_det_fd(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
    h: f64,
) -> Result<f64> {
    let det = jacobian_fd(state, params, model, mass, h)?.determinant();
    if !det.is_finite() {
        return Err(Error::NonFinite("jacobian determinant"));
    }
    Ok(det)
}

/// `‖(R ∘ Ψ ∘ R ∘ Ψ)(q, p) - (q, p)‖₂`, with `R` the momentum flip.
pub fn reversibility_defect(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
) -> Result<f64> {
    let (once, _) = mpl_step(state, params, model, mass, None)?;
    let (twice, _) = mpl_step(&once.flipped(), params, model, mass, None)?;
    let back = twice.flipped();
    let sq: f64 = back
        .q()
        .iter()
        .chain(back.p())
        .zip(state.q().iter().chain(state.p()))
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(sq.sqrt())
}

/// Canonical symplectic form `Ω = [[0, I], [-I, 0]]` on `ℝ^{2d}`.
pub fn canonical_form(d: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        omega[(i, d + i)] = 1.0;
        omega[(d + i, i)] = -1.0;
    }
    omega
}

/// `‖Jᵀ Ω J - Ω‖_F` for a `2d × 2d` matrix `J`.
pub fn symplectic_defect_of(jac: &DMatrix<f64>) -> f64 {
    let omega = canonical_form(jac.nrows() / 2);
    (jac.transpose() * &omega * jac - omega).norm()
}

/// [`symplectic_defect_of`] the finite-difference one-step Jacobian.
pub fn symplectic_defect(
    state: &PhaseState,
    params: &MplParameters,
    model: &dyn Target,
    mass: &MassMatrix,
    h: f64,
) -> Result<f64> {
    Ok(symplectic_defect_of(&jacobian_fd(state, params, model, mass, h)?))
}
