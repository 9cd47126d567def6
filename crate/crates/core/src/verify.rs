//! Convergence studies of the MPL step over a ladder of step sizes.
//!
//! Each probe measures one quantity per `dt`, fits a log-log slope, reports
//! the ratio between successive rungs and checks it against the expected
//! order or ratio band.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrator::{
    default_fd_step, energy_drift_prediction, hamiltonian, jacobian_det_fd, mpl_step, reversibility_defect,
    standard_leapfrog_step, symplectic_defect,
};
use crate::mass::MassMatrix;
use crate::params::MplParameters;
use crate::phase::PhaseState;
use crate::rng::RngStream;
use crate::targets::DiagonalGaussian;

pub const DEFAULT_LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
/// Leapfrog substeps per `dt` in the reference flow.
pub const REFERENCE_SUBSTEPS: usize = 1000;
pub const SLOPE_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// One-step error against the reference flow.
    Order,
    /// Maximum error over a unit horizon.
    GlobalOrder,
    /// `ΔH` minus its leading-order prediction.
    Energy,
    /// Jacobian determinant minus `1 + d(2α₂ + β₂)dt²`.
    Volume,
    Reversibility,
    Symplectic,
}

impl Probe {
    pub const ALL: [Probe; 6] =
        [Probe::Order, Probe::GlobalOrder, Probe::Energy, Probe::Volume, Probe::Reversibility, Probe::Symplectic];

    pub fn name(&self) -> &'static str {
        match self {
            Probe::Order => "order",
            Probe::GlobalOrder => "global-order",
            Probe::Energy => "energy",
            Probe::Volume => "volume",
            Probe::Reversibility => "reversibility",
            Probe::Symplectic => "symplectic",
        }
    }

    /// Coefficients used when none are given.
    pub fn default_coefficients(&self) -> (f64, f64) {
        match self {
            Probe::Order | Probe::GlobalOrder => (0.0, 0.0),
            Probe::Energy => (-0.1, -0.05),
            Probe::Volume | Probe::Reversibility | Probe::Symplectic => (0.1, 0.05),
        }
    }
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Probe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Probe::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown probe {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Decreasing step sizes.
    pub dt_ladder: Vec<f64>,
    pub alpha2: Option<f64>,
    pub beta2: Option<f64>,
    /// Dimension of the Gaussian used by the energy, volume, reversibility
    /// and symplectic probes.
    pub dim: usize,
    /// Random states averaged by the energy probe.
    pub states: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { dt_ladder: DEFAULT_LADDER.to_vec(), alpha2: None, beta2: None, dim: 3, states: 100, seed: 1 }
    }
}

/// Pass rule of a probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expectation {
    Slope { expected: f64, tolerance: f64 },
    RatioBand { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub probe: Probe,
    pub alpha2: f64,
    pub beta2: f64,
    pub dts: Vec<f64>,
    pub values: Vec<f64>,
    /// `values[i] / values[i + 1]`.
    pub ratios: Vec<f64>,
    pub slope: f64,
    pub expectation: Expectation,
    /// Additional named checks with their pass flags.
    pub extra: Vec<(String, f64, bool)>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        let main = match self.expectation {
            Expectation::Slope { expected, tolerance } => (self.slope - expected).abs() <= tolerance,
            Expectation::RatioBand { lo, hi } => self.ratios.iter().all(|r| (lo..=hi).contains(r)),
        };
        main && self.extra.iter().all(|e| e.2)
    }

    /// Aligned plain-text table with the verdict.
    pub fn render(&self) -> String {
        let header = ["dt", "value", "ratio", "local slope"];
        let rows: Vec<Vec<String>> = self
            .dts
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (dt, v))| {
                let (ratio, local) = if i == 0 {
                    ("-".to_string(), "-".to_string())
                } else {
                    let r = self.ratios[i - 1];
                    let s = (self.values[i - 1] / v).ln() / (self.dts[i - 1] / dt).ln();
                    (format!("{r:.3}"), format!("{s:.3}"))
                };
                vec![format!("{dt}"), format!("{v:.6e}"), ratio, local]
            })
            .collect();
        let mut s = format!("probe {} (alpha2 = {}, beta2 = {})\n", self.probe, self.alpha2, self.beta2);
        s.push_str(&crate::report::render_table(&header, &rows));
        let expected = match self.expectation {
            Expectation::Slope { expected, tolerance } => format!("slope {expected} +/- {tolerance}"),
            Expectation::RatioBand { lo, hi } => format!("halving ratio in [{lo}, {hi}]"),
        };
        s.push_str(&format!("fitted slope {:.3}; expected {expected}\n", self.slope));
        for (name, value, ok) in &self.extra {
            s.push_str(&format!("{name}: {value:.3e} {}\n", if *ok { "ok" } else { "FAIL" }));
        }
        s.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        s
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter("slope fit needs two or more points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("slope fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn distance(a: &PhaseState, b: &PhaseState) -> f64 {
    a.q().iter().chain(a.p()).zip(b.q().iter().chain(b.p())).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Leapfrog with [`REFERENCE_SUBSTEPS`] substeps per `dt`.
fn reference_step(state: &PhaseState, dt: f64, model: &DiagonalGaussian, mass: &MassMatrix) -> Result<PhaseState> {
    let h = dt / REFERENCE_SUBSTEPS as f64;
    let mut s = state.clone();
    for _ in 0..REFERENCE_SUBSTEPS {
        s = standard_leapfrog_step(&s, h, model, mass)?;
    }
    Ok(s)
}

/// Runs `probe` over the ladder.
pub fn run_probe(probe: Probe, opts: &VerifyOptions) -> Result<VerifyOutcome> {
    let ladder = &opts.dt_ladder;
    if ladder.len() < 2 || ladder.iter().any(|d| !(*d > 0.0 && d.is_finite())) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("dt ladder needs two or more decreasing positive values".into()));
    }
    if opts.dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let (da, db) = probe.default_coefficients();
    let (alpha2, beta2) = (opts.alpha2.unwrap_or(da), opts.beta2.unwrap_or(db));
    let params = |dt: f64| MplParameters::new(dt, 1, alpha2, beta2);
    let zero = alpha2 == 0.0 && beta2 == 0.0;
    let mut extra = Vec::new();

    let oscillator = DiagonalGaussian::isotropic(1)?;
    let unit = MassMatrix::identity(1)?;
    let d = opts.dim;
    let gauss = DiagonalGaussian::isotropic(d)?;
    let mass = MassMatrix::identity(d)?;
    let mut rng = RngStream::new(opts.seed);
    let probe_state = PhaseState::new(rng.normal_vec(d), rng.normal_vec(d))?;

    let mut values = Vec::with_capacity(ladder.len());
    let expectation = match probe {
        Probe::Order => {
            let x0 = PhaseState::new(vec![1.0], vec![0.5])?;
            for &dt in ladder {
                let (s, _) = mpl_step(&x0, &params(dt)?, &oscillator, &unit, None)?;
                values.push(distance(&s, &reference_step(&x0, dt, &oscillator, &unit)?));
            }
            Expectation::Slope { expected: if zero { 3.0 } else { 2.0 }, tolerance: SLOPE_TOLERANCE }
        }
        Probe::GlobalOrder => {
            let x0 = PhaseState::new(vec![1.0], vec![0.5])?;
            for &dt in ladder {
                let n = (1.0 / dt).round().max(1.0) as usize;
                let p = params(dt)?;
                let (mut s, mut r, mut worst) = (x0.clone(), x0.clone(), 0.0f64);
                for _ in 0..n {
                    s = mpl_step(&s, &p, &oscillator, &unit, None)?.0;
                    r = reference_step(&r, dt, &oscillator, &unit)?;
                    worst = worst.max(distance(&s, &r));
                }
                values.push(worst);
            }
            Expectation::Slope { expected: if zero { 2.0 } else { 1.0 }, tolerance: SLOPE_TOLERANCE }
        }
        Probe::Energy => {
            let states: Vec<PhaseState> = (0..opts.states.max(1))
                .map(|_| PhaseState::new(rng.normal_vec(d), rng.normal_vec(d)))
                .collect::<Result<_>>()?;
            for &dt in ladder {
                let p = params(dt)?;
                let mut total = 0.0;
                for s in &states {
                    let (next, _) = mpl_step(s, &p, &gauss, &mass, None)?;
                    let dh = hamiltonian(&next, &gauss, &mass)? - hamiltonian(s, &gauss, &mass)?;
                    total += (dh - energy_drift_prediction(s, &p, &gauss, &mass)?).abs();
                }
                values.push(total / states.len() as f64);
            }
            Expectation::RatioBand { lo: 6.0, hi: 10.0 }
        }
        Probe::Volume => {
            let h = default_fd_step(&probe_state);
            for &dt in ladder {
                let det = jacobian_det_fd(&probe_state, &params(dt)?, &gauss, &mass, h)?;
                values.push((det - 1.0 - d as f64 * (2.0 * alpha2 + beta2) * dt * dt).abs());
            }
            Expectation::RatioBand { lo: 6.0, hi: 10.0 }
        }
        Probe::Reversibility => {
            for &dt in ladder {
                values.push(reversibility_defect(&probe_state, &params(dt)?, &gauss, &mass)?);
            }
            Expectation::RatioBand { lo: 3.0, hi: 5.0 }
        }
        Probe::Symplectic => {
            let h = default_fd_step(&probe_state);
            for &dt in ladder {
                values.push(symplectic_defect(&probe_state, &params(dt)?, &gauss, &mass, h)?);
            }
            let leapfrog = symplectic_defect(&probe_state, &MplParameters::standard(0.05, 1)?, &gauss, &mass, h)?;
            extra.push(("leapfrog defect at dt = 0.05 (<= 1e-4)".to_string(), leapfrog, leapfrog <= 1e-4));
            Expectation::RatioBand { lo: 3.0, hi: 5.0 }
        }
    };
    let ratios = values.windows(2).map(|w| w[0] / w[1]).collect();
    let slope = fit_slope(ladder, &values).unwrap_or(f64::NAN);
    Ok(VerifyOutcome { probe, alpha2, beta2, dts: ladder.clone(), values, ratios, slope, expectation, extra })
}
