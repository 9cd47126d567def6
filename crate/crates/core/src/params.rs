use crate::error::{Error, Result};

/// Step size, trajectory length and the second-order scaling coefficients.
///
/// `alpha = 1 + alpha2 * dt²` and `beta = 1 + beta2 * dt²` are cached and
/// recomputed whenever `dt` changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MplParameters {
    dt: f64,
    steps: usize,
    alpha2: f64,
    beta2: f64,
    alpha: f64,
    beta: f64,
}

impl MplParameters {
    pub fn new(dt: f64, steps: usize, alpha2: f64, beta2: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if !(alpha2.is_finite() && beta2.is_finite()) {
            return Err(Error::InvalidParameter("alpha2/beta2 must be finite".into()));
        }
        let mut p = Self { dt, steps, alpha2, beta2, alpha: 1.0, beta: 1.0 };
        p.refresh();
        Ok(p)
    }

    /// Standard leapfrog: `alpha2 = beta2 = 0`.
    pub fn standard(dt: f64, steps: usize) -> Result<Self> {
        Self::new(dt, steps, 0.0, 0.0)
    }

    fn refresh(&mut self) {
        let dt2 = self.dt * self.dt;
        self.alpha = 1.0 + self.alpha2 * dt2;
        self.beta = 1.0 + self.beta2 * dt2;
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        self.dt = dt;
        self.refresh();
        Ok(self)
    }

    pub fn with_steps(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        self.steps = steps;
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_standard(&self) -> bool {
        self.alpha2 == 0.0 && self.beta2 == 0.0
    }
}
