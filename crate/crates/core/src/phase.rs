use crate::error::{check_len, Error, Result};

/// A position/momentum pair of equal, non-zero length with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidParameter("phase state dimension must be >= 1".into()));
        }
        check_len(q.len(), p.len())?;
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("position"));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("momentum"));
        }
        Ok(Self { q, p })
    }

    /// Builds a state from vectors the caller has already checked.
    pub(crate) fn from_parts(q: Vec<f64>, p: Vec<f64>) -> Self {
        debug_assert_eq!(q.len(), p.len());
        Self { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.q, self.p)
    }

    /// The momentum flip `R(q, p) = (q, -p)`.
    pub fn flipped(&self) -> Self {
        Self { q: self.q.clone(), p: self.p.iter().map(|x| -x).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}
