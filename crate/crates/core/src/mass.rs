//! Mass matrices: identity, diagonal and dense symmetric positive definite.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub enum MassMatrix {
    Identity(usize),
    Diagonal(Vec<f64>),
    Dense(DenseMass),
}

/// Dense mass with its lower-triangular factor `M = S Sᵀ`.
#[derive(Debug, Clone)]
pub struct DenseMass {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl DenseMass {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }
}

impl MassMatrix {
    pub fn identity(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("mass dimension must be >= 1".into()));
        }
        Ok(Self::Identity(d))
    }

    pub fn diagonal(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidParameter("mass dimension must be >= 1".into()));
        }
        if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::NotPositiveDefinite(format!("diagonal entry {x}")));
        }
        Ok(Self::Diagonal(v))
    }

    /// Dense mass from a row-major `d x d` array.
    pub fn dense(d: usize, row_major: &[f64]) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("mass dimension must be >= 1".into()));
        }
        check_len(d * d, row_major.len())?;
        let m = DMatrix::from_row_slice(d, d, row_major);
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::NotPositiveDefinite(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let factor = chol.l();
        Ok(Self::Dense(DenseMass { matrix: m, factor, chol }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Identity(d) => *d,
            Self::Diagonal(v) => v.len(),
            Self::Dense(m) => m.matrix.nrows(),
        }
    }

    /// `M x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(match self {
            Self::Identity(_) => x.to_vec(),
            Self::Diagonal(v) => x.iter().zip(v).map(|(a, m)| a * m).collect(),
            Self::Dense(m) => (&m.matrix * DVector::from_column_slice(x)).iter().copied().collect(),
        })
    }

    /// `M⁻¹ x`.
    pub fn apply_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut out = x.to_vec();
        self.apply_inverse_in_place(&mut out);
        Ok(out)
    }

    /// `x <- M⁻¹ x`; the caller guarantees the length.
    pub(crate) fn apply_inverse_in_place(&self, x: &mut [f64]) {
        match self {
            Self::Identity(_) => {}
            Self::Diagonal(v) => x.iter_mut().zip(v).for_each(|(a, m)| *a /= m),
            Self::Dense(m) => {
                let y = m.chol.solve(&DVector::from_column_slice(x));
                x.copy_from_slice(y.as_slice());
            }
        }
    }

    /// Draw `p = S z` with `z ~ N(0, I)`, so `p ~ N(0, M)`.
    pub fn sample_momentum(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.sample_momentum_into(rng, &mut p);
        p
    }

    pub(crate) fn sample_momentum_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        rng.fill_normal(out);
        match self {
            Self::Identity(_) => {}
            Self::Diagonal(v) => out.iter_mut().zip(v).for_each(|(a, m)| *a *= m.sqrt()),
            Self::Dense(m) => {
                let y = &m.factor * DVector::from_column_slice(out);
                out.copy_from_slice(y.as_slice());
            }
        }
    }

    /// `½ pᵀ M⁻¹ p`.
    pub fn kinetic_energy(&self, p: &[f64]) -> Result<f64> {
        check_len(self.dim(), p.len())?;
        Ok(self.kinetic_unchecked(p))
    }

    pub(crate) fn kinetic_unchecked(&self, p: &[f64]) -> f64 {
        match self {
            Self::Identity(_) => 0.5 * p.iter().map(|x| x * x).sum::<f64>(),
            Self::Diagonal(v) => 0.5 * p.iter().zip(v).map(|(x, m)| x * x / m).sum::<f64>(),
            Self::Dense(m) => {
                let pv = DVector::from_column_slice(p);
                0.5 * pv.dot(&m.chol.solve(&pv))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd(d: usize, rng: &mut RngStream) -> Vec<f64> {
        let a: Vec<f64> = (0..d * d).map(|_| rng.normal()).collect();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += a[i * d + k] * a[j * d + k];
                }
                m[i * d + j] = s + if i == j { d as f64 } else { 0.0 };
            }
        }
        m
    }

    fn matvec(d: usize, m: &[f64], x: &[f64]) -> Vec<f64> {
        (0..d).map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum()).collect()
    }

    #[test]
    fn identity_inverse_is_noop() {
        let m = MassMatrix::identity(3).unwrap();
        assert_eq!(m.apply_inverse(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_inverse_divides() {
        let m = MassMatrix::diagonal(vec![2.0, 4.0]).unwrap();
        assert_eq!(m.apply_inverse(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn dense_inverse_residual() {
        let mut rng = RngStream::new(5);
        let d = 5;
        let raw = random_spd(d, &mut rng);
        let m = MassMatrix::dense(d, &raw).unwrap();
        for _ in 0..20 {
            let x = rng.normal_vec(d);
            let y = m.apply_inverse(&x).unwrap();
            let r = matvec(d, &raw, &y);
            let res: f64 = r.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-9, "residual {res}");
            let back = m.apply_inverse(&m.apply(&x).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let m = MassMatrix::identity(3).unwrap();
        assert!(matches!(m.apply_inverse(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(m.kinetic_energy(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(MassMatrix::diagonal(vec![1.0, 0.0]).is_err());
        assert!(MassMatrix::diagonal(vec![1.0, -2.0]).is_err());
        assert!(MassMatrix::dense(2, &[1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(MassMatrix::dense(2, &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(MassMatrix::identity(0).is_err());
    }

    #[test]
    fn kinetic_examples() {
        let id = MassMatrix::identity(2).unwrap();
        assert_eq!(id.kinetic_energy(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(id.kinetic_energy(&[3.0, 4.0]).unwrap(), 12.5);
        let diag = MassMatrix::diagonal(vec![2.0, 2.0]).unwrap();
        assert_eq!(diag.kinetic_energy(&[2.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn identity_momentum_is_raw_normal() {
        let m = MassMatrix::identity(4).unwrap();
        let p = m.sample_momentum(&mut RngStream::new(8));
        let z = RngStream::new(8).normal_vec(4);
        assert_eq!(p, z);
    }

    #[test]
    fn dense_kinetic_of_factor_image() {
        let mut rng = RngStream::new(21);
        let d = 4;
        let m = MassMatrix::dense(d, &random_spd(d, &mut rng)).unwrap();
        let MassMatrix::Dense(dm) = &m else { unreachable!() };
        for _ in 0..20 {
            let z = rng.normal_vec(d);
            let p: Vec<f64> = (&dm.factor * DVector::from_column_slice(&z)).iter().copied().collect();
            let half_z2 = 0.5 * z.iter().map(|x| x * x).sum::<f64>();
            let ke = m.kinetic_energy(&p).unwrap();
            assert!((ke - half_z2).abs() <= 1e-9 * half_z2);
        }
    }

    #[test]
    fn diagonal_momentum_variance() {
        let m = MassMatrix::diagonal(vec![4.0, 9.0]).unwrap();
        let mut rng = RngStream::new(3);
        let n = 100_000;
        let mut s = [0.0; 2];
        for _ in 0..n {
            let p = m.sample_momentum(&mut rng);
            s[0] += p[0] * p[0];
            s[1] += p[1] * p[1];
        }
        assert!((s[0] / n as f64 / 4.0 - 1.0).abs() < 0.05);
        assert!((s[1] / n as f64 / 9.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn dense_momentum_covariance() {
        let mut rng = RngStream::new(17);
        let d = 3;
        let raw = random_spd(d, &mut rng);
        let m = MassMatrix::dense(d, &raw).unwrap();
        let n = 100_000;
        let mut cov = vec![0.0; d * d];
        for _ in 0..n {
            let p = m.sample_momentum(&mut rng);
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += p[i] * p[j] / n as f64;
                }
            }
        }
        let diff: f64 = cov.iter().zip(&raw).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff / norm < 0.10, "relative Frobenius error {}", diff / norm);
    }

    proptest::proptest! {
        #[test]
        fn kinetic_flip_symmetry(p in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let m = MassMatrix::diagonal(vec![0.5, 2.0, 3.0]).unwrap();
            let neg: Vec<f64> = p.iter().map(|x| -x).collect();
            proptest::prop_assert_eq!(m.kinetic_energy(&p).unwrap(), m.kinetic_energy(&neg).unwrap());
        }
    }
}
