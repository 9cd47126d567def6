//! Target distributions `π(q) ∝ exp(-U(q))` and the benchmark potentials.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

/// A sampling problem: a potential `U` and its gradient on `ℝ^dim`.
///
/// Implementations write raw values; use [`potential`] and [`gradient`] for
/// length and finiteness checks.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn potential(&self, q: &[f64]) -> f64;

    fn gradient(&self, q: &[f64], out: &mut [f64]);

    fn descriptor(&self) -> TargetDescriptor {
        TargetDescriptor::new("custom", "Custom")
    }
}

/// Name, known modes and known moments of a target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetDescriptor {
    /// Config name, e.g. `funnel10`.
    pub name: String,
    /// Label used in result tables, e.g. `Neals_Funnel_10D`.
    pub label: String,
    pub mode_centers: Vec<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
    pub variance: Option<Vec<f64>>,
    pub note: Option<String>,
}

impl TargetDescriptor {
    pub fn new(name: &str, label: &str) -> Self {
        Self { name: name.into(), label: label.into(), ..Self::default() }
    }
}

/// `U(q)`, checked for length; a non-finite value is [`Error::NonFinite`].
pub fn potential(model: &dyn Target, q: &[f64]) -> Result<f64> {
    check_len(model.dim(), q.len())?;
    let u = model.potential(q);
    if !u.is_finite() {
        return Err(Error::NonFinite("potential"));
    }
    Ok(u)
}

/// `∇U(q)`, checked for length and finiteness.
pub fn gradient(model: &dyn Target, q: &[f64]) -> Result<Vec<f64>> {
    check_len(model.dim(), q.len())?;
    let mut g = vec![0.0; q.len()];
    model.gradient(q, &mut g);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(g)
}

/// Gaussian with zero mean and diagonal precision: `U = ½ Σ precision_i q_i²`.
#[derive(Debug, Clone)]
pub struct DiagonalGaussian {
    precision: Vec<f64>,
    descriptor: TargetDescriptor,
}

impl DiagonalGaussian {
    pub fn from_precision(precision: Vec<f64>) -> Result<Self> {
        if precision.is_empty() {
            return Err(Error::InvalidParameter("gaussian needs at least one precision".into()));
        }
        if precision.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidParameter("gaussian precisions must be positive".into()));
        }
        let d = precision.len();
        let mut descriptor = TargetDescriptor::new("gaussian", &format!("Gaussian_{d}D"));
        descriptor.mean = Some(vec![0.0; d]);
        descriptor.variance = Some(precision.iter().map(|p| 1.0 / p).collect());
        descriptor.mode_centers = vec![vec![0.0; d]];
        Ok(Self { precision, descriptor })
    }

    /// `N(0, I_d)`.
    pub fn isotropic(d: usize) -> Result<Self> {
        let mut g = Self::from_precision(vec![1.0; d])?;
        g.descriptor.name = format!("isotropic{d}");
        g.descriptor.label = format!("Isotropic_Gaussian_{d}D");
        Ok(g)
    }

    /// `N(0, diag(1, 1e-1, ..., 1e-5))`, condition number 1e5.
    pub fn anisotropic6() -> Self {
        let variances = [1.0, 0.1, 0.01, 0.001, 1e-4, 1e-5];
        let mut g = Self::from_precision(variances.iter().map(|v| 1.0 / v).collect())
            .expect("fixed positive variances");
        g.descriptor.name = "anisotropic6".into();
        g.descriptor.label = "Anisotropic_Gaussian_6D".into();
        g
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }
}

impl Target for DiagonalGaussian {
    fn dim(&self) -> usize {
        self.precision.len()
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q.iter().zip(&self.precision).map(|(x, w)| w * x * x).sum::<f64>()
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        for ((g, x), w) in out.iter_mut().zip(q).zip(&self.precision) {
            *g = w * x;
        }
    }

    fn descriptor(&self) -> TargetDescriptor {
        self.descriptor.clone()
    }
}

/// Curved 2D density `U = ½ q₁² + ½ (q₂ + q₁² + 1)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Banana2D;

impl Target for Banana2D {
    fn dim(&self) -> usize {
        2
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let r = q[1] + q[0] * q[0] + 1.0;
        0.5 * q[0] * q[0] + 0.5 * r * r
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let r = q[1] + q[0] * q[0] + 1.0;
        out[0] = q[0] + 2.0 * q[0] * r;
        out[1] = r;
    }

    fn descriptor(&self) -> TargetDescriptor {
        let mut d = TargetDescriptor::new("banana2", "Banana_2D");
        // q1 ~ N(0,1), q2 = -q1² - 1 + N(0,1)
        d.mean = Some(vec![0.0, -2.0]);
        d.variance = Some(vec![1.0, 3.0]);
        d
    }
}

/// Equal-weight mixture of unit-covariance Gaussians,
/// `U = -log((1/K) Σ_k N(q | μ_k, I))`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    dim: usize,
    log_norm: f64,
    descriptor: TargetDescriptor,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>) -> Result<Self> {
        let dim = means.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidParameter("mixture needs at least one non-empty mean".into()));
        }
        for m in &means {
            check_len(dim, m.len())?;
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("mixture mean"));
            }
        }
        let k = means.len() as f64;
        let log_norm = k.ln() + 0.5 * dim as f64 * (2.0 * PI).ln();
        let mut descriptor = TargetDescriptor::new("mixture", &format!("Mixture_{}Gaussians_{dim}D", means.len()));
        descriptor.mode_centers = means.clone();
        let mean: Vec<f64> = (0..dim).map(|i| means.iter().map(|m| m[i]).sum::<f64>() / k).collect();
        let variance = (0..dim)
            .map(|i| 1.0 + means.iter().map(|m| (m[i] - mean[i]).powi(2)).sum::<f64>() / k)
            .collect();
        descriptor.mean = Some(mean);
        descriptor.variance = Some(variance);
        Ok(Self { means, dim, log_norm, descriptor })
    }

    /// Three modes at `-s·1`, `0`, `+s·1` in `ℝ^d`.
    pub fn three_modes(d: usize, separation: f64) -> Result<Self> {
        let mut m = Self::new(vec![vec![-separation; d], vec![0.0; d], vec![separation; d]])?;
        let sep = separation as i64;
        if d == 5 && (sep as f64) == separation {
            m.descriptor.name = format!("mixture3_sep{sep}");
        }
        Ok(m)
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    fn log_components(&self, q: &[f64], out: &mut [f64]) {
        for (l, m) in out.iter_mut().zip(&self.means) {
            *l = -0.5 * q.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
    }

    /// Posterior component weights `w_k(q)`, computed with log-sum-exp.
    pub fn responsibilities(&self, q: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.means.len()];
        self.log_components(q, &mut w);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in w.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        w.iter_mut().for_each(|x| *x /= total);
        w
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl Target for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let mut l = vec![0.0; self.means.len()];
        self.log_components(q, &mut l);
        self.log_norm - log_sum_exp(&l)
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let w = self.responsibilities(q);
        out.iter_mut().for_each(|g| *g = 0.0);
        for (wk, m) in w.iter().zip(&self.means) {
            for ((g, x), mu) in out.iter_mut().zip(q).zip(m) {
                *g += wk * (x - mu);
            }
        }
    }

    fn descriptor(&self) -> TargetDescriptor {
        self.descriptor.clone()
    }
}

/// Neal's funnel on `(q₁..q_{d-1}, v)`, with the scale variable `v` last:
/// `U = v²/18 + ½ Σ q_i² e^{-v} + ((d-1)/2) v`.
#[derive(Debug, Clone, Copy)]
pub struct NealsFunnel {
    dim: usize,
}

impl NealsFunnel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter("funnel needs dim >= 2".into()));
        }
        Ok(Self { dim })
    }
}

impl Target for NealsFunnel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let n = self.dim - 1;
        let v = q[n];
        let s: f64 = q[..n].iter().map(|x| x * x).sum();
        v * v / 18.0 + 0.5 * s * (-v).exp() + 0.5 * n as f64 * v
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let n = self.dim - 1;
        let v = q[n];
        let e = (-v).exp();
        let mut s = 0.0;
        for (g, x) in out[..n].iter_mut().zip(&q[..n]) {
            *g = x * e;
            s += x * x;
        }
        out[n] = v / 9.0 - 0.5 * s * e + 0.5 * n as f64;
    }

    fn descriptor(&self) -> TargetDescriptor {
        let n = self.dim - 1;
        let mut d = TargetDescriptor::new(&format!("funnel{}", self.dim), &format!("Neals_Funnel_{}D", self.dim));
        d.mean = Some(vec![0.0; self.dim]);
        let mut var = vec![4.5f64.exp(); n];
        var.push(9.0);
        d.variance = Some(var);
        d.note = Some("coordinate order (q1..q_n, v): the scale variable v is last".into());
        d
    }
}

/// Names accepted by [`by_name`].
pub const TARGET_NAMES: &[&str] =
    &["isotropic10", "anisotropic6", "banana2", "mixture3_sep3", "mixture3_sep8", "funnel10", "gaussian"];

/// Resolve a target by its config name. `gaussian` requires `precision`.
pub fn by_name(name: &str, precision: Option<&[f64]>) -> Result<Box<dyn Target>> {
    Ok(match name {
        "isotropic10" => Box::new(DiagonalGaussian::isotropic(10)?),
        "anisotropic6" => Box::new(DiagonalGaussian::anisotropic6()),
        "banana2" => Box::new(Banana2D),
        "mixture3_sep3" => Box::new(GaussianMixture::three_modes(5, 3.0)?),
        "mixture3_sep8" => Box::new(GaussianMixture::three_modes(5, 8.0)?),
        "funnel10" => Box::new(NealsFunnel::new(10)?),
        "gaussian" => {
            let precision = precision.ok_or_else(|| {
                Error::InvalidParameter("target `gaussian` needs a precision diagonal".into())
            })?;
            Box::new(DiagonalGaussian::from_precision(precision.to_vec())?)
        }
        other => return Err(Error::UnknownTarget(other.into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    /// Central differences of the potential, the independent gradient oracle.
    fn fd_gradient(model: &dyn Target, q: &[f64], h: f64) -> Vec<f64> {
        let mut x = q.to_vec();
        (0..q.len())
            .map(|i| {
                x[i] = q[i] + h;
                let up = model.potential(&x);
                x[i] = q[i] - h;
                let down = model.potential(&x);
                x[i] = q[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn random_point(d: usize, rng: &mut RngStream, radius: f64) -> Vec<f64> {
        let mut q = rng.normal_vec(d);
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = radius * rng.uniform();
        q.iter_mut().for_each(|x| *x *= r / n);
        q
    }

    fn all_models() -> Vec<Box<dyn Target>> {
        TARGET_NAMES
            .iter()
            .map(|n| by_name(n, Some(&[1.0, 2.0, 3.0])).unwrap())
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(99);
        for model in all_models() {
            for _ in 0..50 {
                let q = random_point(model.dim(), &mut rng, 5.0);
                let g = gradient(model.as_ref(), &q).unwrap();
                let fd = fd_gradient(model.as_ref(), &q, 1e-5);
                let scale = g.iter().fold(1.0f64, |a, x| a.max(x.abs()));
                let err = g.iter().zip(&fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                assert!(err / scale < 1e-5, "{}: relative error {}", model.descriptor().name, err / scale);
            }
        }
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential(&Banana2D, &[0.0, -1.0]).unwrap(), 0.0);
        assert_eq!(potential(&NealsFunnel::new(10).unwrap(), &[0.0; 10]).unwrap(), 0.0);
        assert_eq!(gradient(&Banana2D, &[0.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        let iso = DiagonalGaussian::isotropic(10).unwrap();
        assert_eq!(gradient(&iso, &[1.0; 10]).unwrap(), vec![1.0; 10]);
    }

    #[test]
    fn mixture_at_origin_matches_direct_density_sum() {
        let m = GaussianMixture::three_modes(5, 3.0).unwrap();
        let q = [0.0; 5];
        let norm = (2.0 * PI).powf(-2.5);
        let density: f64 = [-3.0f64, 0.0, 3.0]
            .iter()
            .map(|c| norm * (-0.5 * 5.0 * c * c).exp())
            .sum::<f64>()
            / 3.0;
        let expected = -density.ln();
        assert!((potential(&m, &q).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mixture_is_finite_far_out() {
        let m = GaussianMixture::three_modes(5, 8.0).unwrap();
        let q = [100.0 / 5f64.sqrt(); 5];
        assert!(potential(&m, &q).unwrap().is_finite());
        assert!(gradient(&m, &q).unwrap().iter().all(|x| x.is_finite()));
        let q = [-60.0, 60.0, 10.0, -40.0, 0.0];
        assert!(potential(&m, &q).unwrap().is_finite());
    }

    #[test]
    fn mixture_responsibilities_are_a_distribution() {
        let m = GaussianMixture::three_modes(5, 8.0).unwrap();
        let mut rng = RngStream::new(4);
        for _ in 0..200 {
            let q: Vec<f64> = rng.normal_vec(5).iter().map(|x| 20.0 * x).collect();
            let w = m.responsibilities(&q);
            assert!(w.iter().all(|x| *x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_translation_symmetry() {
        let c = 1.7;
        let base = GaussianMixture::three_modes(5, 3.0).unwrap();
        let shifted = GaussianMixture::new(
            base.means().iter().map(|m| m.iter().map(|x| x + c).collect()).collect(),
        )
        .unwrap();
        let mut rng = RngStream::new(12);
        for _ in 0..50 {
            let q = rng.normal_vec(5);
            let qs: Vec<f64> = q.iter().map(|x| x + c).collect();
            assert!((base.potential(&q) - shifted.potential(&qs)).abs() < 1e-10);
        }
    }

    #[test]
    fn anisotropic_gradient_is_scaled_position() {
        let a = DiagonalGaussian::anisotropic6();
        let q = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let g = gradient(&a, &q).unwrap();
        let var = [1.0, 0.1, 0.01, 0.001, 1e-4, 1e-5];
        for i in 0..6 {
            assert!((g[i] - q[i] / var[i]).abs() <= 1e-9 * g[i].abs());
        }
        let p = a.precision();
        let max = p.iter().copied().fold(0.0, f64::max);
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((max / min - 1e5).abs() < 1e-6);
    }

    #[test]
    fn name_resolution() {
        for n in TARGET_NAMES.iter().filter(|n| **n != "gaussian") {
            assert_eq!(by_name(n, None).unwrap().descriptor().name, *n);
        }
        assert!(by_name("gaussian", None).is_err());
        assert!(matches!(by_name("nope", None), Err(Error::UnknownTarget(_))));
        assert_eq!(by_name("mixture3_sep8", None).unwrap().descriptor().mode_centers.len(), 3);
    }

    #[test]
    fn non_finite_and_length_errors() {
        let f = NealsFunnel::new(10).unwrap();
        let mut q = [0.0; 10];
        q[0] = 1.0;
        q[9] = -800.0;
        assert!(matches!(potential(&f, &q), Err(Error::NonFinite(_))));
        assert!(matches!(potential(&f, &[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }
}
