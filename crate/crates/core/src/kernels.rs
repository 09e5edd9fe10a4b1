//! Base kernels and their partial derivatives in the first argument.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar profile `f(r)` of a non-negative distance.
#[derive(Clone)]
pub struct RadialFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl RadialFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn call(&self, r: f64) -> f64 {
        (self.0)(r)
    }
}

impl fmt::Debug for RadialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RadialFn(..)")
    }
}

/// Kernel family and its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// `exp(-‖x-y‖² / 2σ²)`
    Gaussian { sigma: f64 },
    /// `exp(-‖x-y‖₁ / σ)`
    Laplacian { sigma: f64 },
    /// `(c + x·y)^p`
    Polynomial { c: f64, p: u32 },
    /// `f(‖x-y‖)`; evaluation only, not serializable.
    #[serde(skip)]
    Radial(RadialFn),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Laplacian { .. } => "laplacian",
            Family::Polynomial { .. } => "polynomial",
            Family::Radial(_) => "radial",
        }
    }
}

fn default_dy() -> usize {
    1
}

#[derive(Deserialize)]
struct RawKernelSpec {
    #[serde(flatten)]
    family: Family,
    #[serde(default = "default_dy")]
    dy: usize,
}

/// A base kernel plus the particle dimension `dy`: (anti)symmetrization
/// permutes coordinates in consecutive blocks of `dy`.
///
/// Serializes as `{"family": "gaussian", "sigma": 0.5, "dy": 1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    #[serde(flatten)]
    family: Family,
    dy: usize,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.dy)
    }
}

impl KernelSpec {
    pub fn new(family: Family, dy: usize) -> Result<Self> {
        match &family {
            Family::Gaussian { sigma } | Family::Laplacian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bandwidth must be positive, got {sigma}"
                    )));
                }
            }
            Family::Polynomial { c, p } => {
                if *p < 1 {
                    return Err(Error::InvalidParameter(
                        "polynomial degree must be ≥ 1".into(),
                    ));
                }
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial offset must be non-negative, got {c}"
                    )));
                }
            }
            Family::Radial(_) => {}
        }
        if dy == 0 {
            return Err(Error::InvalidParameter(
                "particle dimension must be ≥ 1".into(),
            ));
        }
        Ok(Self { family, dy })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::Gaussian { sigma }, 1)
    }

    pub fn laplacian(sigma: f64) -> Result<Self> {
        Self::new(Family::Laplacian { sigma }, 1)
    }

    pub fn polynomial(c: f64, p: u32) -> Result<Self> {
        Self::new(Family::Polynomial { c, p }, 1)
    }

    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            family: Family::Radial(RadialFn::new(f)),
            dy: 1,
        }
    }

    pub fn with_dy(self, dy: usize) -> Result<Self> {
        Self::new(self.family, dy)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    /// `true` for families whose value factorizes over coordinate blocks
    /// through a function of the block distance (Slater/permanent fast paths).
    pub fn is_entrywise_radial(&self) -> bool {
        !matches!(self.family, Family::Polynomial { .. })
    }

    fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        self.check_len(x.len())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(self.value(x, y))
    }

    /// `∂/∂x_l k(x, y)`.
    pub fn eval_d1(&self, x: &[f64], y: &[f64], l: usize) -> Result<f64> {
        self.check_derivative(x, y, l)?;
        Ok(match self.family {
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                -(x[l] - y[l]) / s2 * self.value(x, y)
            }
            Family::Polynomial { c, p } => {
                let p = p as i32;
                p as f64 * (c + dot(x, y)).powi(p - 1) * y[l]
            }
            _ => unreachable!("checked by check_derivative"),
        })
    }

    /// `∂²/∂x_l² k(x, y)`.
    pub fn eval_d2(&self, x: &[f64], y: &[f64], l: usize) -> Result<f64> {
        self.check_derivative(x, y, l)?;
        Ok(match self.family {
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let diff = x[l] - y[l];
                (diff * diff / (s2 * s2) - 1.0 / s2) * self.value(x, y)
            }
            Family::Polynomial { c, p } => {
                if p < 2 {
                    0.0
                } else {
                    let p = p as i32;
                    (p * (p - 1)) as f64 * (c + dot(x, y)).powi(p - 2) * y[l] * y[l]
                }
            }
            _ => unreachable!("checked by check_derivative"),
        })
    }

    fn check_derivative(&self, x: &[f64], y: &[f64], l: usize) -> Result<()> {
        match self.family {
            Family::Gaussian { .. } | Family::Polynomial { .. } => {}
            _ => {
                return Err(Error::UnsupportedDerivative {
                    family: self.family.name(),
                })
            }
        }
        self.check_pair(x, y)?;
        if l >= x.len() {
            return Err(Error::InvalidParameter(format!(
                "coordinate index {l} out of range for dimension {}",
                x.len()
            )));
        }
        Ok(())
    }

    /// Single-block factor `f(‖a - b‖)` for the Slater and permanent forms.
    /// Only meaningful for entrywise-radial families.
    pub(crate) fn block_factor(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.family {
            Family::Gaussian { sigma } => (-squared_distance(a, b) / (2.0 * sigma * sigma)).exp(),
            Family::Laplacian { sigma } => (-l1_distance(a, b) / sigma).exp(),
            Family::Radial(f) => f.call(squared_distance(a, b).sqrt()),
            Family::Polynomial { .. } => {
                unreachable!("polynomial kernels have no entrywise form")
            }
        }
    }
}

/// A kernel on real vectors.
///
/// `value` assumes the inputs passed `check_len`; callers that assemble
/// many entries validate once up front.
pub trait Kernel: Send + Sync {
    fn check_len(&self, len: usize) -> Result<()>;

    fn value(&self, x: &[f64], y: &[f64]) -> f64;

    /// `Σ_l ∂²/∂x_l² k(x, y)`, the Laplacian in the first argument.
    fn laplacian(&self, _x: &[f64], _y: &[f64]) -> Result<f64> {
        Err(Error::UnsupportedDerivative { family: "this" })
    }

    fn describe(&self) -> String;
}

impl Kernel for KernelSpec {
    fn check_len(&self, len: usize) -> Result<()> {
        if len == 0 || !len.is_multiple_of(self.dy) {
            return Err(Error::NotDivisible { len, dy: self.dy });
        }
        Ok(())
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            Family::Gaussian { sigma } => (-squared_distance(x, y) / (2.0 * sigma * sigma)).exp(),
            Family::Laplacian { sigma } => (-l1_distance(x, y) / sigma).exp(),
            Family::Polynomial { c, p } => (c + dot(x, y)).powi(*p as i32),
            Family::Radial(f) => f.call(squared_distance(x, y).sqrt()),
        }
    }

    fn laplacian(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        (0..x.len()).map(|l| self.eval_d2(x, y, l)).sum()
    }

    fn describe(&self) -> String {
        match &self.family {
            Family::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            Family::Laplacian { sigma } => format!("laplacian(sigma={sigma})"),
            Family::Polynomial { c, p } => format!("polynomial(c={c}, p={p})"),
            Family::Radial(_) => "radial".to_string(),
        }
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn check_len(&self, len: usize) -> Result<()> {
        (**self).check_len(len)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).value(x, y)
    }
    fn laplacian(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        (**self).laplacian(x, y)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<K: Kernel + ?Sized> Kernel for Arc<K> {
    fn check_len(&self, len: usize) -> Result<()> {
        (**self).check_len(len)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).value(x, y)
    }
    fn laplacian(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        (**self).laplacian(x, y)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn all_families() -> Vec<KernelSpec> {
        vec![
            KernelSpec::gaussian(0.7).unwrap(),
            KernelSpec::laplacian(0.9).unwrap(),
            KernelSpec::polynomial(1.0, 3).unwrap(),
            KernelSpec::radial(|r| 1.0 / (1.0 + r * r)),
        ]
    }

    #[test]
    fn eval_examples() {
        let g = KernelSpec::gaussian(0.5).unwrap();
        assert_eq!(g.eval(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 1.0);
        let p = KernelSpec::polynomial(1.0, 2).unwrap();
        assert_eq!(p.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let g1 = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(g1.eval(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), (-0.5f64).exp());
        let l = KernelSpec::laplacian(2.0).unwrap();
        assert_eq!(l.eval(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), (-1.0f64).exp());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplacian(-1.0).is_err());
        assert!(KernelSpec::polynomial(1.0, 0).is_err());
        assert!(KernelSpec::gaussian(1.0).unwrap().with_dy(0).is_err());
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            g.eval(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let g3 = g.with_dy(3).unwrap();
        assert!(matches!(
            g3.eval(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::NotDivisible { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let x = [0.2, -0.4];
        assert_eq!(g.eval_d1(&x, &x, 0).unwrap(), 0.0);
        assert_eq!(g.eval_d2(&x, &x, 1).unwrap(), -1.0);
        let l = KernelSpec::laplacian(1.0).unwrap();
        assert!(matches!(
            l.eval_d1(&x, &x, 0),
            Err(Error::UnsupportedDerivative {
                family: "laplacian"
            })
        ));
        assert!(g.eval_d1(&x, &x, 2).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shifted = |x: &[f64], l: usize, h: f64| {
            let mut v = x.to_vec();
            v[l] += h;
            v
        };
        for spec in [
            KernelSpec::gaussian(0.7).unwrap(),
            KernelSpec::polynomial(0.5, 4).unwrap(),
        ] {
            for _ in 0..100 {
                let x = random_vec(&mut rng, 3);
                let y = random_vec(&mut rng, 3);
                let l = rng.random_range(0..3);
                let (h1, h2) = (1e-5, 1e-4);
                let fd1 = (spec.value(&shifted(&x, l, h1), &y)
                    - spec.value(&shifted(&x, l, -h1), &y))
                    / (2.0 * h1);
                let fd2 = (spec.value(&shifted(&x, l, h2), &y) - 2.0 * spec.value(&x, &y)
                    + spec.value(&shifted(&x, l, -h2), &y))
                    / (h2 * h2);
                let d1 = spec.eval_d1(&x, &y, l).unwrap();
                let d2 = spec.eval_d2(&x, &y, l).unwrap();
                assert!(
                    (d1 - fd1).abs() <= 1e-6 * d1.abs().max(1e-3),
                    "{d1} vs {fd1}"
                );
                assert!(
                    (d2 - fd2).abs() <= 1e-4 * d2.abs().max(1e-2),
                    "{d2} vs {fd2}"
                );
            }
        }
    }

    #[test]
    fn symmetric_and_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let perms: Vec<_> = crate::combinatorics::enumerate_permutations(4)
            .unwrap()
            .collect();
        for spec in all_families() {
            for _ in 0..20 {
                let x = random_vec(&mut rng, 4);
                let y = random_vec(&mut rng, 4);
                let k = spec.value(&x, &y);
                assert!((k - spec.value(&y, &x)).abs() <= 1e-14 * k.abs().max(1.0));
                for p in &perms {
                    let px = p.apply(&x).unwrap();
                    let py = p.apply(&y).unwrap();
                    assert!((k - spec.value(&px, &py)).abs() <= 1e-12 * k.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn gaussian_gram_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = KernelSpec::gaussian(0.5).unwrap();
        let pts: Vec<Vec<f64>> = (0..12).map(|_| random_vec(&mut rng, 2)).collect();
        let gram = DMatrix::from_fn(12, 12, |i, j| g.value(&pts[i], &pts[j]));
        let min = SymmetricEigen::new(gram).eigenvalues.min();
        assert!(min >= -1e-10, "min eigenvalue {min}");
    }

    #[test]
    fn json_round_trip() {
        let spec: KernelSpec =
            serde_json::from_str(r#"{"family":"gaussian","sigma":0.25,"dy":2}"#).unwrap();
        assert_eq!(spec.dy(), 2);
        assert!(matches!(spec.family(), Family::Gaussian { sigma } if *sigma == 0.25));
        let text = serde_json::to_string(&spec).unwrap();
        let back: KernelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.describe(), spec.describe());
        let poly: KernelSpec =
            serde_json::from_str(r#"{"family":"polynomial","c":1,"p":2}"#).unwrap();
        assert_eq!(poly.dy(), 1);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"gaussian","sigma":-1}"#).is_err());
    }
}
