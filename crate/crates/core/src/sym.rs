//! Symmetrized kernels, exact permanents, and the quotient-of-determinants
//! approximation of the symmetric Gaussian kernel.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::antisym::{is_permutation_invariant, permute_blocks_into, signed_block_images};
use crate::combinatorics::{factorial, for_each_permutation, ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::kernels::{squared_distance, Family, Kernel, KernelSpec};
use crate::linalg::det_lu;

/// Largest matrix accepted by [`permanent`].
pub const PERMANENT_CAP: usize = 20;

/// Threshold below which the quotient kernel's denominator counts as zero.
pub const DENOMINATOR_EPS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymStrategy {
    NaiveDoubleSum,
    NaiveSingleSum,
    Permanent,
}

impl SymStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SymStrategy::NaiveDoubleSum => "naive_double_sum",
            SymStrategy::NaiveSingleSum => "naive_single_sum",
            SymStrategy::Permanent => "permanent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymKernel {
    base: KernelSpec,
    strategy: SymStrategy,
}

impl SymKernel {
    pub fn new(base: KernelSpec, strategy: SymStrategy) -> Result<Self> {
        let ok = match strategy {
            SymStrategy::Permanent => base.is_entrywise_radial(),
            SymStrategy::NaiveSingleSum => is_permutation_invariant(&base),
            SymStrategy::NaiveDoubleSum => true,
        };
        if !ok {
            return Err(Error::IncompatibleStrategy {
                strategy: strategy.name(),
                family: base.family().name(),
            });
        }
        Ok(Self { base, strategy })
    }

    pub fn base(&self) -> &KernelSpec {
        &self.base
    }

    pub fn strategy(&self) -> SymStrategy {
        self.strategy
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        self.check_len(x.len())?;
        Ok(self.value(x, y))
    }

    fn blocks(&self, len: usize) -> usize {
        len / self.base.dy()
    }

    fn entry_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let dy = self.base.dy();
        let n = self.blocks(x.len());
        DMatrix::from_fn(n, n, |i, j| {
            self.base
                .block_factor(&x[i * dy..(i + 1) * dy], &y[j * dy..(j + 1) * dy])
        })
    }

    fn plain_sum<G: FnMut(&[f64]) -> f64>(&self, x: &[f64], mut g: G) -> f64 {
        let dy = self.base.dy();
        let n = self.blocks(x.len());
        let mut px = vec![0.0; x.len()];
        let mut acc = 0.0;
        for_each_permutation(n, |img, _| {
            permute_blocks_into(x, img, dy, &mut px);
            acc += g(&px);
        })
        .expect("block count checked against the cap");
        acc
    }

    fn double_sum<G: Fn(&[f64], &[f64]) -> f64>(&self, x: &[f64], y: &[f64], g: G) -> f64 {
        let n = self.blocks(x.len());
        let images = signed_block_images(y, n, self.base.dy());
        let nf = factorial(n) as f64;
        self.plain_sum(x, |px| images.iter().map(|(_, py)| g(px, py)).sum::<f64>()) / (nf * nf)
    }
}

impl Kernel for SymKernel {
    fn check_len(&self, len: usize) -> Result<()> {
        self.base.check_len(len)?;
        let n = self.blocks(len);
        let cap = match self.strategy {
            SymStrategy::Permanent => PERMANENT_CAP,
            _ => ENUMERATION_CAP,
        };
        if n > cap {
            return Err(Error::CapExceeded { dim: n, cap });
        }
        Ok(())
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.blocks(x.len());
        match self.strategy {
            SymStrategy::Permanent => ryser(&self.entry_matrix(x, y)) / factorial(n) as f64,
            SymStrategy::NaiveSingleSum => {
                self.plain_sum(x, |px| self.base.value(px, y)) / factorial(n) as f64
            }
            SymStrategy::NaiveDoubleSum => self.double_sum(x, y, |a, b| self.base.value(a, b)),
        }
    }

    fn laplacian(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.blocks(x.len());
        match (self.strategy, self.base.family()) {
            // The permanent is linear in each row, like the determinant.
            (SymStrategy::Permanent, Family::Gaussian { sigma }) => {
                let dy = self.base.dy();
                let s2 = sigma * sigma;
                let base = self.entry_matrix(x, y);
                let mut total = 0.0;
                for i in 0..n {
                    let mut m = base.clone();
                    for j in 0..n {
                        let r2 =
                            squared_distance(&x[i * dy..(i + 1) * dy], &y[j * dy..(j + 1) * dy]);
                        m[(i, j)] = (r2 / (s2 * s2) - dy as f64 / s2) * base[(i, j)];
                    }
                    total += ryser(&m);
                }
                Ok(total / factorial(n) as f64)
            }
            (SymStrategy::Permanent, family) => Err(Error::UnsupportedDerivative {
                family: family.name(),
            }),
            (SymStrategy::NaiveSingleSum, _) => {
                self.base.laplacian(x, y)?;
                Ok(self.plain_sum(x, |px| {
                    self.base.laplacian(px, y).expect("family checked above")
                }) / factorial(n) as f64)
            }
            (SymStrategy::NaiveDoubleSum, _) => {
                self.base.laplacian(x, y)?;
                Ok(self.double_sum(x, y, |a, b| {
                    self.base.laplacian(a, b).expect("family checked above")
                }))
            }
        }
    }

    fn describe(&self) -> String {
        format!("sym[{}]({})", self.strategy.name(), self.base.describe())
    }
}

/// Exact permanent of a square matrix by Ryser's formula with Gray-code
/// subset order, `O(2ⁿ n)`.
pub fn permanent(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.nrows() > PERMANENT_CAP {
        return Err(Error::CapExceeded {
            dim: a.nrows(),
            cap: PERMANENT_CAP,
        });
    }
    Ok(ryser(a))
}

fn ryser(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let mut row_sums = vec![0.0; n];
    let mut total = 0.0;
    for k in 1u32..(1u32 << n) {
        let bit = k.trailing_zeros() as usize;
        let next = k ^ (k >> 1);
        let added = next & (1 << bit) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += a[(i, bit)];
            } else {
                *s -= a[(i, bit)];
            }
        }
        let prod: f64 = row_sums.iter().product();
        if next.count_ones() % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n.is_multiple_of(2) {
        total
    } else {
        -total
    }
}

/// `k_a⁽¹⁾(x, x') / k_a⁽²⁾(x, x')` for antisymmetric Gaussians with
/// bandwidths `σ₁ < σ₂`; the `1/d!` factors cancel. For `d = 2` with
/// coincident coordinates in one argument the l'Hôpital limit
/// `(σ₂²/σ₁²) k⁽¹⁾(x, x') / k⁽²⁾(x, x')` is returned.
pub fn quotient_sym_eval(sigma1: f64, sigma2: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(sigma1 > 0.0 && sigma1.is_finite() && sigma2.is_finite() && sigma1 < sigma2) {
        return Err(Error::InvalidParameter(format!(
            "quotient kernel needs 0 < sigma1 < sigma2, got {sigma1} and {sigma2}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x.len();
    if d == 2 {
        let x_coincides = x[0] == x[1];
        let y_coincides = y[0] == y[1];
        if x_coincides != y_coincides {
            let gauss = |s: f64| (-squared_distance(x, y) / (2.0 * s * s)).exp();
            return Ok((sigma2 * sigma2) / (sigma1 * sigma1) * gauss(sigma1) / gauss(sigma2));
        }
    }
    let slater = |s: f64| {
        det_lu(DMatrix::from_fn(d, d, |i, j| {
            let diff = x[i] - y[j];
            (-diff * diff / (2.0 * s * s)).exp()
        }))
    };
    let den = slater(sigma2);
    if den.abs() < DENOMINATOR_EPS {
        return Err(Error::DegenerateDenominator { value: den });
    }
    Ok(slater(sigma1) / den)
}

/// Bandwidth of the Gaussian approximated by the quotient kernel:
/// `1/σ² = 1/σ₁² - 1/σ₂²`.
pub fn quotient_effective_sigma(sigma1: f64, sigma2: f64) -> f64 {
    (1.0 / (1.0 / (sigma1 * sigma1) - 1.0 / (sigma2 * sigma2))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enumerate_permutations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn leibniz_permanent(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        enumerate_permutations(n)
            .unwrap()
            .map(|p| (0..n).map(|i| a[(p.image()[i], i)]).product::<f64>())
            .sum()
    }

    fn rv(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn permanent_small_cases() {
        assert_eq!(permanent(&DMatrix::from_element(1, 1, 2.5)).unwrap(), 2.5);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(permanent(&a).unwrap(), 10.0);
        assert_eq!(permanent(&DMatrix::zeros(0, 0)).unwrap(), 1.0);
        assert!(permanent(&DMatrix::zeros(21, 21)).is_err());
        assert!(permanent(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn ryser_matches_leibniz() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=7 {
            for _ in 0..5 {
                let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
                let want = leibniz_permanent(&a);
                let got = permanent(&a).unwrap();
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs(),
                    "n={n}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn two_by_two_permanent_is_sign_flipped_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let mut flipped = a.clone();
            flipped[(0, 1)] = -flipped[(0, 1)];
            assert!((permanent(&a).unwrap() - det_lu(flipped)).abs() <= 1e-14);
        }
    }

    #[test]
    fn sym_eval_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = SymKernel::new(KernelSpec::gaussian(0.5).unwrap(), SymStrategy::Permanent).unwrap();
        let x = rv(&mut rng, 3);
        let y = rv(&mut rng, 3);
        let v = k.eval(&x, &y).unwrap();
        for p in enumerate_permutations(3).unwrap() {
            let pv = k.eval(&p.apply(&x).unwrap(), &y).unwrap();
            assert!((pv - v).abs() <= 1e-14 * v);
        }
        let base = KernelSpec::gaussian(0.5).unwrap();
        let k1 = SymKernel::new(base.clone(), SymStrategy::NaiveDoubleSum).unwrap();
        assert_eq!(
            k1.eval(&[0.2], &[0.7]).unwrap(),
            base.eval(&[0.2], &[0.7]).unwrap()
        );
    }

    #[test]
    fn permanent_strategy_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = KernelSpec::gaussian(0.5).unwrap();
        let fast = SymKernel::new(base.clone(), SymStrategy::Permanent).unwrap();
        let slow = SymKernel::new(base, SymStrategy::NaiveDoubleSum).unwrap();
        for _ in 0..10 {
            let x = rv(&mut rng, 4);
            let y = rv(&mut rng, 4);
            let a = fast.eval(&x, &y).unwrap();
            let b = slow.eval(&x, &y).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.abs());
        }
        let poly = KernelSpec::polynomial(1.0, 2).unwrap();
        assert!(SymKernel::new(poly, SymStrategy::Permanent).is_err());
    }

    #[test]
    fn permanent_laplacian_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = KernelSpec::gaussian(0.6).unwrap();
        let fast = SymKernel::new(base.clone(), SymStrategy::Permanent).unwrap();
        let slow = SymKernel::new(base, SymStrategy::NaiveSingleSum).unwrap();
        for _ in 0..10 {
            let x = rv(&mut rng, 3);
            let y = rv(&mut rng, 3);
            let a = fast.laplacian(&x, &y).unwrap();
            let b = slow.laplacian(&x, &y).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-8));
        }
    }

    #[test]
    fn quotient_is_permutation_symmetric() {
        let x = [0.7, -0.2];
        let y = [0.4, -0.3];
        let a = quotient_sym_eval(0.3, 0.6, &x, &y).unwrap();
        let b = quotient_sym_eval(0.3, 0.6, &[x[1], x[0]], &y).unwrap();
        assert!((a - b).abs() <= 1e-13 * a.abs());
        let c = quotient_sym_eval(0.3, 0.6, &x, &[y[1], y[0]]).unwrap();
        assert!((a - c).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn quotient_rejects_bad_bandwidths_and_degenerate_points() {
        assert!(quotient_sym_eval(0.6, 0.3, &[0.1, 0.2], &[0.3, 0.4]).is_err());
        assert!(matches!(
            quotient_sym_eval(0.3, 0.6, &[0.1, 0.1, 0.5], &[0.3, 0.4, 0.2]),
            Err(Error::DegenerateDenominator { .. })
        ));
        assert!(matches!(
            quotient_sym_eval(0.3, 0.6, &[0.1, 0.1], &[0.3, 0.3]),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn quotient_limit_at_coincidence() {
        let (s1, s2) = (0.3, 0.5);
        let y = [0.4, -0.3];
        let limit = quotient_sym_eval(s1, s2, &[0.3, 0.3], &y).unwrap();
        let gauss = |s: f64| (-squared_distance(&[0.3, 0.3], &y) / (2.0 * s * s)).exp();
        assert!((limit - s2 * s2 / (s1 * s1) * gauss(s1) / gauss(s2)).abs() <= 1e-14 * limit);
        let by_symmetry = quotient_sym_eval(s1, s2, &y, &[0.3, 0.3]).unwrap();
        assert_eq!(by_symmetry, limit);
    }
}
