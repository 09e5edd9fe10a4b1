//! Antisymmetrized kernels.
//!
//! For a base kernel `k`, `k_a(x, x') = (1/d!²) Σ_π Σ_π' sgn(π) sgn(π') k(π(x), π'(x'))`.
//! Permutation-invariant bases reduce this to a single sum, and bases whose
//! value factorizes over blocks (Gaussian, Laplacian, radial) reduce it to a
//! Slater determinant `(1/d!) det[f(‖x_i - x'_j‖)]`, evaluated in O(d³).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{factorial, for_each_permutation, ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::kernels::{Family, Kernel, KernelSpec};
use crate::linalg::det_lu;

/// How an antisymmetric kernel is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NaiveDoubleSum,
    NaiveSingleSum,
    SlaterDeterminant,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::NaiveDoubleSum => "naive_double_sum",
            Strategy::NaiveSingleSum => "naive_single_sum",
            Strategy::SlaterDeterminant => "slater_determinant",
        }
    }
}

/// Every shipped base family is invariant under simultaneous block
/// permutations of both arguments.
pub(crate) fn is_permutation_invariant(_spec: &KernelSpec) -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct AntisymKernel {
    base: KernelSpec,
    strategy: Strategy,
}

impl AntisymKernel {
    pub fn new(base: KernelSpec, strategy: Strategy) -> Result<Self> {
        let ok = match strategy {
            Strategy::SlaterDeterminant => base.is_entrywise_radial(),
            Strategy::NaiveSingleSum => is_permutation_invariant(&base),
            Strategy::NaiveDoubleSum => true,
        };
        if !ok {
            return Err(Error::IncompatibleStrategy {
                strategy: strategy.name(),
                family: base.family().name(),
            });
        }
        Ok(Self { base, strategy })
    }

    /// Slater form for radial bases, double sum otherwise.
    pub fn fastest(base: KernelSpec) -> Self {
        let strategy = if base.is_entrywise_radial() {
            Strategy::SlaterDeterminant
        } else {
            Strategy::NaiveSingleSum
        };
        Self { base, strategy }
    }

    pub fn base(&self) -> &KernelSpec {
        &self.base
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Evaluates `k_a(x, x')`, permuting blocks of length `base.dy()`.
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

    fn slater_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let dy = self.base.dy();
        let n = self.blocks(x.len());
        DMatrix::from_fn(n, n, |i, j| {
            self.base
                .block_factor(&x[i * dy..(i + 1) * dy], &y[j * dy..(j + 1) * dy])
        })
    }

    /// Σ_π sgn(π) g(π(x)), over block permutations.
    fn signed_sum<G: FnMut(&[f64]) -> f64>(&self, x: &[f64], mut g: G) -> f64 {
        let dy = self.base.dy();
        let n = self.blocks(x.len());
        let mut px = vec![0.0; x.len()];
        let mut acc = 0.0;
        for_each_permutation(n, |img, sign| {
            permute_blocks_into(x, img, dy, &mut px);
            acc += sign as f64 * g(&px);
        })
        .expect("block count checked against the cap");
        acc
    }

    fn double_sum<G: Fn(&[f64], &[f64]) -> f64>(&self, x: &[f64], y: &[f64], g: G) -> f64 {
        let dy = self.base.dy();
        let n = self.blocks(x.len());
        let perms = signed_block_images(y, n, dy);
        let nf = factorial(n) as f64;
        self.signed_sum(x, |px| {
            perms
                .iter()
                .map(|(s, py)| *s as f64 * g(px, py))
                .sum::<f64>()
        }) / (nf * nf)
    }

    /// `Σ_l ∂²/∂x_l² k_a(x, x')` for the Gaussian Slater form: the
    /// determinant is linear in each row, so the Laplacian is a sum of
    /// determinants with one row replaced by its entrywise Laplacian.
    fn slater_laplacian(&self, x: &[f64], y: &[f64], sigma: f64) -> f64 {
        let dy = self.base.dy();
        let n = self.blocks(x.len());
        let s2 = sigma * sigma;
        let base = self.slater_matrix(x, y);
        let mut total = 0.0;
        for i in 0..n {
            let mut m = base.clone();
            for j in 0..n {
                let r2 = crate::kernels::squared_distance(
                    &x[i * dy..(i + 1) * dy],
                    &y[j * dy..(j + 1) * dy],
                );
                m[(i, j)] = (r2 / (s2 * s2) - dy as f64 / s2) * base[(i, j)];
            }
            total += det_lu(m);
        }
        total / factorial(n) as f64
    }
}

impl Kernel for AntisymKernel {
    fn check_len(&self, len: usize) -> Result<()> {
        self.base.check_len(len)?;
        let n = self.blocks(len);
        if self.strategy != Strategy::SlaterDeterminant && n > ENUMERATION_CAP {
            return Err(Error::CapExceeded {
                dim: n,
                cap: ENUMERATION_CAP,
            });
        }
        Ok(())
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.blocks(x.len());
        let dy = self.base.dy();
        // exact zero; LU would leave rounding residue
        if has_repeated_block(x, dy) || has_repeated_block(y, dy) {
            return 0.0;
        }
        match self.strategy {
            Strategy::SlaterDeterminant => det_lu(self.slater_matrix(x, y)) / factorial(n) as f64,
            Strategy::NaiveSingleSum => {
                self.signed_sum(x, |px| self.base.value(px, y)) / factorial(n) as f64
            }
            Strategy::NaiveDoubleSum => self.double_sum(x, y, |a, b| self.base.value(a, b)),
        }
    }

    fn laplacian(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.blocks(x.len());
        match (self.strategy, self.base.family()) {
            (Strategy::SlaterDeterminant, Family::Gaussian { sigma }) => {
                Ok(self.slater_laplacian(x, y, *sigma))
            }
            (Strategy::SlaterDeterminant, family) => Err(Error::UnsupportedDerivative {
                family: family.name(),
            }),
            // The Laplacian commutes with coordinate permutations, so it can
            // be pushed inside the (anti)symmetrization sums.
            (Strategy::NaiveSingleSum, _) => {
                self.base.laplacian(x, y)?;
                Ok(self.signed_sum(x, |px| {
                    self.base.laplacian(px, y).expect("family checked above")
                }) / factorial(n) as f64)
            }
            (Strategy::NaiveDoubleSum, _) => {
                self.base.laplacian(x, y)?;
                Ok(self.double_sum(x, y, |a, b| {
                    self.base.laplacian(a, b).expect("family checked above")
                }))
            }
        }
    }

    fn describe(&self) -> String {
        format!(
            "antisym[{}]({})",
            self.strategy.name(),
            self.base.describe()
        )
    }
}

pub(crate) fn has_repeated_block(x: &[f64], dy: usize) -> bool {
    let blocks: Vec<&[f64]> = x.chunks(dy).collect();
    (0..blocks.len()).any(|i| (i + 1..blocks.len()).any(|j| blocks[i] == blocks[j]))
}

pub(crate) fn permute_blocks_into(x: &[f64], img: &[usize], dy: usize, out: &mut [f64]) {
    for (i, &b) in img.iter().enumerate() {
        out[i * dy..(i + 1) * dy].copy_from_slice(&x[b * dy..(b + 1) * dy]);
    }
}

/// All `(sgn(π), π(x))` for block permutations of `x`.
pub(crate) fn signed_block_images(x: &[f64], n: usize, dy: usize) -> Vec<(i8, Vec<f64>)> {
    let mut out = Vec::with_capacity(factorial(n) as usize);
    for_each_permutation(n, |img, sign| {
        let mut px = vec![0.0; x.len()];
        permute_blocks_into(x, img, dy, &mut px);
        out.push((sign, px));
    })
    .expect("block count checked against the cap");
    out
}

/// Generalized Slater kernel `(1/d!) det[f(|x_i - x'_j|)]`.
pub fn slater_kernel_eval(f: impl Fn(f64) -> f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    let m = DMatrix::from_fn(n, n, |i, j| f((x[i] - y[j]).abs()));
    Ok(det_lu(m) / factorial(n) as f64)
}

/// First or second partial derivative `∂^order/∂x_l^order` of the
/// antisymmetric Gaussian kernel, as `(1/d!) det` of the Slater matrix with
/// row `l` replaced by the entrywise derivative.
pub fn antisym_gauss_partial(sigma: f64, x: &[f64], y: &[f64], l: usize, order: u8) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {sigma}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if l >= x.len() {
        return Err(Error::InvalidParameter(format!(
            "coordinate index {l} out of range for dimension {}",
            x.len()
        )));
    }
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let n = x.len();
    let s2 = sigma * sigma;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let diff = x[i] - y[j];
        let e = (-diff * diff / (2.0 * s2)).exp();
        if i != l {
            e
        } else if order == 1 {
            -diff / s2 * e
        } else {
            (diff * diff / (s2 * s2) - 1.0 / s2) * e
        }
    });
    Ok(det_lu(m) / factorial(n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enumerate_permutations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// One jittered point per stratum of [-3, 3], in random order: keeps the
    /// double-sum oracle free of catastrophic cancellation.
    fn stratified(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..d)
            .map(|i| -3.0 + 6.0 * (i as f64 + rng.random_range(0.15..0.85)) / d as f64)
            .collect();
        for i in (1..d).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        v
    }

    fn gauss(sigma: f64, s: Strategy) -> AntisymKernel {
        AntisymKernel::new(KernelSpec::gaussian(sigma).unwrap(), s).unwrap()
    }

    /// Straight transcription of the double-sum definition, kept independent
    /// of the implementation's buffers.
    fn oracle_double_sum(base: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
        let dy = base.dy();
        let n = x.len() / dy;
        let perms: Vec<_> = enumerate_permutations(n).unwrap().collect();
        let mut acc = 0.0;
        for p in &perms {
            for q in &perms {
                let px = p.apply_blocks(x, dy).unwrap();
                let qy = q.apply_blocks(y, dy).unwrap();
                acc += (p.sign() * q.sign()) as f64 * base.eval(&px, &qy).unwrap();
            }
        }
        let nf = factorial(n) as f64;
        acc / (nf * nf)
    }

    #[test]
    fn duplicate_entries_vanish() {
        let x = [0.3, 0.3, -0.5];
        let y = [0.1, 0.7, -0.2];
        for s in [
            Strategy::NaiveDoubleSum,
            Strategy::NaiveSingleSum,
            Strategy::SlaterDeterminant,
        ] {
            assert_eq!(gauss(0.4, s).eval(&x, &y).unwrap(), 0.0);
        }
    }

    #[test]
    fn swap_flips_sign() {
        let k = gauss(0.3, Strategy::SlaterDeterminant);
        let x = [0.2, -0.1];
        let y = [0.4, -0.3];
        let a = k.eval(&x, &y).unwrap();
        let b = k.eval(&[x[1], x[0]], &y).unwrap();
        assert!(a != 0.0);
        assert!((a + b).abs() <= 1e-15 * a.abs());
    }

    #[test]
    fn slater_matches_double_sum_d4() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = gauss(1.0, Strategy::SlaterDeterminant);
        for _ in 0..20 {
            let x = stratified(&mut rng, 4);
            let y = stratified(&mut rng, 4);
            let fast = k.eval(&x, &y).unwrap();
            let slow = oracle_double_sum(k.base(), &x, &y);
            assert!(
                (fast - slow).abs() <= 1e-10 * slow.abs(),
                "{fast} vs {slow}"
            );
        }
    }

    #[test]
    fn strategies_agree_for_laplacian_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = KernelSpec::laplacian(0.8).unwrap();
        let kernels: Vec<_> = [
            Strategy::NaiveDoubleSum,
            Strategy::NaiveSingleSum,
            Strategy::SlaterDeterminant,
        ]
        .into_iter()
        .map(|s| AntisymKernel::new(base.clone(), s).unwrap())
        .collect();
        for _ in 0..10 {
            let x = stratified(&mut rng, 3);
            let y = stratified(&mut rng, 3);
            let vals: Vec<f64> = kernels.iter().map(|k| k.eval(&x, &y).unwrap()).collect();
            for v in &vals[1..] {
                assert!((v - vals[0]).abs() <= 1e-12 * vals[0].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn polynomial_base_has_no_slater_path() {
        let err = AntisymKernel::new(
            KernelSpec::polynomial(1.0, 2).unwrap(),
            Strategy::SlaterDeterminant,
        )
        .unwrap_err();
        assert!(matches!(err, Error::IncompatibleStrategy { .. }));
        let k = AntisymKernel::new(
            KernelSpec::polynomial(1.0, 2).unwrap(),
            Strategy::NaiveSingleSum,
        )
        .unwrap();
        // feature space is span{x1 - x2, x1² - x2²}: k_a vanishes when either argument is symmetric
        assert_eq!(k.eval(&[0.5, 0.5], &[0.1, 0.9]).unwrap(), 0.0);
        assert!(k.eval(&[0.5, -0.5], &[0.1, 0.9]).unwrap() != 0.0);
    }

    #[test]
    fn naive_cap_enforced() {
        let k = gauss(1.0, Strategy::NaiveSingleSum);
        let x = vec![0.0; 13];
        assert!(matches!(k.eval(&x, &x), Err(Error::CapExceeded { .. })));
        let fast = gauss(1.0, Strategy::SlaterDeterminant);
        assert!(fast.eval(&x, &x).is_ok());
    }

    #[test]
    fn slater_kernel_examples() {
        let sigma = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rv(&mut rng, 3);
        let y = rv(&mut rng, 3);
        let via_f = slater_kernel_eval(|r| (-r * r / (2.0 * sigma * sigma)).exp(), &x, &y).unwrap();
        let via_kernel = gauss(sigma, Strategy::SlaterDeterminant)
            .eval(&x, &y)
            .unwrap();
        assert!((via_f - via_kernel).abs() <= 1e-15);

        let lap = |r: f64| (-r / sigma).exp();
        let a = slater_kernel_eval(lap, &x, &y).unwrap();
        let b = slater_kernel_eval(lap, &[x[1], x[0], x[2]], &y).unwrap();
        assert!((a + b).abs() <= 1e-14);

        // f(r) = r, hand-expanded 3×3 Leibniz sum
        let m = |i: usize, j: usize| (x[i] - y[j]).abs();
        let leibniz =
            m(0, 0) * m(1, 1) * m(2, 2) - m(0, 0) * m(1, 2) * m(2, 1) - m(0, 1) * m(1, 0) * m(2, 2)
                + m(0, 1) * m(1, 2) * m(2, 0)
                + m(0, 2) * m(1, 0) * m(2, 1)
                - m(0, 2) * m(1, 1) * m(2, 0);
        let got = slater_kernel_eval(|r| r, &x, &y).unwrap();
        assert!((got - leibniz / 6.0).abs() <= 1e-14);
    }

    #[test]
    fn blocked_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plain = gauss(0.7, Strategy::SlaterDeterminant);
        let x = rv(&mut rng, 3);
        let y = rv(&mut rng, 3);
        let dy1 = AntisymKernel::new(
            plain.base().clone().with_dy(1).unwrap(),
            Strategy::SlaterDeterminant,
        )
        .unwrap();
        assert_eq!(dy1.eval(&x, &y).unwrap(), plain.eval(&x, &y).unwrap());

        let b3 = KernelSpec::gaussian(0.7).unwrap().with_dy(3).unwrap();
        let k3 = AntisymKernel::new(b3, Strategy::SlaterDeterminant).unwrap();
        let dup = [0.1, 0.2, 0.3, 0.1, 0.2, 0.3];
        assert_eq!(k3.eval(&dup, &rv(&mut rng, 6)).unwrap(), 0.0);

        let b2 = KernelSpec::gaussian(0.7).unwrap().with_dy(2).unwrap();
        let fast = AntisymKernel::new(b2.clone(), Strategy::SlaterDeterminant).unwrap();
        for _ in 0..10 {
            let x = rv(&mut rng, 6);
            let y = rv(&mut rng, 6);
            let want = oracle_double_sum(&b2, &x, &y);
            let got = fast.eval(&x, &y).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs());
        }
        assert!(matches!(
            fast.eval(&[0.0; 5], &[0.0; 5]),
            Err(Error::NotDivisible { .. })
        ));
    }

    #[test]
    fn partial_derivative_vanishes_along_diagonal_direction() {
        let sigma = 0.5;
        let x = [0.3, 0.3];
        let y = [0.1, -0.4];
        let d0 = antisym_gauss_partial(sigma, &x, &y, 0, 1).unwrap();
        let d1 = antisym_gauss_partial(sigma, &x, &y, 1, 1).unwrap();
        assert!((d0 + d1).abs() <= 1e-15);
        assert!(antisym_gauss_partial(sigma, &x, &y, 0, 3).is_err());
    }

    #[test]
    fn slater_laplacian_matches_row_partials() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = gauss(0.4, Strategy::SlaterDeterminant);
        let naive = gauss(0.4, Strategy::NaiveSingleSum);
        for _ in 0..10 {
            let x = rv(&mut rng, 3);
            let y = rv(&mut rng, 3);
            let want: f64 = (0..3)
                .map(|l| antisym_gauss_partial(0.4, &x, &y, l, 2).unwrap())
                .sum();
            let got = k.laplacian(&x, &y).unwrap();
            let alt = naive.laplacian(&x, &y).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-8));
            assert!((alt - want).abs() <= 1e-10 * want.abs().max(1e-8));
        }
    }
}
