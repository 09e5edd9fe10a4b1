//! Gram matrices, kernel ridge regression, kernel PCA and empirical Mercer
//! features.

use nalgebra::{DMatrix, DVector};

use crate::combinatorics::Permutation;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::{fix_column_signs, sorted_symmetric_eigen};
use crate::par::{map_range, Exec};

/// Ridge used by the experiment drivers unless a config overrides it.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// Condition-number estimate above which an unregularized system is
/// reported as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Kernel evaluations `values[(i, j)] = k(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    /// Human-readable description of the kernel that produced the values.
    pub kernel: String,
}

impl GramMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Fills an `rows × cols` matrix from independent evaluations of `f`.
/// Rows are distributed over the pool; the result does not depend on `exec`.
pub fn gram_with<F>(exec: Exec, rows: usize, cols: usize, f: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let data = map_range(exec, rows, |i| {
        (0..cols).map(|j| f(i, j)).collect::<Vec<_>>()
    });
    DMatrix::from_fn(rows, cols, |i, j| data[i][j])
}

/// Square variant of [`gram_with`] for a symmetric `f`: evaluates the upper
/// triangle only and mirrors it, so the result is exactly symmetric.
pub fn gram_symmetric_with<F>(exec: Exec, n: usize, f: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let upper = map_range(exec, n, |i| (i..n).map(|j| f(i, j)).collect::<Vec<_>>());
    DMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            upper[i][j - i]
        } else {
            upper[j][i - j]
        }
    })
}

fn check_points<K: Kernel + ?Sized>(kernel: &K, pts: &[Vec<f64>], len: usize) -> Result<()> {
    for p in pts {
        if p.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: p.len(),
            });
        }
    }
    kernel.check_len(len)
}

fn point_len(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> usize {
    xs.first().or(ys.first()).map_or(0, Vec::len)
}

/// `G_ij = k(x_i, y_j)`.
pub fn gram<K: Kernel + ?Sized>(
    exec: Exec,
    kernel: &K,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> Result<GramMatrix> {
    let len = point_len(xs, ys);
    check_points(kernel, xs, len)?;
    check_points(kernel, ys, len)?;
    Ok(GramMatrix {
        values: gram_with(exec, xs.len(), ys.len(), |i, j| {
            kernel.value(&xs[i], &ys[j])
        }),
        kernel: kernel.describe(),
    })
}

/// `G_ij = k(x_i, x_j)`, exactly symmetric.
pub fn gram_square<K: Kernel + ?Sized>(
    exec: Exec,
    kernel: &K,
    xs: &[Vec<f64>],
) -> Result<GramMatrix> {
    check_points(kernel, xs, point_len(xs, xs))?;
    Ok(GramMatrix {
        values: gram_symmetric_with(exec, xs.len(), |i, j| kernel.value(&xs[i], &xs[j])),
        kernel: kernel.describe(),
    })
}

/// Solution `Θ` of `(K + λI) Θ = y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub coefficients: DVector<f64>,
    pub ridge: f64,
}

impl RegressionModel {
    /// `f(q_j) = Σ_i Θ_i k(x_i, q_j)` from the `train × query` cross Gram.
    pub fn predict(&self, cross: &DMatrix<f64>) -> Result<Vec<f64>> {
        if cross.nrows() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: cross.nrows(),
            });
        }
        Ok(cross.tr_mul(&self.coefficients).iter().copied().collect())
    }
}

pub fn krr_fit(k: &DMatrix<f64>, y: &[f64], ridge: f64) -> Result<RegressionModel> {
    let m = k.nrows();
    if k.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: k.ncols(),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    let mut a = k.clone();
    for i in 0..m {
        a[(i, i)] += ridge;
    }
    if ridge == 0.0 {
        let condition = condition_estimate(&a);
        if condition > SINGULAR_CONDITION {
            return Err(Error::Singular { condition });
        }
    }
    let rhs = DVector::from_column_slice(y);
    let coefficients = match a.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => a.lu().solve(&rhs).ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?,
    };
    Ok(RegressionModel {
        coefficients,
        ridge,
    })
}

/// `|λ|_max / |λ|_min` of a symmetric matrix.
fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Cross Gram between training and query points, then [`RegressionModel::predict`].
pub fn krr_predict<K: Kernel + ?Sized>(
    exec: Exec,
    model: &RegressionModel,
    kernel: &K,
    train: &[Vec<f64>],
    query: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let cross = gram(exec, kernel, train, query)?;
    model.predict(&cross.values)
}

/// Leading principal components of a kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KpcaResult {
    /// `m × n` scores; column `j` is `v_j √λ_j`.
    pub scores: DMatrix<f64>,
    /// Eigenvalues of the centered matrix, descending.
    pub eigenvalues: DVector<f64>,
}

/// Kernel PCA on a double-centered Gram matrix. Each score column is signed
/// so that its largest-magnitude entry is positive.
pub fn kpca(k: &DMatrix<f64>, n_components: usize) -> Result<KpcaResult> {
    let m = k.nrows();
    if k.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: k.ncols(),
        });
    }
    if n_components > m {
        return Err(Error::TooManyComponents {
            requested: n_components,
            available: m,
        });
    }
    let row_means: Vec<f64> = (0..m).map(|i| k.row(i).mean()).collect();
    let total = row_means.iter().sum::<f64>() / m as f64;
    let centered = DMatrix::from_fn(m, m, |i, j| k[(i, j)] - row_means[i] - row_means[j] + total);
    let (values, vectors) = sorted_symmetric_eigen(centered);
    let mut scores = DMatrix::from_fn(m, n_components, |i, j| {
        vectors[(i, j)] * values[j].max(0.0).sqrt()
    });
    fix_column_signs(&mut scores);
    Ok(KpcaResult {
        scores,
        eigenvalues: values.rows(0, n_components).into_owned(),
    })
}

/// Empirical eigenfunctions of the kernel integral operator, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MercerFeatures {
    /// Eigenvalues of `G/m`, descending.
    pub eigenvalues: DVector<f64>,
    /// `grid × n`; each column scaled to unit sup-norm over the grid.
    pub values: DMatrix<f64>,
}

/// Top-`n` eigenpairs `(λ_j, v_j)` of `G/m`, extended to the grid by
/// `φ_j(x) = Σ_i v_ij k(x_i, x) / (√m λ_j)` and rescaled to unit sup-norm.
/// The sign is chosen so that the first grid point of largest magnitude is
/// positive.
pub fn mercer_features<K: Kernel + ?Sized>(
    exec: Exec,
    kernel: &K,
    samples: &[Vec<f64>],
    grid: &[Vec<f64>],
    n: usize,
) -> Result<MercerFeatures> {
    let m = samples.len();
    if n > m {
        return Err(Error::TooManyComponents {
            requested: n,
            available: m,
        });
    }
    let g = gram_square(exec, kernel, samples)?.values / m as f64;
    let (values, vectors) = sorted_symmetric_eigen(g);
    let lmax = values.iter().copied().next().unwrap_or(0.0);
    let found = values
        .iter()
        .take_while(|&&v| v > 1e-12 * lmax && lmax > 0.0)
        .count();
    if found < n {
        return Err(Error::TooFewEigenpairs {
            requested: n,
            found,
        });
    }
    let cross = gram(exec, kernel, samples, grid)?.values;
    let mut features = cross.tr_mul(&vectors.columns(0, n));
    for (j, mut col) in features.column_iter_mut().enumerate() {
        col /= (m as f64).sqrt() * values[j];
        let mut pivot = 0.0f64;
        for &v in col.iter() {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot != 0.0 {
            col /= pivot;
        }
    }
    Ok(MercerFeatures {
        eigenvalues: values.rows(0, n).into_owned(),
        values: features,
    })
}

/// Training pairs followed by `(π(x_i), -y_i)` for a block transposition `π`.
pub fn augment_antisymmetric(
    xs: &[Vec<f64>],
    ys: &[f64],
    pi: &Permutation,
    dy: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if !pi.is_transposition() {
        return Err(Error::InvalidParameter(
            "augmentation requires a transposition".into(),
        ));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let mut out_x = xs.to_vec();
    for x in xs {
        out_x.push(pi.apply_blocks(x, dy)?);
    }
    let mut out_y = ys.to_vec();
    out_y.extend(ys.iter().map(|y| -y));
    Ok((out_x, out_y))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    (pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

pub fn mean_abs_error(pred: &[f64], truth: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n
}

/// Cell midpoints of a regular `n × n` grid over `[lo, hi]²`.
pub fn midpoint_grid(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let h = (hi - lo) / n as f64;
    (0..n)
        .flat_map(|i| {
            (0..n).map(move |j| vec![lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h])
        })
        .collect()
}
