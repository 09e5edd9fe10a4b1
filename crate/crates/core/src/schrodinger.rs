//! Kernel collocation for the time-independent Schrödinger equation in a box
//! `[0, L]^d`.
//!
//! With `ψ̂ = Σ_j u_j k(x_j, ·)` the equation `Hψ = Eψ` collocated at the
//! sample points becomes `G10 u = Ê G00 u`. Dirichlet walls are imposed as
//! linear constraints `C u = 0` from kernel evaluations at boundary points.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::learn::{gram_square, gram_with, GramMatrix};
use crate::linalg::sorted_symmetric_eigen;
use crate::par::{map_range, Exec};

/// Relative rank tolerance for the constraint matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Eigenvalues of the projected `G00` below this fraction of the largest are
/// discarded.
pub const MASS_TRUNCATION: f64 = 1e-10;
/// Eigenvalues with `|Im| > IMAG_TOLERANCE·|Re|` are treated as spurious.
pub const IMAG_TOLERANCE: f64 = 1e-8;

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Interior and boundary collocation points.
pub type Samples = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// External potential `V(x)`; walls are handled by constraints, not by `V`.
#[derive(Clone, Default)]
pub enum Potential {
    #[default]
    Zero,
    /// `V(x) = ½ Σ x_i²`
    Harmonic,
    Custom(PotentialFn),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => f.write_str("Zero"),
            Potential::Harmonic => f.write_str("Harmonic"),
            Potential::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Serializable subset of [`Potential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    #[default]
    Zero,
    Harmonic,
}

impl From<PotentialKind> for Potential {
    fn from(kind: PotentialKind) -> Self {
        match kind {
            PotentialKind::Zero => Potential::Zero,
            PotentialKind::Harmonic => Potential::Harmonic,
        }
    }
}

impl Potential {
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Potential::Custom(f) => f(x),
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub hbar: f64,
    pub mass: f64,
    pub length: f64,
    /// Number of coordinates of a sample point.
    pub dim: usize,
    pub potential: Potential,
    /// Adds `Σ_{a≠b} 1/|x_a - x_b|` over ordered coordinate pairs.
    pub interaction: bool,
    pub kernel: Arc<dyn Kernel>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("hbar", &self.hbar)
            .field("mass", &self.mass)
            .field("length", &self.length)
            .field("dim", &self.dim)
            .field("potential", &self.potential)
            .field("interaction", &self.interaction)
            .field("kernel", &self.kernel.describe())
            .finish()
    }
}

impl ProblemSpec {
    /// Free particles in `[0, L]^dim` with `ħ = m = 1`.
    pub fn free_box(length: f64, dim: usize, kernel: Arc<dyn Kernel>) -> Result<Self> {
        let spec = Self {
            hbar: 1.0,
            mass: 1.0,
            length,
            dim,
            potential: Potential::Zero,
            interaction: false,
            kernel,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("length", self.length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        self.kernel.check_len(self.dim)
    }

    /// `V(x)` plus the interaction term; errors on coincident coordinates when
    /// the interaction is enabled. `index` is reported in the error.
    pub fn total_potential(&self, x: &[f64], index: usize) -> Result<f64> {
        let mut v = self.potential.at(x);
        if self.interaction {
            for a in 0..x.len() {
                for b in 0..x.len() {
                    if a != b {
                        let r = (x[a] - x[b]).abs();
                        if r == 0.0 {
                            return Err(Error::PotentialSingularity { index });
                        }
                        v += 1.0 / r;
                    }
                }
            }
        }
        if !v.is_finite() {
            return Err(Error::PotentialSingularity { index });
        }
        Ok(v)
    }
}

pub fn assemble_g00<K: Kernel + ?Sized>(
    exec: Exec,
    kernel: &K,
    points: &[Vec<f64>],
) -> Result<GramMatrix> {
    gram_square(exec, kernel, points)
}

/// `[G10]_ij = -ħ²/2m Δ_x k(x_i, x_j) + V(x_i) k(x_i, x_j)`.
pub fn assemble_g10(
    exec: Exec,
    problem: &ProblemSpec,
    points: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    problem.validate()?;
    for p in points {
        if p.len() != problem.dim {
            return Err(Error::DimensionMismatch {
                expected: problem.dim,
                got: p.len(),
            });
        }
    }
    let potentials: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| problem.total_potential(p, i))
        .collect::<Result<_>>()?;
    let n = points.len();
    let scale = -problem.hbar * problem.hbar / (2.0 * problem.mass);
    let kernel = problem.kernel.as_ref();
    let rows = map_range(exec, n, |i| {
        (0..n)
            .map(|j| {
                let lap = kernel.laplacian(&points[i], &points[j])?;
                let mut v = scale * lap;
                if potentials[i] != 0.0 {
                    v += potentials[i] * kernel.value(&points[i], &points[j]);
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `C_bj = k(x_j, boundary_b)`, so that `(C u)_b = ψ̂(boundary_b)`.
pub fn constraint_matrix<K: Kernel + ?Sized>(
    exec: Exec,
    kernel: &K,
    points: &[Vec<f64>],
    boundary: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    for p in points.iter().chain(boundary) {
        kernel.check_len(p.len())?;
    }
    Ok(gram_with(exec, boundary.len(), points.len(), |b, j| {
        kernel.value(&points[j], &boundary[b])
    }))
}

/// Generalized eigenpairs in ascending order of eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub eigenvalues: Vec<f64>,
    /// Coefficient vectors `u` of length `m`, one per eigenvalue.
    pub coefficients: Vec<DVector<f64>>,
    /// `‖Pᵀ(G10 u - Ê G00 u)‖ / ‖Pᵀ G10 u‖` with `P = Z W` the basis the
    /// pencil was actually solved in (null space, then truncated mass).
    pub residuals: Vec<f64>,
    /// Same with `P = Z` only; exceeds `residuals` when truncation is active.
    pub projected_residuals: Vec<f64>,
    /// Dimension of the constraint null space.
    pub null_space_dim: usize,
    /// Dimension kept after truncating the projected `G00`.
    pub retained_dim: usize,
}

/// Orthonormal basis of `{u : C u = 0}`.
pub fn null_space(c: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    if c.nrows() == 0 {
        return Ok(DMatrix::identity(m, m));
    }
    if c.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: c.ncols(),
        });
    }
    let svd = c.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > RANK_TOLERANCE * smax)
        .count();
    if rank >= m {
        return Err(Error::EmptyNullSpace);
    }
    if rank == 0 {
        return Ok(DMatrix::identity(m, m));
    }
    let mut rows = Vec::with_capacity(rank);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOLERANCE * smax {
            rows.push(i);
        }
    }
    // Householder QR of [V_r | I]: the leading r columns of Q span the row
    // space of C, the remaining m - r columns its orthogonal complement.
    let mut stacked = DMatrix::zeros(m, rank + m);
    for (k, &i) in rows.iter().enumerate() {
        stacked.column_mut(k).copy_from(&v_t.row(i).transpose());
    }
    stacked.view_mut((0, rank), (m, m)).fill_with_identity();
    let q = stacked.qr().q();
    Ok(q.columns(rank, m - rank).into_owned())
}

/// Solves `G10 u = Ê G00 u` subject to `C u = 0` for the `n_eigs` smallest
/// eigenvalues.
///
/// The pencil is projected onto the constraint null space `Z`; the projected
/// `G00` is then reduced to its eigenspace above `MASS_TRUNCATION·λ_max`,
/// which turns the pencil into a standard eigenproblem `M y = Ê y`.
pub fn solve_constrained_gevp(
    g10: &DMatrix<f64>,
    g00: &DMatrix<f64>,
    c: &DMatrix<f64>,
    n_eigs: usize,
) -> Result<EigenSolution> {
    let m = g00.nrows();
    for mat in [g10, g00] {
        if mat.nrows() != m || mat.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: mat.nrows(),
            });
        }
    }
    let z = null_space(c, m)?;
    let g10_is_symmetric = relative_asymmetry(g10) <= 1e-12;
    let a = z.tr_mul(&(g10 * &z));
    let mut b = z.tr_mul(&(g00 * &z));
    crate::linalg::symmetrize(&mut b);

    let (mass_values, mass_vectors) = sorted_symmetric_eigen(b);
    let lmax = mass_values.iter().copied().fold(0.0f64, f64::max);
    let kept = mass_values
        .iter()
        .take_while(|&&v| lmax > 0.0 && v > MASS_TRUNCATION * lmax)
        .count();
    if kept < n_eigs {
        return Err(Error::TooFewEigenpairs {
            requested: n_eigs,
            found: kept,
        });
    }
    // W = U Λ^{-1/2}; M = Wᵀ A W
    let mut w = mass_vectors.columns(0, kept).into_owned();
    for (j, mut col) in w.column_iter_mut().enumerate() {
        col /= mass_values[j].sqrt();
    }
    let mut reduced = w.tr_mul(&(&a * &w));

    let pairs = if g10_is_symmetric {
        crate::linalg::symmetrize(&mut reduced);
        smallest_symmetric_pairs(reduced, n_eigs)
    } else {
        smallest_general_pairs(&reduced, n_eigs)?
    };

    let zw = &z * &w;
    let mut solution = EigenSolution {
        eigenvalues: Vec::with_capacity(n_eigs),
        coefficients: Vec::with_capacity(n_eigs),
        residuals: Vec::with_capacity(n_eigs),
        projected_residuals: Vec::with_capacity(n_eigs),
        null_space_dim: z.ncols(),
        retained_dim: kept,
    };
    for (e, y) in pairs {
        let u = &zw * y;
        let lhs = g10 * &u;
        let diff = &lhs - g00 * &u * e;
        let ratio = |basis: &DMatrix<f64>| {
            let r = basis.tr_mul(&diff).norm();
            let scale = basis.tr_mul(&lhs).norm();
            if scale > 0.0 {
                r / scale
            } else {
                r
            }
        };
        solution.residuals.push(ratio(&zw));
        solution.projected_residuals.push(ratio(&z));
        solution.eigenvalues.push(e);
        solution.coefficients.push(u);
    }
    Ok(solution)
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

fn smallest_symmetric_pairs(m: DMatrix<f64>, n: usize) -> Vec<(f64, DVector<f64>)> {
    let (values, vectors) = sorted_symmetric_eigen(m);
    let k = values.len();
    (0..n)
        .map(|i| (values[k - 1 - i], vectors.column(k - 1 - i).into_owned()))
        .collect()
}

/// Real eigenvalues from the Schur form, eigenvectors by inverse iteration.
fn smallest_general_pairs(m: &DMatrix<f64>, n: usize) -> Result<Vec<(f64, DVector<f64>)>> {
    let eig = m.complex_eigenvalues();
    let mut real: Vec<f64> = eig
        .iter()
        .filter(|z| z.im.abs() <= IMAG_TOLERANCE * z.re.abs())
        .map(|z| z.re)
        .collect();
    real.sort_by(f64::total_cmp);
    if real.len() < n {
        return Err(Error::TooFewEigenpairs {
            requested: n,
            found: real.len(),
        });
    }
    let k = m.nrows();
    let mut pairs = Vec::with_capacity(n);
    for &e in &real[..n] {
        let shift = e + 1e-10 * e.abs().max(1.0);
        let lu = (m - DMatrix::identity(k, k) * shift).lu();
        let mut v = DVector::from_fn(k, |i, _| 1.0 / (1.0 + i as f64).sqrt());
        for _ in 0..4 {
            v = lu.solve(&v).ok_or(Error::Singular {
                condition: f64::INFINITY,
            })?;
            let norm = v.norm();
            v /= norm;
        }
        pairs.push((e, v));
    }
    Ok(pairs)
}

/// `ψ̂(x) = Σ_i u_i k(x_i, x)`.
pub fn eval_eigenfunction<K: Kernel + ?Sized>(
    kernel: &K,
    points: &[Vec<f64>],
    u: &DVector<f64>,
    x: &[f64],
) -> f64 {
    points
        .iter()
        .zip(u.iter())
        .map(|(p, ui)| ui * kernel.value(p, x))
        .sum()
}

/// A solved box problem: eigenpairs plus what is needed to evaluate `ψ̂`.
#[derive(Debug, Clone)]
pub struct BoxSolution {
    pub problem: ProblemSpec,
    pub interior: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
    pub solution: EigenSolution,
}

impl BoxSolution {
    pub fn eval(&self, index: usize, x: &[f64]) -> f64 {
        eval_eigenfunction(
            self.problem.kernel.as_ref(),
            &self.interior,
            &self.solution.coefficients[index],
            x,
        )
    }
}

/// Samples, assembles and solves in one go.
pub fn solve_box(
    exec: Exec,
    problem: &ProblemSpec,
    m_interior: usize,
    m_boundary: usize,
    seed: u64,
    n_eigs: usize,
) -> Result<BoxSolution> {
    let (interior, boundary) = sample_problem(problem, m_interior, m_boundary, seed)?;
    let g00 = assemble_g00(exec, problem.kernel.as_ref(), &interior)?.values;
    let g10 = assemble_g10(exec, problem, &interior)?;
    let c = constraint_matrix(exec, problem.kernel.as_ref(), &interior, &boundary)?;
    let solution = solve_constrained_gevp(&g10, &g00, &c, n_eigs)?;
    Ok(BoxSolution {
        problem: problem.clone(),
        interior,
        boundary,
        solution,
    })
}

/// `ħ²π² Σℓ² / (2 m L²)`. Repeated levels are rejected in the
/// antisymmetric sector, where such states vanish.
pub fn box_analytic_eigenvalue(
    levels: &[u32],
    hbar: f64,
    mass: f64,
    length: f64,
    antisymmetric: bool,
) -> Result<f64> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::InvalidParameter(
            "levels must be positive integers".into(),
        ));
    }
    if antisymmetric {
        let mut sorted = levels.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "levels {levels:?} repeat; such states are not antisymmetric"
            )));
        }
    }
    let sum: f64 = levels.iter().map(|&l| (l as f64).powi(2)).sum();
    Ok(hbar * hbar * std::f64::consts::PI.powi(2) * sum / (2.0 * mass * length * length))
}

/// Seeded uniform interior points and equidistant boundary points.
///
/// * `dim = 1`: the two endpoints, whatever `m_boundary` says.
/// * `dim = 2`: `m_boundary` points at equal arc length along the perimeter,
///   starting from the origin.
/// * `dim ≥ 3`: on each of the `2·dim` faces, the cell midpoints of a
///   `q^(dim-1)` lattice with `q = round((m_boundary / 2dim)^(1/(dim-1)))`.
///
/// Interior points are strictly inside the box; with the interaction
/// enabled, points with coincident coordinates are redrawn.
pub fn sample_problem(
    problem: &ProblemSpec,
    m_interior: usize,
    m_boundary: usize,
    seed: u64,
) -> Result<Samples> {
    if m_interior == 0 {
        return Err(Error::InvalidParameter(
            "need at least one interior point".into(),
        ));
    }
    let (l, d) = (problem.length, problem.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interior = Vec::with_capacity(m_interior);
    while interior.len() < m_interior {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..l)).collect();
        if p.iter().any(|&v| v <= 0.0) {
            continue;
        }
        if problem.interaction && (0..d).any(|a| (a + 1..d).any(|b| p[a] == p[b])) {
            continue;
        }
        interior.push(p);
    }
    Ok((interior, boundary_points(d, l, m_boundary)))
}

pub fn boundary_points(d: usize, l: f64, m_boundary: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![0.0], vec![l]],
        2 => {
            let step = 4.0 * l / m_boundary as f64;
            (0..m_boundary)
                .map(|k| {
                    let s = k as f64 * step;
                    let (side, t) = ((s / l).floor() as usize, s % l);
                    match side {
                        0 => vec![t, 0.0],
                        1 => vec![l, t],
                        2 => vec![l - t, l],
                        _ => vec![0.0, l - t],
                    }
                })
                .collect()
        }
        _ => {
            let per_face = m_boundary as f64 / (2 * d) as f64;
            let q = (per_face.powf(1.0 / (d - 1) as f64).round() as usize).max(1);
            let cells = q.pow((d - 1) as u32);
            let mut out = Vec::with_capacity(2 * d * cells);
            for axis in 0..d {
                for wall in [0.0, l] {
                    for c in 0..cells {
                        let mut rem = c;
                        let mut p = vec![0.0; d];
                        for (k, v) in p.iter_mut().enumerate() {
                            if k == axis {
                                *v = wall;
                            } else {
                                *v = (((rem % q) as f64) + 0.5) * l / q as f64;
                                rem /= q;
                            }
                        }
                        out.push(p);
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antisym::AntisymKernel;
    use crate::kernels::KernelSpec;
    use std::f64::consts::PI;

    fn gauss(sigma: f64) -> Arc<dyn Kernel> {
        Arc::new(KernelSpec::gaussian(sigma).unwrap())
    }

    fn antisym(sigma: f64) -> Arc<dyn Kernel> {
        Arc::new(AntisymKernel::fastest(KernelSpec::gaussian(sigma).unwrap()))
    }

    #[test]
    fn analytic_values() {
        assert_eq!(
            box_analytic_eigenvalue(&[1, 2], 1.0, 1.0, PI, true).unwrap(),
            2.5
        );
        assert_eq!(
            box_analytic_eigenvalue(&[1, 3], 1.0, 1.0, PI, true).unwrap(),
            5.0
        );
        assert_eq!(
            box_analytic_eigenvalue(&[1, 2, 3], 1.0, 1.0, PI, true).unwrap(),
            7.0
        );
        assert!(box_analytic_eigenvalue(&[2, 2], 1.0, 1.0, PI, true).is_err());
        assert_eq!(
            box_analytic_eigenvalue(&[2, 2], 1.0, 1.0, PI, false).unwrap(),
            4.0
        );
    }

    #[test]
    fn sampling() {
        let p = ProblemSpec::free_box(PI, 2, antisym(0.1)).unwrap();
        let (a, b) = sample_problem(&p, 50, 124, 9).unwrap();
        assert_eq!(
            (a.clone(), b.clone()),
            sample_problem(&p, 50, 124, 9).unwrap()
        );
        assert!(a.iter().flatten().all(|&v| v > 0.0 && v < PI));
        assert_eq!(b.len(), 124);
        for side in 0..4 {
            let count = b
                .iter()
                .filter(|q| match side {
                    0 => q[1] == 0.0 && q[0] < PI,
                    1 => q[0] == PI && q[1] < PI,
                    2 => q[1] == PI && q[0] > 0.0,
                    _ => q[0] == 0.0 && q[1] > 0.0,
                })
                .count();
            assert_eq!(count, 31);
        }
        let faces = boundary_points(3, 1.0, 600);
        assert_eq!(faces.len(), 600);
        assert_eq!(boundary_points(1, 2.0, 7), vec![vec![0.0], vec![2.0]]);
    }

    #[test]
    fn g10_entries() {
        let p = ProblemSpec::free_box(1.0, 1, gauss(0.5)).unwrap();
        let pts = vec![vec![0.2], vec![0.6]];
        let g10 = assemble_g10(Exec::Sequential, &p, &pts).unwrap();
        let spec = KernelSpec::gaussian(0.5).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(
                    g10[(i, j)],
                    -0.5 * spec.eval_d2(&pts[i], &pts[j], 0).unwrap()
                );
            }
        }
        let harmonic = ProblemSpec {
            potential: Potential::Harmonic,
            ..p.clone()
        };
        let pts0 = vec![vec![0.0], vec![0.6]];
        let a = assemble_g10(Exec::Sequential, &harmonic, &pts0).unwrap();
        let b = assemble_g10(Exec::Sequential, &p, &pts0).unwrap();
        assert_eq!(a.row(0), b.row(0));
        assert!(a.row(1) != b.row(1));
    }

    #[test]
    fn g10_matches_finite_difference_laplacian() {
        let p = ProblemSpec::free_box(1.0, 2, antisym(0.4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random(), rng.random()]).collect();
        let g10 = assemble_g10(Exec::Parallel, &p, &pts).unwrap();
        let h = 1e-4;
        for i in 0..6 {
            for j in 0..6 {
                let mut lap = 0.0;
                for l in 0..2 {
                    let (mut xp, mut xm) = (pts[i].clone(), pts[i].clone());
                    xp[l] += h;
                    xm[l] -= h;
                    lap += (p.kernel.value(&xp, &pts[j]) - 2.0 * p.kernel.value(&pts[i], &pts[j])
                        + p.kernel.value(&xm, &pts[j]))
                        / (h * h);
                }
                let fd = -0.5 * lap;
                assert!(
                    (g10[(i, j)] - fd).abs() <= 1e-4 * fd.abs().max(1e-3),
                    "{} vs {fd}",
                    g10[(i, j)]
                );
            }
        }
    }

    #[test]
    fn interaction_singularity() {
        let p = ProblemSpec {
            interaction: true,
            ..ProblemSpec::free_box(1.0, 2, antisym(0.4)).unwrap()
        };
        let err =
            assemble_g10(Exec::Sequential, &p, &[vec![0.1, 0.2], vec![0.3, 0.3]]).unwrap_err();
        assert!(matches!(err, Error::PotentialSingularity { index: 1 }));
        let ok = p.total_potential(&[0.1, 0.6], 0).unwrap();
        assert!((ok - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_identity_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random()]).collect();
        let g = assemble_g00(Exec::Sequential, &KernelSpec::gaussian(0.3).unwrap(), &pts)
            .unwrap()
            .values;
        let sol = solve_constrained_gevp(&g, &g, &DMatrix::zeros(0, 10), 3).unwrap();
        for e in sol.eigenvalues {
            assert!((e - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn constraints_fully_determined() {
        let c = DMatrix::identity(3, 3);
        let g = DMatrix::identity(3, 3);
        assert!(matches!(
            solve_constrained_gevp(&g, &g, &c, 1),
            Err(Error::EmptyNullSpace)
        ));
    }

    #[test]
    fn nonsymmetric_pencil_path() {
        // diagonal G00, upper-triangular G10: eigenvalues are the diagonal ratios
        let g00 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let g10 = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.5, 0.0, 2.0, 1.0, 0.0, 0.0, 20.0]);
        let sol = solve_constrained_gevp(&g10, &g00, &DMatrix::zeros(0, 3), 3).unwrap();
        let mut expected = [3.0, 1.0, 5.0];
        expected.sort_by(f64::total_cmp);
        for (e, x) in sol.eigenvalues.iter().zip(expected) {
            assert!((e - x).abs() < 1e-10);
        }
        for r in sol.residuals {
            assert!(r < 1e-8);
        }
    }

    #[test]
    fn one_dimensional_box_ground_state() {
        let p = ProblemSpec::free_box(PI, 1, gauss(0.1)).unwrap();
        let s = solve_box(Exec::Parallel, &p, 200, 2, 1, 2).unwrap();
        let e1 = s.solution.eigenvalues[0];
        assert!((e1 - 0.5).abs() <= 0.15 * 0.5, "E1 = {e1}");
        assert!(s.solution.eigenvalues[1] > e1);
        let peak = (1..100)
            .map(|i| s.eval(0, &[PI * i as f64 / 100.0]).abs())
            .fold(0.0, f64::max);
        for b in &s.boundary {
            assert!(s.eval(0, b).abs() <= 1e-6 * peak);
        }
        for r in &s.solution.residuals {
            assert!(
                *r <= 1e-6,
                "residuals {:?} kept {} of {}",
                s.solution.residuals,
                s.solution.retained_dim,
                s.solution.null_space_dim
            );
        }
    }
}
