//! Experiment drivers behind the `permakernel` subcommands.
//!
//! Each driver reads its parameters from a JSON object, runs repetition `r`
//! with seed `seed + r`, and aggregates in repetition order so that the
//! report does not depend on the thread schedule.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::antisym::AntisymKernel;
use crate::combinatorics::{antisym_feature_dim, poly_feature_dim, sym_feature_dim, Permutation};
use crate::error::{Error, Result};
use crate::graphs::{
    are_isomorphic, graph_kernel, pad_graph, random_connected_graph, GraphFamily, LabeledGraph,
};
use crate::io::{load_molecule_corpus, KernelConfig, Molecule, Report, Symmetry, Table};
use crate::kernels::{Kernel, KernelSpec};
use crate::learn::{
    augment_antisymmetric, gram, gram_square, gram_symmetric_with, kpca, krr_fit, mean_abs_error,
    mercer_features, midpoint_grid, rmse, DEFAULT_RIDGE,
};
use crate::par::{map_range, try_map_range, Exec};
use crate::schrodinger::{box_analytic_eigenvalue, solve_box, PotentialKind, ProblemSpec};

pub const EXPERIMENTS: [&str; 7] = [
    "featdim",
    "kernel-eval",
    "regress-demo",
    "mercer",
    "schrodinger-box",
    "graph-kpca",
    "boiling-points",
];

pub fn run_experiment(name: &str, config: &serde_json::Value, exec: Exec) -> Result<Report> {
    match name {
        "featdim" => featdim(&parse(config)?),
        "kernel-eval" => kernel_eval(&parse(config)?),
        "regress-demo" => regress_demo(&parse(config)?, exec),
        "mercer" => mercer(&parse(config)?, exec),
        "schrodinger-box" => schrodinger_box(&parse(config)?, exec),
        "graph-kpca" => graph_kpca(&parse(config)?, exec),
        "boiling-points" => boiling_points(&parse(config)?, exec),
        other => Err(Error::UnknownExperiment(other.to_string())),
    }
}

fn parse<T: DeserializeOwned>(config: &serde_json::Value) -> Result<T> {
    Ok(serde_json::from_value(config.clone())?)
}

fn to_value<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).expect("configs serialize")
}

fn check_repetitions(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidParameter("repetitions must be ≥ 1".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Linear-interpolated quantile of unsorted data, `q ∈ [0, 1]`.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatdimConfig {
    pub d_min: usize,
    pub d_max: usize,
    pub p_min: usize,
    pub p_max: usize,
}

impl Default for FeatdimConfig {
    fn default() -> Self {
        Self {
            d_min: 2,
            d_max: 4,
            p_min: 2,
            p_max: 8,
        }
    }
}

/// Polynomial feature-space dimensions with and without (anti)symmetry.
pub fn featdim(cfg: &FeatdimConfig) -> Result<Report> {
    let mut report = Report::new("featdim", to_value(cfg));
    let mut t = Table::new("dims", &["d", "p", "n_phi", "n_phi_a", "n_phi_s"]);
    for d in cfg.d_min..=cfg.d_max {
        for p in cfg.p_min..=cfg.p_max {
            t.push(vec![
                d as f64,
                p as f64,
                poly_feature_dim(d, p) as f64,
                antisym_feature_dim(d, p) as f64,
                sym_feature_dim(d, p) as f64,
            ]);
        }
    }
    report.tables.push(t);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelEvalConfig {
    pub kernel: KernelConfig,
    /// Pairs `[x, y]` of equal-length points.
    pub pairs: Vec<[Vec<f64>; 2]>,
    #[serde(default)]
    pub laplacian: bool,
}

/// Evaluates a configured kernel (and optionally its Laplacian) on given pairs.
pub fn kernel_eval(cfg: &KernelEvalConfig) -> Result<Report> {
    let kernel = cfg.kernel.build()?;
    let mut report = Report::new("kernel-eval", to_value(cfg));
    let columns: &[&str] = if cfg.laplacian {
        &["pair", "value", "laplacian"]
    } else {
        &["pair", "value"]
    };
    let mut t = Table::new("values", columns);
    for (i, [x, y]) in cfg.pairs.iter().enumerate() {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        kernel.check_len(x.len())?;
        let mut row = vec![i as f64, kernel.value(x, y)];
        if cfg.laplacian {
            row.push(kernel.laplacian(x, y)?);
        }
        t.push(row);
    }
    report.tables.push(t);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressDemoConfig {
    pub sigma: f64,
    pub ms: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Cells per side of the evaluation grid over `[-1, 1]²`.
    pub grid: usize,
}

impl Default for RegressDemoConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            ms: vec![10, 20, 40, 60, 80, 100],
            repetitions: 200,
            seed: 0,
            lambda: DEFAULT_RIDGE,
            grid: 30,
        }
    }
}

/// `sin(π(x₁ - x₂))`
pub fn regress_target(x: &[f64]) -> f64 {
    (PI * (x[0] - x[1])).sin()
}

/// Grid RMSE of KRR with the plain Gaussian, the antisymmetric Gaussian and
/// the plain Gaussian on transposition-augmented data, for one sample size.
pub fn regress_demo_run(
    m: usize,
    sigma: f64,
    lambda: f64,
    grid: &[Vec<f64>],
    seed: u64,
) -> Result<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..m)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| regress_target(x)).collect();
    let truth: Vec<f64> = grid.iter().map(|x| regress_target(x)).collect();
    let plain = KernelSpec::gaussian(sigma)?;
    let anti = AntisymKernel::fastest(plain.clone());
    let swap = Permutation::transposition(2, 0, 1)?;
    let (aug_x, aug_y) = augment_antisymmetric(&xs, &ys, &swap, 1)?;

    let fit = |k: &dyn Kernel, xs: &[Vec<f64>], ys: &[f64]| -> Result<f64> {
        let model = krr_fit(&gram_square(Exec::Sequential, k, xs)?.values, ys, lambda)?;
        let pred = model.predict(&gram(Exec::Sequential, k, xs, grid)?.values)?;
        Ok(rmse(&pred, &truth))
    };
    Ok([
        fit(&plain, &xs, &ys)?,
        fit(&anti, &xs, &ys)?,
        fit(&plain, &aug_x, &aug_y)?,
    ])
}

pub fn regress_demo(cfg: &RegressDemoConfig, exec: Exec) -> Result<Report> {
    check_repetitions(cfg.repetitions)?;
    let grid = midpoint_grid(cfg.grid, -1.0, 1.0);
    let mut report = Report::new("regress-demo", to_value(cfg));
    let mut t = Table::new(
        "rmse",
        &[
            "m",
            "plain",
            "antisym",
            "augmented",
            "plain_std",
            "antisym_std",
            "augmented_std",
        ],
    );
    for &m in &cfg.ms {
        let runs = try_map_range(exec, cfg.repetitions, |r| {
            regress_demo_run(m, cfg.sigma, cfg.lambda, &grid, cfg.seed + r as u64)
        })?;
        let mut row = vec![m as f64];
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|c| runs.iter().map(|r| r[c]).collect())
            .collect();
        let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
        row.extend(&means);
        for (c, mu) in cols.iter().zip(&means) {
            row.push((c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / c.len() as f64).sqrt());
        }
        t.push(row);
    }
    report.tables.push(t);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MercerConfig {
    pub kernel: KernelConfig,
    #[serde(default = "default_mercer_m")]
    pub m: usize,
    #[serde(default = "default_mercer_n")]
    pub n_features: usize,
    /// Grid points per axis over `[lo, hi]^d`.
    #[serde(default = "default_mercer_grid")]
    pub grid: usize,
    #[serde(default = "default_mercer_d")]
    pub d: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mercer_m() -> usize {
    500
}
fn default_mercer_n() -> usize {
    4
}
fn default_mercer_grid() -> usize {
    50
}
fn default_mercer_d() -> usize {
    2
}
fn default_lo() -> f64 {
    -1.0
}
fn default_hi() -> f64 {
    1.0
}

/// Empirical Mercer features on a regular grid (for `d ≤ 2`).
pub fn mercer(cfg: &MercerConfig, exec: Exec) -> Result<Report> {
    if !(1..=2).contains(&cfg.d) {
        return Err(Error::InvalidParameter(
            "mercer grids support d = 1 or 2".into(),
        ));
    }
    let kernel = cfg.kernel.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<Vec<f64>> = (0..cfg.m)
        .map(|_| {
            (0..cfg.d)
                .map(|_| rng.random_range(cfg.lo..cfg.hi))
                .collect()
        })
        .collect();
    let axis: Vec<f64> = (0..cfg.grid)
        .map(|i| cfg.lo + (cfg.hi - cfg.lo) * i as f64 / (cfg.grid.max(2) - 1) as f64)
        .collect();
    let grid: Vec<Vec<f64>> = if cfg.d == 1 {
        axis.iter().map(|&a| vec![a]).collect()
    } else {
        axis.iter()
            .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
            .collect()
    };
    let features = mercer_features(exec, kernel.as_ref(), &samples, &grid, cfg.n_features)?;
    let mut report = Report::new("mercer", to_value(cfg));
    let mut columns: Vec<String> = (1..=cfg.d).map(|i| format!("x{i}")).collect();
    columns.extend((1..=cfg.n_features).map(|j| format!("phi_{j}")));
    let mut t = Table::new(
        "features",
        &columns.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    for (i, x) in grid.iter().enumerate() {
        let mut row = x.clone();
        row.extend(features.values.row(i).iter());
        t.push(row);
    }
    let mut ev = Table::new("eigenvalues", &["index", "eigenvalue"]);
    for (j, v) in features.eigenvalues.iter().enumerate() {
        ev.push(vec![(j + 1) as f64, *v]);
    }
    report.tables.push(t);
    report.tables.push(ev);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchrodingerConfig {
    #[serde(default = "unit")]
    pub hbar: f64,
    #[serde(default = "unit")]
    pub mass: f64,
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
    #[serde(default = "default_box_d")]
    pub d: usize,
    pub kernel: KernelConfig,
    #[serde(default = "default_m_interior")]
    pub m_interior: usize,
    #[serde(default = "default_m_boundary")]
    pub m_boundary: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub interaction: bool,
    #[serde(default)]
    pub potential: PotentialKind,
    #[serde(default = "default_n_eigs")]
    pub n_eigs: usize,
    /// Points per axis of the ψ̂ plotting grid (d = 2 only, first repetition).
    #[serde(default = "default_psi_grid")]
    pub psi_grid: usize,
}

fn unit() -> f64 {
    1.0
}
fn one() -> usize {
    1
}
fn default_length() -> f64 {
    PI
}
fn default_box_d() -> usize {
    2
}
fn default_m_interior() -> usize {
    900
}
fn default_m_boundary() -> usize {
    124
}
fn default_n_eigs() -> usize {
    3
}
fn default_psi_grid() -> usize {
    40
}

impl SchrodingerConfig {
    /// Two particles in `[0, π]` with the antisymmetric Gaussian, σ = 0.1.
    pub fn two_particle_box(m_interior: usize, seed: u64, repetitions: usize) -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            length: PI,
            d: 2,
            kernel: KernelConfig {
                base: KernelSpec::gaussian(0.1).expect("positive bandwidth"),
                symmetry: Symmetry::Antisymmetric,
                strategy: None,
            },
            m_interior,
            m_boundary: 124,
            seed,
            repetitions,
            interaction: false,
            potential: PotentialKind::Zero,
            n_eigs: 3,
            psi_grid: 0,
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec {
            hbar: self.hbar,
            mass: self.mass,
            length: self.length,
            dim: self.d,
            potential: self.potential.into(),
            interaction: self.interaction,
            kernel: self.kernel.build()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// The `n` lowest free-box energies of the symmetry sector of the kernel:
/// distinct levels for antisymmetric kernels, multisets for symmetric ones,
/// ordered tuples otherwise.
pub fn analytic_box_spectrum(cfg: &SchrodingerConfig, n: usize) -> Result<Vec<f64>> {
    let d = cfg.d;
    let max_level = (d + n + 2) as u32;
    let mut energies = Vec::new();
    let mut levels = vec![1u32; d];
    loop {
        let ok = match cfg.kernel.symmetry {
            Symmetry::Antisymmetric => levels.windows(2).all(|w| w[0] < w[1]),
            Symmetry::Symmetric => levels.windows(2).all(|w| w[0] <= w[1]),
            Symmetry::None => true,
        };
        if ok {
            energies.push(box_analytic_eigenvalue(
                &levels,
                cfg.hbar,
                cfg.mass,
                cfg.length,
                cfg.kernel.symmetry == Symmetry::Antisymmetric,
            )?);
        }
        // odometer over [1, max_level]^d
        let mut pos = 0;
        loop {
            if pos == d {
                energies.sort_by(f64::total_cmp);
                energies.truncate(n);
                return Ok(energies);
            }
            if levels[pos] < max_level {
                levels[pos] += 1;
                break;
            }
            levels[pos] = 1;
            pos += 1;
        }
    }
}

/// Eigenvalues of each repetition plus the mean absolute error against the
/// free-box spectrum (meaningful for `V = 0` without interaction).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary {
    pub eigenvalues: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub analytic: Vec<f64>,
    pub mean_eigenvalues: Vec<f64>,
    /// Mean over repetitions and eigenvalues of `|Ê - E|`.
    pub mean_abs_error: f64,
}

pub fn schrodinger_box_summary(
    cfg: &SchrodingerConfig,
    exec: Exec,
) -> Result<(BoxSummary, Option<crate::schrodinger::BoxSolution>)> {
    check_repetitions(cfg.repetitions)?;
    let problem = cfg.problem()?;
    let solutions = try_map_range(exec, cfg.repetitions, |r| {
        solve_box(
            exec,
            &problem,
            cfg.m_interior,
            cfg.m_boundary,
            cfg.seed + r as u64,
            cfg.n_eigs,
        )
    })?;
    let analytic = analytic_box_spectrum(cfg, cfg.n_eigs)?;
    let eigenvalues: Vec<Vec<f64>> = solutions
        .iter()
        .map(|s| s.solution.eigenvalues.clone())
        .collect();
    let residuals: Vec<Vec<f64>> = solutions
        .iter()
        .map(|s| s.solution.residuals.clone())
        .collect();
    let mean_eigenvalues: Vec<f64> = (0..cfg.n_eigs)
        .map(|j| mean(&eigenvalues.iter().map(|e| e[j]).collect::<Vec<_>>()))
        .collect();
    let errors: Vec<f64> = eigenvalues
        .iter()
        .flat_map(|e| e.iter().zip(&analytic).map(|(a, b)| (a - b).abs()))
        .collect();
    let first = solutions.into_iter().next();
    Ok((
        BoxSummary {
            eigenvalues,
            residuals,
            analytic,
            mean_eigenvalues,
            mean_abs_error: mean(&errors),
        },
        first,
    ))
}

pub fn schrodinger_box(cfg: &SchrodingerConfig, exec: Exec) -> Result<Report> {
    let (summary, first) = schrodinger_box_summary(cfg, exec)?;
    let mut report = Report::new("schrodinger-box", to_value(cfg));
    let mut columns = vec!["repetition".to_string(), "seed".to_string()];
    columns.extend((1..=cfg.n_eigs).map(|j| format!("E_{j}")));
    columns.extend((1..=cfg.n_eigs).map(|j| format!("residual_{j}")));
    let mut t = Table::new(
        "eigenvalues",
        &columns.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    for (r, (e, res)) in summary
        .eigenvalues
        .iter()
        .zip(&summary.residuals)
        .enumerate()
    {
        let mut row = vec![r as f64, (cfg.seed + r as u64) as f64];
        row.extend(e);
        row.extend(res);
        t.push(row);
    }
    report.tables.push(t);
    for (j, (m, a)) in summary
        .mean_eigenvalues
        .iter()
        .zip(&summary.analytic)
        .enumerate()
    {
        report.summary.insert(format!("mean_E_{}", j + 1), *m);
        report.summary.insert(format!("analytic_E_{}", j + 1), *a);
    }
    report
        .summary
        .insert("mean_abs_error".into(), summary.mean_abs_error);
    if cfg.potential != PotentialKind::Zero || cfg.interaction {
        report.notes.push(
            "analytic values are the free-box spectrum and do not include V or the interaction"
                .into(),
        );
    }
    if let (Some(sol), 2, true) = (first, cfg.d, cfg.psi_grid >= 2) {
        let mut columns = vec!["x1".to_string(), "x2".to_string()];
        columns.extend((1..=cfg.n_eigs).map(|j| format!("psi_{j}")));
        let mut psi = Table::new(
            "psi",
            &columns.iter().map(String::as_str).collect::<Vec<_>>(),
        );
        let n = cfg.psi_grid;
        for a in 0..n {
            for b in 0..n {
                let x = [
                    cfg.length * a as f64 / (n - 1) as f64,
                    cfg.length * b as f64 / (n - 1) as f64,
                ];
                let mut row = x.to_vec();
                row.extend((0..cfg.n_eigs).map(|j| sol.eval(j, &x)));
                psi.push(row);
            }
        }
        report.tables.push(psi);
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphKpcaConfig {
    pub n_graphs: usize,
    pub size: usize,
    pub sigma: f64,
    /// Number of graphs that receive an additional relabeled copy.
    pub planted_pairs: usize,
    pub extra_edge_prob: f64,
    pub n_components: usize,
    pub seed: u64,
}

impl Default for GraphKpcaConfig {
    fn default() -> Self {
        Self {
            n_graphs: 100,
            size: 5,
            sigma: 1.0,
            planted_pairs: 10,
            extra_edge_prob: 0.3,
            n_components: 2,
            seed: 0,
        }
    }
}

/// Random connected graphs; the last `planted_pairs` are relabeled copies of
/// the first ones. Returns the graphs and, per graph, the index of its
/// planted twin.
pub fn graph_kpca_corpus(cfg: &GraphKpcaConfig) -> Result<(Vec<LabeledGraph>, Vec<Option<usize>>)> {
    if cfg.planted_pairs * 2 > cfg.n_graphs {
        return Err(Error::InvalidParameter("too many planted pairs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fresh = cfg.n_graphs - cfg.planted_pairs;
    let mut graphs = Vec::with_capacity(cfg.n_graphs);
    for _ in 0..fresh {
        graphs.push(random_connected_graph(
            cfg.size,
            cfg.extra_edge_prob,
            &mut rng,
        )?);
    }
    let mut twins = vec![None; cfg.n_graphs];
    for p in 0..cfg.planted_pairs {
        let mut image: Vec<usize> = (0..cfg.size).collect();
        image.shuffle(&mut rng);
        graphs.push(graphs[p].relabeled(&Permutation::from_image(image)?)?);
        twins[p] = Some(fresh + p);
        twins[fresh + p] = Some(p);
    }
    Ok((graphs, twins))
}

pub fn graph_kpca(cfg: &GraphKpcaConfig, exec: Exec) -> Result<Report> {
    let (graphs, twins) = graph_kpca_corpus(cfg)?;
    let n = graphs.len();
    let values = try_gram_symmetric(exec, n, |i, j| {
        graph_kernel(&graphs[i], &graphs[j], cfg.sigma, GraphFamily::Gaussian)
    })?;
    let pca = kpca(&values, cfg.n_components)?;
    let iso = map_range(exec, n, |i| {
        (i + 1..n)
            .filter(|&j| are_isomorphic(&graphs[i], &graphs[j]).unwrap_or(false))
            .collect::<Vec<_>>()
    });
    let mut max_gap = 0.0f64;
    let mut iso_pairs = 0usize;
    for (i, js) in iso.iter().enumerate() {
        for &j in js {
            iso_pairs += 1;
            max_gap = max_gap.max((pca.scores[(i, 0)] - pca.scores[(j, 0)]).abs());
        }
    }
    let mut report = Report::new("graph-kpca", to_value(cfg));
    let mut columns = vec![
        "graph".to_string(),
        "planted_twin".to_string(),
        "edges".to_string(),
    ];
    columns.extend((1..=cfg.n_components).map(|j| format!("pc_{j}")));
    let mut t = Table::new(
        "scores",
        &columns.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    for i in 0..n {
        let mut row = vec![
            i as f64,
            twins[i].map_or(-1.0, |t| t as f64),
            graphs[i].edge_count() as f64,
        ];
        row.extend(pca.scores.row(i).iter());
        t.push(row);
    }
    report.tables.push(t);
    report
        .summary
        .insert("isomorphic_pairs".into(), iso_pairs as f64);
    report
        .summary
        .insert("max_isomorphic_pc1_gap".into(), max_gap);
    report
        .summary
        .insert("eigenvalue_1".into(), pca.eigenvalues[0]);
    Ok(report)
}

fn try_gram_symmetric<F>(exec: Exec, n: usize, f: F) -> Result<nalgebra::DMatrix<f64>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync + Send,
{
    let failed = std::sync::Mutex::new(None);
    let values = gram_symmetric_with(exec, n, |i, j| match f(i, j) {
        Ok(v) => v,
        Err(e) => {
            let mut slot = failed.lock().expect("lock");
            if slot.is_none() {
                *slot = Some(e);
            }
            f64::NAN
        }
    });
    match failed.into_inner().expect("lock") {
        Some(e) => Err(e),
        None => Ok(values),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BoilingConfig {
    /// Directory with `labels.csv` and graph files; the synthetic corpus is
    /// used when it is absent.
    pub data_dir: Option<PathBuf>,
    pub sigmas: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub lambda: f64,
    pub synthetic_size: usize,
}

impl Default for BoilingConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            sigmas: vec![0.25, 0.26, 0.27, 0.28, 2.5, 2.6, 2.7, 2.8],
            repetitions: 100,
            seed: 0,
            train_fraction: 0.9,
            lambda: DEFAULT_RIDGE,
            synthetic_size: 20,
        }
    }
}

/// Planted label of the synthetic corpus: `#C + 2·#O + 3·#S`.
pub fn synthetic_label(g: &LabeledGraph) -> f64 {
    g.labels()
        .iter()
        .map(|l| match l.as_str() {
            "C" => 1.0,
            "O" => 2.0,
            "S" => 3.0,
            _ => 0.0,
        })
        .sum()
}

/// Random acyclic "molecules" with 3 to 6 heavy atoms (C, O, S) labelled by
/// [`synthetic_label`], padded to the largest size in the set.
pub fn synthetic_molecules(n: usize, seed: u64) -> Result<Vec<Molecule>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(n);
    for _ in 0..n {
        let size = rng.random_range(3..=6);
        let tree = random_connected_graph(size, 0.0, &mut rng)?;
        let labels: Vec<String> = (0..size)
            .map(|_| {
                let u: f64 = rng.random();
                if u < 0.6 {
                    "C"
                } else if u < 0.85 {
                    "O"
                } else {
                    "S"
                }
                .to_string()
            })
            .collect();
        graphs.push(LabeledGraph::new(tree.adjacency().clone(), labels)?);
    }
    let d = graphs.iter().map(LabeledGraph::size).max().unwrap_or(1);
    graphs
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            Ok(Molecule {
                name: format!("synthetic-{i}"),
                boiling_point: synthetic_label(&g),
                graph: pad_graph(&g, d)?,
            })
        })
        .collect()
}

/// Test-set average error and RMSE per repetition for one bandwidth.
pub fn boiling_errors(
    molecules: &[Molecule],
    sigma: f64,
    cfg: &BoilingConfig,
    exec: Exec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = molecules.len();
    let n_train = ((n as f64) * cfg.train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidParameter(format!(
            "train fraction {} leaves an empty split of {n} samples",
            cfg.train_fraction
        )));
    }
    let k = try_gram_symmetric(exec, n, |i, j| {
        graph_kernel(
            &molecules[i].graph,
            &molecules[j].graph,
            sigma,
            GraphFamily::Laplacian,
        )
    })?;
    let runs = try_map_range(exec, cfg.repetitions, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + r as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (train, test) = order.split_at(n_train);
        let k_train = k.select_rows(train).select_columns(train);
        let y: Vec<f64> = train.iter().map(|&i| molecules[i].boiling_point).collect();
        let model = krr_fit(&k_train, &y, cfg.lambda)?;
        let cross = k.select_rows(train).select_columns(test);
        let pred = model.predict(&cross)?;
        let truth: Vec<f64> = test.iter().map(|&i| molecules[i].boiling_point).collect();
        Ok::<_, Error>((mean_abs_error(&pred, &truth), rmse(&pred, &truth)))
    })?;
    Ok(runs.into_iter().unzip())
}

pub fn boiling_points(cfg: &BoilingConfig, exec: Exec) -> Result<Report> {
    check_repetitions(cfg.repetitions)?;
    let mut report = Report::new("boiling-points", to_value(cfg));
    let molecules = match &cfg.data_dir {
        Some(dir) if dir.join("labels.csv").exists() => {
            report.summary.insert("synthetic".into(), 0.0);
            load_molecule_corpus(dir)?
        }
        _ => {
            report.notes.push(format!(
                "molecule corpus not found; using {} synthetic molecules labelled #C + 2#O + 3#S",
                cfg.synthetic_size
            ));
            report.summary.insert("synthetic".into(), 1.0);
            synthetic_molecules(cfg.synthetic_size, cfg.seed)?
        }
    };
    report
        .summary
        .insert("molecules".into(), molecules.len() as f64);
    let mut t = Table::new(
        "sigma_sweep",
        &[
            "sigma",
            "median_avg_error",
            "median_rmse",
            "p30_avg_error",
            "p70_avg_error",
            "p30_rmse",
            "p70_rmse",
        ],
    );
    let mut best: Option<(f64, f64, f64)> = None;
    for &sigma in &cfg.sigmas {
        let (avg, rms) = boiling_errors(&molecules, sigma, cfg, exec)?;
        let (ma, mr) = (median(&avg), median(&rms));
        t.push(vec![
            sigma,
            ma,
            mr,
            quantile(&avg, 0.3),
            quantile(&avg, 0.7),
            quantile(&rms, 0.3),
            quantile(&rms, 0.7),
        ]);
        if best.is_none_or(|(_, b, _)| ma < b) {
            best = Some((sigma, ma, mr));
        }
    }
    report.tables.push(t);
    if let Some((s, a, r)) = best {
        report.summary.insert("best_sigma".into(), s);
        report.summary.insert("best_median_avg_error".into(), a);
        report.summary.insert("best_median_rmse".into(), r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unknown_experiment() {
        assert!(matches!(
            run_experiment("nope", &json!({}), Exec::Sequential),
            Err(Error::UnknownExperiment(_))
        ));
    }

    #[test]
    fn featdim_table() {
        let r = run_experiment(
            "featdim",
            &json!({"d_min": 2, "d_max": 2, "p_min": 2, "p_max": 3}),
            Exec::Sequential,
        )
        .unwrap();
        let t = r.table("dims").unwrap();
        assert_eq!(
            t.rows,
            vec![
                vec![2.0, 2.0, 6.0, 2.0, 4.0],
                vec![2.0, 3.0, 10.0, 4.0, 6.0]
            ]
        );
    }

    #[test]
    fn kernel_eval_antisym() {
        let r = run_experiment(
            "kernel-eval",
            &json!({
                "kernel": {"family": "gaussian", "sigma": 1.0, "symmetry": "antisymmetric"},
                "pairs": [[[0.1, 0.5], [0.3, -0.2]], [[0.5, 0.1], [0.3, -0.2]], [[0.2, 0.2], [0.0, 1.0]]],
                "laplacian": true
            }),
            Exec::Sequential,
        )
        .unwrap();
        let v = r.table("values").unwrap().column("value").unwrap();
        assert!((v[0] + v[1]).abs() < 1e-15 && v[0] != 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.3), 3.0);
    }

    #[test]
    fn analytic_spectra() {
        let close = |a: Vec<f64>, b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        let mut cfg = SchrodingerConfig::two_particle_box(10, 0, 1);
        assert!(close(
            analytic_box_spectrum(&cfg, 3).unwrap(),
            [2.5, 5.0, 6.5]
        ));
        cfg.kernel.symmetry = Symmetry::Symmetric;
        assert!(close(
            analytic_box_spectrum(&cfg, 3).unwrap(),
            [1.0, 2.5, 4.0]
        ));
        cfg.kernel.symmetry = Symmetry::None;
        assert!(close(
            analytic_box_spectrum(&cfg, 3).unwrap(),
            [1.0, 2.5, 2.5]
        ));
    }

    #[test]
    fn regress_demo_is_reproducible() {
        let cfg = RegressDemoConfig {
            ms: vec![10],
            repetitions: 4,
            grid: 10,
            ..Default::default()
        };
        let a = regress_demo(&cfg, Exec::Parallel).unwrap();
        let b = regress_demo(&cfg, Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kpca_corpus_plants_twins() {
        let cfg = GraphKpcaConfig {
            n_graphs: 12,
            planted_pairs: 3,
            ..Default::default()
        };
        let (graphs, twins) = graph_kpca_corpus(&cfg).unwrap();
        assert_eq!(graphs.len(), 12);
        for (i, t) in twins.iter().enumerate() {
            if let Some(j) = t {
                assert!(are_isomorphic(&graphs[i], &graphs[*j]).unwrap());
            }
        }
    }

    #[test]
    fn synthetic_corpus_shape() {
        let mols = synthetic_molecules(20, 3).unwrap();
        assert_eq!(mols.len(), 20);
        let d = mols[0].graph.size();
        for m in &mols {
            assert_eq!(m.graph.size(), d);
            assert!((3..=6).contains(&m.graph.original_size()));
            assert_eq!(m.graph.edge_count(), m.graph.original_size() - 1);
            assert_eq!(m.boiling_point, synthetic_label(&m.graph));
        }
    }
}
