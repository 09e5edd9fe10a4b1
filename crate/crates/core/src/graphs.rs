//! Permutation-invariant graph kernels through hyperpermanents.
//!
//! For graphs with adjacency matrices `A`, `A'` (padded to a common size `d`)
//! the symmetrized kernel is `hper(T) = Σ_π Π_i Π_j t_{i,j,π(i),π(j)}` where
//! `T` compares every edge slot of one graph with every edge slot of the
//! other. Four evaluation routes are provided; they agree exactly up to
//! rounding and exist mainly to cross-check each other.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{factorial, for_each_permutation, Permutation, ENUMERATION_CAP};
use crate::error::{Error, Result};

/// Label carried by artificial isolated nodes added by [`pad_graph`].
pub const PAD_LABEL: &str = "∅";

/// Default size cap for [`graph_kernel`]: the largest molecule in the
/// boiling-point corpus has 11 heavy atoms.
pub const GRAPH_CAP: usize = 11;

/// Undirected graph with real edge weights and one label per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    adjacency: DMatrix<f64>,
    labels: Vec<String>,
    original_size: usize,
}

impl LabeledGraph {
    pub fn new(adjacency: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: adjacency.ncols(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph must have at least one node".into(),
            ));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!("self loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(a >= 0.0 && a.is_finite()) || a != adjacency[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency must be symmetric and non-negative (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            adjacency,
            labels,
            original_size: n,
        })
    }

    /// Graph with unit-weight edges given as 0-based node pairs.
    pub fn from_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        let mut adjacency = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self loop at node {i}")));
            }
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
        Self::new(adjacency, labels)
    }

    /// Graph whose nodes all share the empty label.
    pub fn unlabeled(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(vec![String::new(); n], edges)
    }

    pub fn size(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Number of nodes before padding.
    pub fn original_size(&self) -> usize {
        self.original_size
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edge_count(&self) -> usize {
        let n = self.size();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] != 0.0)
            .count()
    }

    /// Node `i` of the result is node `ρ(i)` of `self`. Padded nodes become
    /// ordinary isolated nodes, so the result reports no padding.
    pub fn relabeled(&self, rho: &Permutation) -> Result<Self> {
        let n = self.size();
        if rho.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rho.len(),
            });
        }
        let img = rho.image();
        Ok(Self {
            adjacency: DMatrix::from_fn(n, n, |i, j| self.adjacency[(img[i], img[j])]),
            labels: img.iter().map(|&i| self.labels[i].clone()).collect(),
            original_size: n,
        })
    }
}

/// Appends isolated nodes labelled [`PAD_LABEL`] up to `d` nodes.
pub fn pad_graph(g: &LabeledGraph, d: usize) -> Result<LabeledGraph> {
    let n = g.size();
    if d < n {
        return Err(Error::PadTooSmall { size: n, target: d });
    }
    let mut adjacency = DMatrix::zeros(d, d);
    adjacency.view_mut((0, 0), (n, n)).copy_from(&g.adjacency);
    let mut labels = g.labels.clone();
    labels.resize(d, PAD_LABEL.to_string());
    Ok(LabeledGraph {
        adjacency,
        labels,
        original_size: g.original_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    Laplacian,
    Gaussian,
}

#[derive(Debug, Clone)]
struct GraphPair {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    same_label: DMatrix<bool>,
    family: GraphFamily,
    sigma: f64,
}

impl GraphPair {
    fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if i == j && k == l {
            if self.same_label[(i, k)] {
                1.0
            } else {
                self.compare(1.0)
            }
        } else {
            self.compare((self.a[(i, j)] - self.b[(k, l)]).abs())
        }
    }

    fn compare(&self, gap: f64) -> f64 {
        match self.family {
            GraphFamily::Laplacian => (-gap / self.sigma).exp(),
            GraphFamily::Gaussian => (-gap * gap / (2.0 * self.sigma * self.sigma)).exp(),
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Dense(Vec<f64>),
    Graphs(Box<GraphPair>),
}

/// Order-4 tensor `T ∈ R^{d×d×d×d}`; graph tensors are evaluated lazily.
///
/// Entries with exactly one of `i = j`, `k = l` never enter a
/// hyperpermanent. Graph tensors leave them undefined: reading one is a
/// debug assertion, and [`KernelTensor::to_dense`] stores them as NaN.
#[derive(Debug, Clone)]
pub struct KernelTensor {
    dim: usize,
    pairwise_symmetric: bool,
    source: Source,
}

impl KernelTensor {
    pub fn dense(dim: usize, data: Vec<f64>, pairwise_symmetric: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "tensor dimension must be positive".into(),
            ));
        }
        if data.len() != dim.pow(4) {
            return Err(Error::DimensionMismatch {
                expected: dim.pow(4),
                got: data.len(),
            });
        }
        Ok(Self {
            dim,
            pairwise_symmetric,
            source: Source::Dense(data),
        })
    }

    pub fn from_fn(
        dim: usize,
        pairwise_symmetric: bool,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dim.pow(4));
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self::dense(dim, data, pairwise_symmetric)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_pairwise_symmetric(&self) -> bool {
        self.pairwise_symmetric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match &self.source {
            Source::Dense(data) => data[((i * self.dim + j) * self.dim + k) * self.dim + l],
            Source::Graphs(pair) => {
                debug_assert!(
                    (i == j) == (k == l),
                    "tensor entry ({i},{j},{k},{l}) is undefined"
                );
                pair.entry(i, j, k, l)
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.source {
            Source::Dense(data) => data.clone(),
            Source::Graphs(pair) => {
                let d = self.dim;
                let mut out = Vec::with_capacity(d.pow(4));
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            for l in 0..d {
                                out.push(if (i == j) == (k == l) {
                                    pair.entry(i, j, k, l)
                                } else {
                                    f64::NAN
                                });
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

fn build_tensor(
    g: &LabeledGraph,
    h: &LabeledGraph,
    sigma: f64,
    family: GraphFamily,
) -> Result<KernelTensor> {
    if g.size() != h.size() {
        return Err(Error::DimensionMismatch {
            expected: g.size(),
            got: h.size(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {sigma}"
        )));
    }
    let d = g.size();
    let same_label = DMatrix::from_fn(d, d, |i, k| g.labels[i] == h.labels[k]);
    Ok(KernelTensor {
        dim: d,
        pairwise_symmetric: true,
        source: Source::Graphs(Box::new(GraphPair {
            a: g.adjacency.clone(),
            b: h.adjacency.clone(),
            same_label,
            family,
            sigma,
        })),
    })
}

/// `t_{i,j,k,l} = exp(-|a_ij - a'_kl| / σ)`; diagonal pairs compare labels:
/// 1 on a match, `exp(-1/σ)` otherwise.
pub fn build_laplacian_tensor(
    g: &LabeledGraph,
    h: &LabeledGraph,
    sigma: f64,
) -> Result<KernelTensor> {
    build_tensor(g, h, sigma, GraphFamily::Laplacian)
}

/// `t_{i,j,k,l} = exp(-(a_ij - a'_kl)² / 2σ²)`; diagonal pairs compare labels:
/// 1 on a match, `exp(-1/2σ²)` otherwise.
pub fn build_gaussian_tensor(
    g: &LabeledGraph,
    h: &LabeledGraph,
    sigma: f64,
) -> Result<KernelTensor> {
    build_tensor(g, h, sigma, GraphFamily::Gaussian)
}

/// Sum over all of `S_d` of the full double product.
pub fn hyperpermanent_naive(t: &KernelTensor) -> Result<f64> {
    let d = t.dim();
    let mut total = 0.0;
    for_each_permutation(d, |pi, _| {
        let mut prod = 1.0;
        for i in 0..d {
            for j in 0..d {
                prod *= t.get(i, j, pi[i], pi[j]);
            }
        }
        total += prod;
    })?;
    Ok(total)
}

/// Laplace expansion along the first index pair:
/// `hper(T) = Σ_μ t_{1,1,μ,μ} hper(T̂^(μ))`, where `T̂^(μ)` drops index 1 from
/// the first pair and `μ` from the second, after folding
/// `t_{i,1,k,μ} t_{1,i,μ,k}` into each remaining diagonal entry `t_{i,i,k,k}`.
pub fn hyperpermanent_laplace(t: &KernelTensor) -> Result<f64> {
    let d = t.dim();
    if d > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            dim: d,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(laplace(&t.to_dense(), d))
}

fn laplace(t: &[f64], n: usize) -> f64 {
    let at = |i: usize, j: usize, k: usize, l: usize| t[((i * n + j) * n + k) * n + l];
    if n == 1 {
        return at(0, 0, 0, 0);
    }
    let m = n - 1;
    let mut total = 0.0;
    let mut reduced = vec![0.0; m.pow(4)];
    for mu in 0..n {
        let head = at(0, 0, mu, mu);
        if head == 0.0 {
            continue;
        }
        // second-pair indices with μ removed
        let keep: Vec<usize> = (0..n).filter(|&k| k != mu).collect();
        let mut idx = 0;
        for i in 1..n {
            for j in 1..n {
                for &k in &keep {
                    for &l in &keep {
                        let mut v = at(i, j, k, l);
                        if i == j && k == l {
                            v *= at(i, 0, k, mu) * at(0, i, mu, k);
                        }
                        reduced[idx] = v;
                        idx += 1;
                    }
                }
            }
        }
        total += head * laplace(&reduced, m);
    }
    total
}

/// For `t_{ijkl} = t_{jikl} = t_{ijlk}`:
/// `hper(T) = Σ_π Π_i t_{i,i,π(i),π(i)} Π_{i<j} t_{i,j,π(i),π(j)}²`,
/// touching only the upper-triangular index pairs. Enumerated depth-first
/// with running prefix products.
pub fn hyperpermanent_pairwise_symmetric(t: &KernelTensor) -> Result<f64> {
    if !t.is_pairwise_symmetric() {
        return Err(Error::NotPairwiseSymmetric);
    }
    let d = t.dim();
    if d > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            dim: d,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(restricted_search(t, d).0)
}

/// Hyperpermanent result plus the number of permutations evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperpermanentReport {
    pub value: f64,
    pub permutations_visited: u64,
}

/// Pairwise-symmetric hyperpermanent for a tensor whose first graph was padded
/// from `original_size` nodes. Permutations of the padded nodes leave each
/// term unchanged, so only `π` with `π(d'+1) < … < π(d)` are visited and
/// weighted by `(d - d')!`.
pub fn hyperpermanent_isolated(t: &KernelTensor, original_size: usize) -> Result<f64> {
    hyperpermanent_isolated_report(t, original_size).map(|r| r.value)
}

pub fn hyperpermanent_isolated_report(
    t: &KernelTensor,
    original_size: usize,
) -> Result<HyperpermanentReport> {
    if !t.is_pairwise_symmetric() {
        return Err(Error::NotPairwiseSymmetric);
    }
    let d = t.dim();
    if original_size == 0 || original_size > d {
        return Err(Error::InvalidParameter(format!(
            "original size {original_size} must lie in 1..={d}"
        )));
    }
    if original_size > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            dim: original_size,
            cap: ENUMERATION_CAP,
        });
    }
    let (sum, visited) = restricted_search(t, original_size);
    Ok(HyperpermanentReport {
        value: factorial(d - original_size) as f64 * sum,
        permutations_visited: visited,
    })
}

/// Depth-first over ordered images of the first `free` indices; the rest are
/// filled with the unused images in ascending order.
fn restricted_search(t: &KernelTensor, free: usize) -> (f64, u64) {
    struct Search<'a> {
        t: &'a KernelTensor,
        d: usize,
        free: usize,
        image: Vec<usize>,
        used: Vec<bool>,
        total: f64,
        visited: u64,
    }

    impl Search<'_> {
        fn factor(&self, depth: usize, v: usize) -> f64 {
            let mut f = self.t.get(depth, depth, v, v);
            for s in 0..depth {
                let w = self.t.get(s, depth, self.image[s], v);
                f *= w * w;
            }
            f
        }

        fn descend(&mut self, depth: usize, partial: f64) {
            if depth == self.free {
                let mut prod = partial;
                let mut next = 0;
                for pos in self.free..self.d {
                    while self.used[next] {
                        next += 1;
                    }
                    prod *= self.factor(pos, next);
                    self.image[pos] = next;
                    next += 1;
                }
                self.total += prod;
                self.visited += 1;
                return;
            }
            for v in 0..self.d {
                if self.used[v] {
                    continue;
                }
                let f = self.factor(depth, v);
                self.used[v] = true;
                self.image[depth] = v;
                self.descend(depth + 1, partial * f);
                self.used[v] = false;
            }
        }
    }

    let d = t.dim();
    let mut search = Search {
        t,
        d,
        free,
        image: vec![0; d],
        used: vec![false; d],
        total: 0.0,
        visited: 0,
    };
    search.descend(0, 1.0);
    (search.total, search.visited)
}

/// Symmetrized graph kernel `k_s(G, G')`.
///
/// Both graphs are padded to their common size. The restricted enumeration
/// runs over the graph with fewer original nodes; the hyperpermanent is
/// unchanged when the roles of the two graphs are swapped.
pub fn graph_kernel(
    g: &LabeledGraph,
    h: &LabeledGraph,
    sigma: f64,
    family: GraphFamily,
) -> Result<f64> {
    let d = g.size().max(h.size());
    if d > GRAPH_CAP {
        return Err(Error::CapExceeded {
            dim: d,
            cap: GRAPH_CAP,
        });
    }
    let (g, h) = (pad_graph(g, d)?, pad_graph(h, d)?);
    let (first, second) = if h.original_size() < g.original_size() {
        (&h, &g)
    } else {
        (&g, &h)
    };
    let t = build_tensor(first, second, sigma, family)?;
    if first.original_size() < d {
        hyperpermanent_isolated(&t, first.original_size())
    } else {
        hyperpermanent_pairwise_symmetric(&t)
    }
}

/// Brute-force isomorphism test (labels and weights must match).
pub fn are_isomorphic(g: &LabeledGraph, h: &LabeledGraph) -> Result<bool> {
    let n = g.size();
    if n != h.size() {
        return Ok(false);
    }
    let mut found = false;
    for_each_permutation(n, |pi, _| {
        if found {
            return;
        }
        found = (0..n).all(|i| {
            g.labels[pi[i]] == h.labels[i]
                && (0..n).all(|j| g.adjacency[(pi[i], pi[j])] == h.adjacency[(i, j)])
        });
    })?;
    Ok(found)
}

/// Random connected unlabeled graph: a random spanning tree plus each
/// remaining edge independently with probability `extra_edge_prob`.
pub fn random_connected_graph(
    n: usize,
    extra_edge_prob: f64,
    rng: &mut impl Rng,
) -> Result<LabeledGraph> {
    let mut edges = Vec::new();
    let mut present = DMatrix::from_element(n, n, false);
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
        present[(u, v)] = true;
    }
    for i in 0..n {
        for j in i + 1..n {
            if !present[(i, j)] && rng.random_bool(extra_edge_prob) {
                edges.push((i, j));
            }
        }
    }
    LabeledGraph::unlabeled(n, &edges)
}
