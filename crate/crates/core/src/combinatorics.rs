//! Permutations with parity, integer partitions, and feature-space dimensions
//! of plain, antisymmetrized and symmetrized polynomial kernels.

use crate::error::{Error, Result};

/// Largest `d` for which the full symmetric group is ever enumerated.
pub const ENUMERATION_CAP: usize = 12;

/// A bijection on `0..d` together with its sign.
///
/// Indices are 0-based. Applied to a vector, `π(x)_i = x_{π(i)}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
    sign: i8,
}

impl Permutation {
    pub fn identity(d: usize) -> Self {
        Self {
            image: (0..d).collect(),
            sign: 1,
        }
    }

    /// The transposition swapping `i` and `j` in `0..d`.
    pub fn transposition(d: usize, i: usize, j: usize) -> Result<Self> {
        if i >= d || j >= d || i == j {
            return Err(Error::InvalidParameter(format!(
                "transposition ({i} {j}) is not valid on {d} elements"
            )));
        }
        let mut image: Vec<usize> = (0..d).collect();
        image.swap(i, j);
        Ok(Self { image, sign: -1 })
    }

    /// Builds a permutation from its image, validating bijectivity.
    pub fn from_image(image: Vec<usize>) -> Result<Self> {
        let d = image.len();
        let mut seen = vec![false; d];
        for &v in &image {
            if v >= d || seen[v] {
                return Err(Error::InvalidParameter(format!(
                    "{image:?} is not a permutation of 0..{d}"
                )));
            }
            seen[v] = true;
        }
        let sign = inversion_sign(&image);
        Ok(Self { image, sign })
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_transposition(&self) -> bool {
        self.image
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != v)
            .count()
            == 2
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Permutation {
            image: other.image.iter().map(|&i| self.image[i]).collect(),
            sign: self.sign * other.sign,
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut image = vec![0; self.len()];
        for (i, &v) in self.image.iter().enumerate() {
            image[v] = i;
        }
        Permutation {
            image,
            sign: self.sign,
        }
    }

    /// Returns `π(x)` with `π(x)_i = x_{π(i)}`.
    pub fn apply<T: Clone>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        Ok(self.image.iter().map(|&i| x[i].clone()).collect())
    }

    /// Permutes `x` as `len/dy` consecutive blocks of length `dy`.
    pub fn apply_blocks<T: Clone>(&self, x: &[T], dy: usize) -> Result<Vec<T>> {
        if dy == 0 || !x.len().is_multiple_of(dy) {
            return Err(Error::NotDivisible { len: x.len(), dy });
        }
        if x.len() / dy != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len() * dy,
                got: x.len(),
            });
        }
        Ok(self
            .image
            .iter()
            .flat_map(|&b| x[b * dy..(b + 1) * dy].iter().cloned())
            .collect())
    }
}

/// `(-1)^(number of inversions)`.
pub fn inversion_sign(image: &[usize]) -> i8 {
    let mut inversions = 0usize;
    for i in 0..image.len() {
        for j in i + 1..image.len() {
            if image[i] > image[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn check_cap(d: usize) -> Result<()> {
    if d > ENUMERATION_CAP {
        Err(Error::CapExceeded {
            dim: d,
            cap: ENUMERATION_CAP,
        })
    } else {
        Ok(())
    }
}

/// Lexicographic permutation walker that tracks the sign incrementally.
#[derive(Debug, Clone)]
struct LexWalker {
    image: Vec<usize>,
    sign: i8,
    started: bool,
    done: bool,
}

impl LexWalker {
    fn new(d: usize) -> Self {
        Self {
            image: (0..d).collect(),
            sign: 1,
            started: false,
            done: false,
        }
    }

    fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let a = &mut self.image;
        let n = a.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| a[i] < a[i + 1]) else {
            self.done = true;
            return false;
        };
        let j = (i + 1..n)
            .rev()
            .find(|&j| a[j] > a[i])
            .expect("pivot successor");
        a.swap(i, j);
        a[i + 1..].reverse();
        let swaps = 1 + (n - i - 1) / 2;
        if swaps % 2 == 1 {
            self.sign = -self.sign;
        }
        true
    }
}

/// Iterator over all `d!` permutations in lexicographic order.
#[derive(Debug, Clone)]
pub struct Permutations {
    walker: LexWalker,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        if self.walker.advance() {
            Some(Permutation {
                image: self.walker.image.clone(),
                sign: self.walker.sign,
            })
        } else {
            None
        }
    }
}

/// Lazily enumerates `S_d` in lexicographic order, identity first.
pub fn enumerate_permutations(d: usize) -> Result<Permutations> {
    if d == 0 {
        return Err(Error::InvalidParameter(
            "permutation size must be positive".into(),
        ));
    }
    check_cap(d)?;
    Ok(Permutations {
        walker: LexWalker::new(d),
    })
}

/// Allocation-free visitor over `S_d`; the callback receives the image and sign.
pub fn for_each_permutation<F: FnMut(&[usize], i8)>(d: usize, mut f: F) -> Result<()> {
    check_cap(d)?;
    let mut walker = LexWalker::new(d);
    while walker.advance() {
        f(&walker.image, walker.sign);
    }
    Ok(())
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc as u64
}

/// Dense table of `s_ℓ(n)`, the number of partitions of `n` into exactly `ℓ` parts.
#[derive(Debug, Clone)]
pub struct PartitionTable {
    max_parts: usize,
    max_total: usize,
    table: Vec<u64>,
}

impl PartitionTable {
    pub fn new(max_parts: usize, max_total: usize) -> Self {
        let width = max_total + 1;
        let mut table = vec![0u64; (max_parts + 1) * width];
        table[0] = 1;
        for l in 1..=max_parts {
            for n in 1..=max_total {
                let same_parts = if n >= l { table[l * width + n - l] } else { 0 };
                let fewer_parts = table[(l - 1) * width + n - 1];
                table[l * width + n] = same_parts + fewer_parts;
            }
        }
        Self {
            max_parts,
            max_total,
            table,
        }
    }

    /// `s_ℓ(n)`; arguments outside the table are zero only where the
    /// recurrence says so, so callers must size the table to cover them.
    pub fn get(&self, parts: usize, total: usize) -> u64 {
        assert!(
            parts <= self.max_parts && total <= self.max_total,
            "s_{parts}({total}) is outside the table"
        );
        self.table[parts * (self.max_total + 1) + total]
    }

    /// Number of partitions of `total` into at most `parts` parts.
    pub fn at_most(&self, parts: usize, total: usize) -> u64 {
        (0..=parts).map(|j| self.get(j, total)).sum()
    }
}

/// `s_ℓ(n)` via the recurrence `s_ℓ(n) = s_ℓ(n-ℓ) + s_{ℓ-1}(n-1)`.
pub fn partition_count(parts: usize, total: usize) -> u64 {
    PartitionTable::new(parts, total).get(parts, total)
}

/// A partition of `total` into positive, non-increasing parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::InvalidParameter(
                "partition parts must be positive".into(),
            ));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// Partitions of `total` into at most `max_parts` parts, largest first part first.
pub fn partitions_at_most(total: usize, max_parts: usize) -> Vec<Partition> {
    fn rec(
        rest: usize,
        cap: usize,
        slots: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Partition>,
    ) {
        if rest == 0 {
            out.push(Partition {
                parts: prefix.clone(),
            });
            return;
        }
        if slots == 0 {
            return;
        }
        for part in (1..=cap.min(rest)).rev() {
            prefix.push(part);
            rec(rest - part, part, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, total, max_parts, &mut Vec::new(), &mut out);
    out
}

/// Exponent vector `q` of a monomial `x^q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<usize>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<usize>) -> Self {
        Self { exponents }
    }

    pub fn exponents(&self) -> &[usize] {
        &self.exponents
    }

    pub fn degree(&self) -> usize {
        self.exponents.iter().sum()
    }
}

fn min_antisym_degree(d: usize) -> usize {
    d * (d - 1) / 2
}

/// `n_φ = C(p+d, d)`.
pub fn poly_feature_dim(d: usize, p: usize) -> u64 {
    binomial((p + d) as u64, d as u64)
}

/// Feature-space dimension of the antisymmetrized degree-`p` polynomial kernel.
pub fn antisym_feature_dim(d: usize, p: usize) -> u64 {
    let base = min_antisym_degree(d);
    if p < base {
        return 0;
    }
    let top = p - base;
    let table = PartitionTable::new(d, top);
    (0..=top).map(|pr| table.at_most(d, pr)).sum()
}

/// Feature-space dimension of the symmetrized degree-`p` polynomial kernel.
pub fn sym_feature_dim(d: usize, p: usize) -> u64 {
    let table = PartitionTable::new(d, p);
    (0..=p).map(|pr| table.at_most(d, pr)).sum()
}

/// Multi-indices `q = δ + μ` with `δ = (d-1, …, 0)` and `μ` a zero-padded
/// partition of `p_r ≤ p - C(d,2)`. Ordered by `p_r`, then by descending parts.
pub fn enumerate_antisym_multiindices(d: usize, p: usize) -> Vec<MultiIndex> {
    let base = min_antisym_degree(d);
    if d == 0 || p < base {
        return Vec::new();
    }
    let delta: Vec<usize> = (0..d).rev().collect();
    let mut out = Vec::new();
    for pr in 0..=p - base {
        for mu in partitions_at_most(pr, d) {
            let mut q = delta.clone();
            for (qi, &m) in q.iter_mut().zip(mu.parts()) {
                *qi += m;
            }
            out.push(MultiIndex::new(q));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn brute_partitions(total: usize, parts: usize) -> u64 {
        // non-increasing sequences of exactly `parts` positive integers
        fn rec(rest: usize, cap: usize, slots: usize) -> u64 {
            if slots == 0 {
                return (rest == 0) as u64;
            }
            (1..=cap.min(rest))
                .map(|p| rec(rest - p, p, slots - 1))
                .sum()
        }
        rec(total, total, parts)
    }

    #[test]
    fn s1_is_identity_only() {
        let all: Vec<_> = enumerate_permutations(1).unwrap().collect();
        assert_eq!(all, vec![Permutation::identity(1)]);
    }

    #[test]
    fn s2_has_identity_then_swap() {
        let all: Vec<_> = enumerate_permutations(2).unwrap().collect();
        assert_eq!(all.len(), 2);
        assert_eq!((all[0].image(), all[0].sign()), (&[0, 1][..], 1));
        assert_eq!((all[1].image(), all[1].sign()), (&[1, 0][..], -1));
    }

    #[test]
    fn s4_signs_match_inversion_count() {
        let all: Vec<_> = enumerate_permutations(4).unwrap().collect();
        assert_eq!(all.len(), 24);
        assert_eq!(all.iter().filter(|p| p.sign() == -1).count(), 12);
        let distinct: HashSet<_> = all.iter().map(|p| p.image().to_vec()).collect();
        assert_eq!(distinct.len(), 24);
        for p in &all {
            assert_eq!(p.sign(), inversion_sign(p.image()));
        }
    }

    #[test]
    fn signs_balanced_up_to_six() {
        for d in 2..=6 {
            let mut plus = 0;
            let mut minus = 0;
            for_each_permutation(d, |img, s| {
                assert_eq!(s, inversion_sign(img));
                if s > 0 {
                    plus += 1
                } else {
                    minus += 1
                }
            })
            .unwrap();
            assert_eq!(plus, factorial(d) / 2);
            assert_eq!(minus, factorial(d) / 2);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_permutations(13).unwrap_err();
        assert!(err.to_string().contains("12"), "{err}");
        assert!(enumerate_permutations(12).is_ok());
    }

    #[test]
    fn composition_multiplies_signs() {
        let perms: Vec<_> = enumerate_permutations(4).unwrap().collect();
        for a in perms.iter().step_by(5) {
            for b in &perms {
                let c = a.compose(b).unwrap();
                assert_eq!(c.sign(), a.sign() * b.sign());
                assert_eq!(c.sign(), inversion_sign(c.image()));
            }
        }
    }

    #[test]
    fn apply_and_blocks() {
        let p = Permutation::from_image(vec![2, 0, 1]).unwrap();
        assert_eq!(p.apply(&[10, 20, 30]).unwrap(), vec![30, 10, 20]);
        assert_eq!(
            p.apply_blocks(&[1, 2, 3, 4, 5, 6], 2).unwrap(),
            vec![5, 6, 1, 2, 3, 4]
        );
        assert!(p.apply_blocks(&[1, 2, 3, 4, 5], 2).is_err());
        let inv = p.inverse();
        assert_eq!(
            inv.apply(&p.apply(&[1, 2, 3]).unwrap()).unwrap(),
            vec![1, 2, 3]
        );
        assert!(Permutation::from_image(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn partition_count_examples() {
        assert_eq!(partition_count(0, 0), 1);
        assert_eq!(partition_count(3, 3), 1);
        assert_eq!(partition_count(2, 4), 2);
        assert_eq!(partition_count(0, 5), 0);
        assert_eq!(partition_count(4, 0), 0);
    }

    #[test]
    fn partition_count_matches_brute_force() {
        let table = PartitionTable::new(20, 20);
        for l in 0..=20 {
            for n in 0..=20 {
                let expected = if l == 0 {
                    (n == 0) as u64
                } else {
                    brute_partitions(n, l)
                };
                assert_eq!(table.get(l, n), expected, "s_{l}({n})");
            }
        }
    }

    #[test]
    fn feature_dim_examples() {
        assert_eq!(poly_feature_dim(2, 2), 6);
        assert_eq!(poly_feature_dim(4, 8), 495);
        assert_eq!(poly_feature_dim(1, 0), 1);
        assert_eq!(antisym_feature_dim(2, 2), 2);
        assert_eq!(antisym_feature_dim(3, 6), 7);
        assert_eq!(antisym_feature_dim(3, 2), 0);
        assert_eq!(sym_feature_dim(2, 2), 4);
        assert_eq!(sym_feature_dim(3, 8), 41);
        assert_eq!(sym_feature_dim(4, 2), 4);
    }

    #[test]
    fn multiindices_for_d3_p6() {
        let got: Vec<Vec<usize>> = enumerate_antisym_multiindices(3, 6)
            .into_iter()
            .map(|q| q.exponents().to_vec())
            .collect();
        let expected = vec![
            vec![2, 1, 0],
            vec![3, 1, 0],
            vec![4, 1, 0],
            vec![3, 2, 0],
            vec![5, 1, 0],
            vec![4, 2, 0],
            vec![3, 2, 1],
        ];
        assert_eq!(got, expected);
    }

    #[test]
    fn multiindex_small_cases() {
        let q = enumerate_antisym_multiindices(2, 1);
        assert_eq!(q, vec![MultiIndex::new(vec![1, 0])]);
        assert_eq!(enumerate_antisym_multiindices(2, 3).len(), 4);
        assert!(enumerate_antisym_multiindices(3, 2).is_empty());
    }

    #[test]
    fn multiindex_count_matches_dimension() {
        for d in 1..=4 {
            for p in 0..=8 {
                let qs = enumerate_antisym_multiindices(d, p);
                assert_eq!(qs.len() as u64, antisym_feature_dim(d, p), "d={d} p={p}");
                for q in &qs {
                    assert!(q.degree() <= p);
                    let distinct: HashSet<_> = q.exponents().iter().collect();
                    assert_eq!(distinct.len(), d, "exponents must be distinct: {q:?}");
                }
            }
        }
    }
}
