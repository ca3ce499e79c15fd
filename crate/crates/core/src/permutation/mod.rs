//! Permutations over intent ids and the generalized Mallows machinery built on
//! top of them.
//!
//! Intent ids are 0-based inside the crate. Everything that crosses a file or
//! command-line boundary goes through [`Permutation::to_one_based`] and
//! [`Permutation::from_one_based`].
//!
//! The inversion vector of a permutation stores, for each intent `k` except the
//! last, how many larger intents precede it. Component `k` therefore lives in
//! `0..=K-1-k` (0-based `k`).

mod mallows;
mod slice;

pub use mallows::{
    gmm0_log_density, gmm_log_pmf, log_psi, prior_inversion_mean, sample_inversion,
    slice_sample_rho, Dispersion, DispersionPrior,
};
pub use slice::{slice_sample, SliceConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PermutationError {
    #[error("not a permutation of 0..{len}: {order:?}")]
    NotAPermutation { order: Vec<usize>, len: usize },
    #[error("inversion component {component} = {value} exceeds its bound {bound}")]
    InversionOutOfBounds {
        component: usize,
        value: usize,
        bound: usize,
    },
    #[error("intent {intent} outside 0..{num_intents}")]
    IntentOutOfRange { intent: usize, num_intents: usize },
    #[error("permutation sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("dispersion must be positive, got {0}")]
    NonPositiveDispersion(f64),
}

/// An ordering of the intents `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, PermutationError> {
        let len = order.len();
        let mut seen = vec![false; len];
        for &x in &order {
            if x >= len || seen[x] {
                return Err(PermutationError::NotAPermutation { order, len });
            }
            seen[x] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(len: usize) -> Self {
        Self((0..len).collect())
    }

    /// Builds a permutation from the 1-based ids used in external formats.
    pub fn from_one_based(order: &[usize]) -> Result<Self, PermutationError> {
        let len = order.len();
        let zero_based = order
            .iter()
            .map(|&x| x.checked_sub(1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| PermutationError::NotAPermutation {
                order: order.to_vec(),
                len,
            })?;
        Self::new(zero_based)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&x| x + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// `positions()[x]` is the index at which intent `x` appears.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            pos[x] = i;
        }
        pos
    }

    /// Maps an ordering expressed in canonical ranks back to intent ids:
    /// position `i` of the result holds `self[ranks[i]]`.
    pub fn compose(&self, ranks: &Permutation) -> Permutation {
        debug_assert_eq!(self.len(), ranks.len());
        Permutation(ranks.0.iter().map(|&r| self.0[r]).collect())
    }

    /// Expresses `other` in the rank space of `self`: intent `x` is replaced
    /// by its position in `self`. Inverse of [`Permutation::compose`].
    pub fn relabel(&self, other: &Permutation) -> Permutation {
        debug_assert_eq!(self.len(), other.len());
        let pos = self.positions();
        Permutation(other.0.iter().map(|&x| pos[x]).collect())
    }

    pub fn to_inversion(&self) -> InversionVector {
        permutation_to_inversion(self)
    }
}

/// Inversion-count encoding of a permutation (the last, always-zero component
/// is not stored).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InversionVector(Vec<usize>);

impl InversionVector {
    pub fn new(components: Vec<usize>) -> Result<Self, PermutationError> {
        let num_intents = components.len() + 1;
        for (k, &v) in components.iter().enumerate() {
            let bound = num_intents - 1 - k;
            if v > bound {
                return Err(PermutationError::InversionOutOfBounds {
                    component: k,
                    value: v,
                    bound,
                });
            }
        }
        Ok(Self(components))
    }

    /// The encoding of the identity permutation of `num_intents` intents.
    pub fn zeros(num_intents: usize) -> Self {
        Self(vec![0; num_intents.saturating_sub(1)])
    }

    pub fn num_intents(&self) -> usize {
        self.0.len() + 1
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, k: usize) -> usize {
        self.0[k]
    }

    /// Overwrites one component, keeping the bound invariant.
    pub fn set(&mut self, k: usize, value: usize) -> Result<(), PermutationError> {
        let bound = self.num_intents() - 1 - k;
        if value > bound {
            return Err(PermutationError::InversionOutOfBounds {
                component: k,
                value,
                bound,
            });
        }
        self.0[k] = value;
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn to_permutation(&self) -> Permutation {
        inversion_to_permutation(self)
    }
}

pub fn permutation_to_inversion(p: &Permutation) -> InversionVector {
    let k_total = p.len();
    if k_total == 0 {
        return InversionVector(Vec::new());
    }
    let mut v = vec![0; k_total - 1];
    for (i, &x) in p.0.iter().enumerate() {
        if x + 1 == k_total {
            continue;
        }
        v[x] = p.0[..i].iter().filter(|&&y| y > x).count();
    }
    InversionVector(v)
}

/// Rebuilds the permutation by inserting intents from the largest down, each
/// at the index that leaves exactly `v[k]` larger intents in front of it.
pub fn inversion_to_permutation(v: &InversionVector) -> Permutation {
    let k_total = v.num_intents();
    let mut order = Vec::with_capacity(k_total);
    order.push(k_total - 1);
    for k in (0..k_total - 1).rev() {
        order.insert(v.0[k], k);
    }
    Permutation(order)
}

/// Arranges the bag `u` in the order given by `p`, equal labels contiguous.
pub fn compute_z(u: &[usize], p: &Permutation) -> Result<Vec<usize>, PermutationError> {
    let num_intents = p.len();
    let mut counts = vec![0usize; num_intents];
    for &x in u {
        if x >= num_intents {
            return Err(PermutationError::IntentOutOfRange {
                intent: x,
                num_intents,
            });
        }
        counts[x] += 1;
    }
    Ok(compute_z_from_counts(&counts, p))
}

/// Same as [`compute_z`] when the bag is already tallied per intent.
pub fn compute_z_from_counts(counts: &[usize], p: &Permutation) -> Vec<usize> {
    let mut z = Vec::with_capacity(counts.iter().sum());
    for &x in &p.0 {
        z.extend(std::iter::repeat_n(x, counts[x]));
    }
    z
}

/// Writes the [`compute_z_from_counts`] result into an existing buffer.
pub(crate) fn fill_z_from_counts(counts: &[usize], p: &Permutation, z: &mut Vec<usize>) {
    z.clear();
    for &x in &p.0 {
        z.extend(std::iter::repeat_n(x, counts[x]));
    }
}

/// Number of adjacent transpositions separating `a` from `b`.
pub fn kendall_distance(a: &Permutation, b: &Permutation) -> Result<usize, PermutationError> {
    if a.len() != b.len() {
        return Err(PermutationError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(b.relabel(a).to_inversion().total())
}

/// Kendall distance between two orderings of the same subset of intents.
///
/// Counts pairs whose relative order in `seq` disagrees with `reference`.
/// Elements of `seq` missing from `reference` are ignored.
pub(crate) fn partial_kendall_distance(seq: &[usize], reference: &[usize]) -> usize {
    let size = reference.iter().chain(seq).copied().max().map_or(0, |m| m + 1);
    let mut rank = vec![usize::MAX; size];
    for (i, &x) in reference.iter().enumerate() {
        rank[x] = i;
    }
    let ranks: Vec<usize> = seq
        .iter()
        .map(|&x| rank[x])
        .filter(|&r| r != usize::MAX)
        .collect();
    let mut inversions = 0;
    for i in 0..ranks.len() {
        for j in i + 1..ranks.len() {
            if ranks[i] > ranks[j] {
                inversions += 1;
            }
        }
    }
    inversions
}
