//! Truncation sets of multi-indices labelling the wave-packet basis.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GwptError, Result};
use crate::types::Dim;

/// Which ball the truncation set is cut from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexNorm {
    /// Full tensor set `{k : |k|_∞ ≤ n}`.
    Linf,
    /// Total-degree set `{k : |k|_1 ≤ n}`.
    L1,
}

impl fmt::Display for IndexNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexNorm::Linf => "linf",
            IndexNorm::L1 => "l1",
        })
    }
}

impl FromStr for IndexNorm {
    type Err = GwptError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linf" | "inf" | "full" => Ok(IndexNorm::Linf),
            "l1" | "1" | "total" => Ok(IndexNorm::L1),
            other => Err(GwptError::InvalidArgument(format!("unknown index norm `{other}`"))),
        }
    }
}

/// Ordered set of multi-indices in graded-lexicographic order.
///
/// Indices are sorted by `|k|_1` first and lexicographically within a grade,
/// so the ground index `0` is always at position 0 and every decrement
/// `k − ⟨j⟩` of a stored index appears before `k`.
#[derive(Clone, Debug)]
pub struct MultiIndexSet {
    dim: usize,
    order: u32,
    norm: IndexNorm,
    flat: Vec<u32>,
    lookup: HashMap<Vec<u32>, usize>,
}

impl PartialEq for MultiIndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.norm == other.norm && self.flat == other.flat
    }
}

impl MultiIndexSet {
    pub fn new(dim: Dim, n: u32, norm: IndexNorm) -> Self {
        let d = dim.get();
        let max_grade = match norm {
            IndexNorm::L1 => n as usize,
            IndexNorm::Linf => n as usize * d,
        };
        let mut flat = Vec::new();
        let mut scratch = vec![0u32; d];
        for grade in 0..=max_grade {
            push_compositions(&mut scratch, 0, grade as u32, &mut |k| {
                if norm == IndexNorm::L1 || k.iter().all(|&ki| ki <= n) {
                    flat.extend_from_slice(k);
                }
            });
        }
        let lookup = flat.chunks_exact(d).enumerate().map(|(i, k)| (k.to_vec(), i)).collect();
        Self { dim: d, order: n, norm, flat, lookup }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The truncation parameter `n`.
    #[inline]
    pub fn order(&self) -> u32 {
        self.order
    }

    #[inline]
    pub fn norm(&self) -> IndexNorm {
        self.norm
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.flat.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[u32] {
        &self.flat[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.flat.chunks_exact(self.dim)
    }

    pub fn position(&self, k: &[u32]) -> Option<usize> {
        self.lookup.get(k).copied()
    }

    pub fn contains(&self, k: &[u32]) -> bool {
        self.lookup.contains_key(k)
    }

    /// Position of `k + ⟨j⟩`, if present.
    pub fn raised(&self, i: usize, j: usize) -> Option<usize> {
        let mut k = self.get(i).to_vec();
        k[j] += 1;
        self.position(&k)
    }

    /// Position of `k − ⟨j⟩`, or `None` when `k_j = 0` or the index is absent.
    pub fn lowered(&self, i: usize, j: usize) -> Option<usize> {
        let mut k = self.get(i).to_vec();
        if k[j] == 0 {
            return None;
        }
        k[j] -= 1;
        self.position(&k)
    }

    /// The same kind of set with the truncation parameter grown by `extra`.
    pub fn enlarged(&self, extra: u32) -> Self {
        Self::new(Dim::new(self.dim).expect("dim ≥ 1"), self.order + extra, self.norm)
    }
}

/// Visits every `k ∈ ℕ^d` with `|k|_1 = remaining` (restricted to positions
/// `pos..`) in lexicographic order.
fn push_compositions(k: &mut [u32], pos: usize, remaining: u32, visit: &mut impl FnMut(&[u32])) {
    let d = k.len();
    if pos == d - 1 {
        k[pos] = remaining;
        visit(k);
        return;
    }
    for first in 0..=remaining {
        k[pos] = first;
        push_compositions(k, pos + 1, remaining - first, visit);
    }
    k[pos] = 0;
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
