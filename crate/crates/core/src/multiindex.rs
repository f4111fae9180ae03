//! Multi-indices over ℕ₀^m and lower (downward-closed) sets of them.
//!
//! A [`LowerSet`] keeps its elements sorted in graded order: total degree
//! first, then larger leading exponents first, so `(1,0)` precedes `(0,1)`.
//! This fixes the column order of every Vandermonde matrix built from it.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of elements a generator may produce.
pub const DEFAULT_SIZE_CAP: usize = 1_000_000;

/// Exponent vector labelling a monomial `x^α` or a derivative `D^α`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit multi-index `e_axis` scaled by `order`.
    pub fn axis(dim: usize, axis: usize, order: u32) -> Self {
        let mut v = vec![0; dim];
        v[axis] = order;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Total degree `‖α‖₁`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_exponent(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `α! = α₁!·α₂!⋯α_m!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// Product order `self ⪯ other`.
    pub fn precedes(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `self - other` when `other ⪯ self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.precedes(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add_unit(&self, axis: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[axis] += 1;
        MultiIndex(v)
    }

    /// Immediate predecessors `α - e_j` for every axis with `α_j > 0`.
    pub fn predecessors(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.dim()).filter(|&j| self.0[j] > 0).map(move |j| {
            let mut v = self.0.clone();
            v[j] -= 1;
            MultiIndex(v)
        })
    }

    /// `x^α`, with `0^0 = 1`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl<const N: usize> From<[u32; N]> for MultiIndex {
    fn from(v: [u32; N]) -> Self {
        MultiIndex(v.to_vec())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
            .then_with(|| self.dim().cmp(&other.dim()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn check_dims(elements: &[MultiIndex]) -> Result<Option<usize>> {
    let Some(first) = elements.first() else {
        return Ok(None);
    };
    let m = first.dim();
    for e in elements {
        if e.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: e.dim(),
            });
        }
    }
    Ok(Some(m))
}

/// True iff `set` is non-empty and closed downward under the product order.
///
/// Checking the immediate predecessors of every element is enough: closure
/// under `α ↦ α - e_j` implies closure under `⪯` by induction on degree.
pub fn is_lower_set(set: &[MultiIndex]) -> Result<bool> {
    if check_dims(set)?.is_none() {
        return Ok(false);
    }
    let members: HashSet<&MultiIndex> = set.iter().collect();
    Ok(set
        .iter()
        .all(|a| a.predecessors().all(|p| members.contains(&p))))
}

/// Downward-closed, duplicate-free set of multi-indices of common dimension.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MultiIndex>", into = "Vec<MultiIndex>")]
pub struct LowerSet {
    dim: usize,
    elements: Vec<MultiIndex>,
}

impl LowerSet {
    /// Validates and canonicalises (sorts, removes duplicates).
    pub fn new(mut elements: Vec<MultiIndex>) -> Result<Self> {
        let dim = check_dims(&elements)?
            .ok_or_else(|| Error::NotLowerSet("a lower set must be non-empty".into()))?;
        elements.sort();
        elements.dedup();
        if !is_lower_set(&elements)? {
            let missing = first_missing_predecessor(&elements);
            return Err(Error::NotLowerSet(match missing {
                Some((a, p)) => format!("{a} is present but {p} is not"),
                None => "set is not downward closed".into(),
            }));
        }
        Ok(LowerSet { dim, elements })
    }

    /// Builds from elements already known to be a sorted lower set.
    pub(crate) fn from_sorted_unchecked(dim: usize, elements: Vec<MultiIndex>) -> Self {
        debug_assert!(elements.windows(2).all(|w| w[0] < w[1]));
        LowerSet { dim, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[MultiIndex] {
        &self.elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.elements.iter()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.index_of(alpha).is_some()
    }

    /// Position of `alpha` in canonical order, i.e. the column of `e_α`.
    pub fn index_of(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dim() != self.dim {
            return None;
        }
        self.elements.binary_search(alpha).ok()
    }

    /// Maximal elements: the Pareto front of the set.
    pub fn border(&self) -> Vec<MultiIndex> {
        self.elements
            .iter()
            .filter(|a| (0..self.dim).all(|j| !self.contains(&a.add_unit(j))))
            .cloned()
            .collect()
    }

    /// Minimal elements of the complement: every `α ∉ S` such that
    /// `S ∪ {α}` is again a lower set.
    pub fn cover(&self) -> Vec<MultiIndex> {
        let mut out: Vec<MultiIndex> = self
            .successors()
            .into_iter()
            .filter(|c| c.predecessors().all(|p| self.contains(&p)))
            .collect();
        out.sort();
        out
    }

    /// Every `α + e_j` outside the set, for `α` in the set.
    ///
    /// This is a superset of [`cover`](Self::cover); for a box it also
    /// contains the elements such as `(k+1, k)` that dominate a
    /// non-member.
    pub fn successors(&self) -> Vec<MultiIndex> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for a in &self.elements {
            for j in 0..self.dim {
                let s = a.add_unit(j);
                if !self.contains(&s) && seen.insert(s.clone()) {
                    out.push(s);
                }
            }
        }
        out.sort();
        out
    }

    /// Largest `‖α‖∞` in the set.
    pub fn max_exponent(&self) -> u32 {
        self.elements
            .iter()
            .map(MultiIndex::max_exponent)
            .max()
            .unwrap_or(0)
    }

    /// Largest `‖α‖₁` in the set.
    pub fn max_degree(&self) -> u32 {
        self.elements
            .iter()
            .map(MultiIndex::degree)
            .max()
            .unwrap_or(0)
    }

    /// Recognises the two standard shapes, for reporting.
    pub fn shape_name(&self) -> Option<String> {
        let k = self.max_exponent();
        let box_size = (k as u128 + 1).checked_pow(self.dim as u32);
        if box_size == Some(self.len() as u128) {
            return Some(format!("box({},{})", self.dim, k));
        }
        let d = self.max_degree();
        if binomial(self.dim as u128 + d as u128, self.dim as u128) == Some(self.len() as u128) {
            return Some(format!("simplex({},{})", self.dim, d));
        }
        None
    }
}

impl TryFrom<Vec<MultiIndex>> for LowerSet {
    type Error = Error;

    fn try_from(v: Vec<MultiIndex>) -> Result<Self> {
        LowerSet::new(v)
    }
}

impl From<LowerSet> for Vec<MultiIndex> {
    fn from(s: LowerSet) -> Self {
        s.elements
    }
}

impl fmt::Debug for LowerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.elements).finish()
    }
}

fn first_missing_predecessor(elements: &[MultiIndex]) -> Option<(MultiIndex, MultiIndex)> {
    let members: HashSet<&MultiIndex> = elements.iter().collect();
    elements.iter().find_map(|a| {
        a.predecessors()
            .find(|p| !members.contains(p))
            .map(|p| (a.clone(), p))
    })
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All `α` with `‖α‖∞ ≤ k`; `(k+1)^m` elements.
pub fn box_lower_set(m: usize, k: u32) -> Result<LowerSet> {
    box_lower_set_capped(m, k, DEFAULT_SIZE_CAP)
}

pub fn box_lower_set_capped(m: usize, k: u32, cap: usize) -> Result<LowerSet> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let requested = (k as u128 + 1).checked_pow(m as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::SizeCapExceeded { requested, cap });
    }
    let mut out = Vec::with_capacity(requested as usize);
    let mut cur = vec![0u32; m];
    loop {
        out.push(MultiIndex(cur.clone()));
        let mut axis = 0;
        loop {
            if axis == m {
                out.sort();
                return Ok(LowerSet::from_sorted_unchecked(m, out));
            }
            if cur[axis] < k {
                cur[axis] += 1;
                break;
            }
            cur[axis] = 0;
            axis += 1;
        }
    }
}

/// All `α` with `‖α‖₁ ≤ k`; `binomial(m+k, m)` elements.
pub fn simplex_lower_set(m: usize, k: u32) -> Result<LowerSet> {
    simplex_lower_set_capped(m, k, DEFAULT_SIZE_CAP)
}

pub fn simplex_lower_set_capped(m: usize, k: u32, cap: usize) -> Result<LowerSet> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let requested = binomial(m as u128 + k as u128, m as u128).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::SizeCapExceeded { requested, cap });
    }
    fn fill(prefix: &mut Vec<u32>, m: usize, budget: u32, out: &mut Vec<MultiIndex>) {
        if prefix.len() == m {
            out.push(MultiIndex(prefix.clone()));
            return;
        }
        for a in 0..=budget {
            prefix.push(a);
            fill(prefix, m, budget - a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(requested as usize);
    fill(&mut Vec::with_capacity(m), m, k, &mut out);
    out.sort();
    Ok(LowerSet::from_sorted_unchecked(m, out))
}
