//! Sensor point sets and their relabeling onto lower sets.
//!
//! A relabeling replaces the distinct coordinate values on each axis by the
//! integers `0..k_j`, independently per axis. When the image of the sensor
//! set is a lower set `L`, the Vandermonde matrix `V(X, L)` is invertible.
//!
//! An axis may also be *collapsed* (every value sent to 0) provided the
//! remaining axes still separate the points; this yields the one-directional
//! lower sets available for, e.g., points on a diagonal.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{LowerSet, MultiIndex};

/// Relative tolerance under which two coordinate values are the same.
pub const COORD_TOLERANCE: f64 = 1e-9;

/// Upper bound on the number of per-axis orderings tried exhaustively.
pub const EXHAUSTIVE_LIMIT: u128 = 100_000;

pub fn coords_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= COORD_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Ordered sensor locations in ℝ^m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    /// Validates a common dimension and finite coordinates.
    ///
    /// Distinctness is checked separately by [`check_distinct`](Self::check_distinct)
    /// so that degenerate placements can still be analysed numerically.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("point set must be non-empty".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "points must have dimension ≥ 1".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(PointSet { dim, points })
    }

    /// Like [`new`](Self::new) but also rejects repeated points.
    pub fn distinct(points: Vec<Vec<f64>>) -> Result<Self> {
        let set = Self::new(points)?;
        set.check_distinct()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(Vec::as_slice)
    }

    pub fn check_distinct(&self) -> Result<()> {
        for i in 0..self.len() {
            for j in 0..i {
                if self.points[i]
                    .iter()
                    .zip(&self.points[j])
                    .all(|(&a, &b)| coords_equal(a, b))
                {
                    return Err(Error::DuplicatePoints {
                        first: j,
                        second: i,
                    });
                }
            }
        }
        Ok(())
    }

    /// Points translated by `-shift`.
    pub fn shifted(&self, shift: &[f64]) -> Result<PointSet> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        Ok(PointSet {
            dim: self.dim,
            points: self
                .points
                .iter()
                .map(|p| p.iter().zip(shift).map(|(a, b)| a - b).collect())
                .collect(),
        })
    }

    /// Per-axis `(min, max)` of the coordinates.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|j| {
                self.points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[j]), hi.max(p[j]))
                    })
            })
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for PointSet {
    type Error = Error;

    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        PointSet::new(v)
    }
}

impl From<PointSet> for Vec<Vec<f64>> {
    fn from(p: PointSet) -> Self {
        p.points
    }
}

/// How one axis is relabeled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMap {
    /// `values[i]` is the coordinate value sent to index `i`.
    Values(Vec<f64>),
    /// Every value on this axis is sent to 0.
    Collapsed,
}

/// Independent per-axis relabeling of coordinate values onto integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relabeling {
    pub per_axis_maps: Vec<AxisMap>,
}

impl Relabeling {
    fn validate(&self) -> Result<()> {
        for (j, axis) in self.per_axis_maps.iter().enumerate() {
            if let AxisMap::Values(values) = axis {
                for a in 0..values.len() {
                    for b in 0..a {
                        if coords_equal(values[a], values[b]) {
                            return Err(Error::Relabeling(format!(
                                "axis {j}: value {} is mapped to both {b} and {a}",
                                values[a]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn index_on_axis(&self, axis: usize, value: f64) -> Result<u32> {
        match &self.per_axis_maps[axis] {
            AxisMap::Collapsed => Ok(0),
            AxisMap::Values(values) => values
                .iter()
                .position(|&v| coords_equal(v, value))
                .map(|i| i as u32)
                .ok_or_else(|| {
                    Error::Relabeling(format!("axis {axis}: value {value} is not covered"))
                }),
        }
    }
}

/// Image of `x` under the coordinatewise relabeling `r`, in point order.
pub fn relabel(x: &PointSet, r: &Relabeling) -> Result<Vec<MultiIndex>> {
    if r.per_axis_maps.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: r.per_axis_maps.len(),
        });
    }
    r.validate()?;
    x.iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(j, &v)| r.index_on_axis(j, v))
                .collect::<Result<Vec<u32>>>()
                .map(MultiIndex::new)
        })
        .collect()
}

/// Distinct values on one axis, with the cluster id of every point.
#[derive(Debug)]
struct AxisClusters {
    values: Vec<f64>,
    multiplicity: Vec<usize>,
    of_point: Vec<usize>,
}

impl AxisClusters {
    fn new(x: &PointSet, axis: usize) -> Self {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x.point(a)[axis].total_cmp(&x.point(b)[axis]));
        let mut values: Vec<f64> = Vec::new();
        let mut multiplicity = Vec::new();
        let mut of_point = vec![0; x.len()];
        for i in order {
            let v = x.point(i)[axis];
            match values.last() {
                Some(&rep) if coords_equal(rep, v) => {}
                _ => {
                    values.push(v);
                    multiplicity.push(0);
                }
            }
            let id = values.len() - 1;
            multiplicity[id] += 1;
            of_point[i] = id;
        }
        AxisClusters {
            values,
            multiplicity,
            of_point,
        }
    }

    fn count(&self) -> usize {
        self.values.len()
    }

    /// Clusters by non-increasing multiplicity, ties by ascending value.
    fn greedy_order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.count()).collect();
        ids.sort_by(|&a, &b| {
            self.multiplicity[b]
                .cmp(&self.multiplicity[a])
                .then(self.values[a].total_cmp(&self.values[b]))
        });
        ids
    }
}

/// Per-axis assignment: `None` for a collapsed axis, otherwise `order[i]`
/// is the cluster sent to index `i`.
type Assignment = Vec<Option<Vec<usize>>>;

fn image(clusters: &[AxisClusters], assignment: &Assignment, p: usize) -> Vec<MultiIndex> {
    let ranks: Vec<Option<Vec<u32>>> = assignment
        .iter()
        .map(|a| {
            a.as_ref().map(|order| {
                let mut rank = vec![0u32; order.len()];
                for (idx, &cluster) in order.iter().enumerate() {
                    rank[cluster] = idx as u32;
                }
                rank
            })
        })
        .collect();
    (0..p)
        .map(|i| {
            MultiIndex::new(
                clusters
                    .iter()
                    .zip(&ranks)
                    .map(|(c, r)| r.as_ref().map_or(0, |r| r[c.of_point[i]]))
                    .collect(),
            )
        })
        .collect()
}

fn lower_image(
    clusters: &[AxisClusters],
    assignment: &Assignment,
    p: usize,
) -> Option<Vec<MultiIndex>> {
    let mut img = image(clusters, assignment, p);
    img.sort();
    img.dedup();
    if img.len() != p {
        return None;
    }
    crate::multiindex::is_lower_set(&img)
        .ok()
        .filter(|&ok| ok)
        .map(|_| img)
}

fn to_relabeling(clusters: &[AxisClusters], assignment: &Assignment) -> Relabeling {
    Relabeling {
        per_axis_maps: clusters
            .iter()
            .zip(assignment)
            .map(|(c, a)| match a {
                None => AxisMap::Collapsed,
                Some(order) => AxisMap::Values(order.iter().map(|&id| c.values[id]).collect()),
            })
            .collect(),
    }
}

fn projection_injective(clusters: &[AxisClusters], kept: &[bool], p: usize) -> bool {
    let mut seen = HashSet::with_capacity(p);
    (0..p).all(|i| {
        let key: Vec<usize> = clusters
            .iter()
            .zip(kept)
            .filter(|(_, &k)| k)
            .map(|(c, _)| c.of_point[i])
            .collect();
        seen.insert(key)
    })
}

fn factorial_u128(n: usize) -> u128 {
    (1..=n as u128)
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .unwrap_or(u128::MAX)
}

/// The `index`-th permutation of `0..n` in Lehmer-code order.
fn nth_permutation(n: usize, mut index: u128) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for k in (1..=n).rev() {
        let f = factorial_u128(k - 1);
        let pos = (index / f) as usize;
        index %= f;
        out.push(pool.remove(pos));
    }
    out
}

fn lex_less(a: &[MultiIndex], b: &[MultiIndex]) -> bool {
    a < b
}

/// Searches for a relabeling of `x` onto a lower set.
///
/// Each subset of axes that can be collapsed without merging points is
/// tried. Within a subset the greedy multiplicity ordering is evaluated, and
/// when the product of per-axis factorials is at most [`EXHAUSTIVE_LIMIT`]
/// all per-axis orderings are enumerated. Of every lower set reached, the
/// one whose sorted element list is smallest is returned.
pub fn find_lower_set_relabeling(x: &PointSet) -> Result<Option<(LowerSet, Relabeling)>> {
    x.check_distinct()?;
    let p = x.len();
    let m = x.dim();
    let clusters: Vec<AxisClusters> = (0..m).map(|j| AxisClusters::new(x, j)).collect();

    let mut best: Option<(Vec<MultiIndex>, Assignment)> = None;
    let mut consider = |img: Vec<MultiIndex>, a: Assignment| match &best {
        Some((b, _)) if !lex_less(&img, b) => {}
        _ => best = Some((img, a)),
    };

    for mask in 0u32..(1 << m) {
        // bit j set: axis j collapsed
        let kept: Vec<bool> = (0..m).map(|j| mask & (1 << j) == 0).collect();
        if !kept.iter().any(|&k| k) && p > 1 {
            continue;
        }
        if !projection_injective(&clusters, &kept, p) {
            continue;
        }
        let greedy: Assignment = clusters
            .iter()
            .zip(&kept)
            .map(|(c, &k)| k.then(|| c.greedy_order()))
            .collect();
        if let Some(img) = lower_image(&clusters, &greedy, p) {
            consider(img, greedy.clone());
        }

        let radices: Vec<u128> = clusters
            .iter()
            .zip(&kept)
            .map(|(c, &k)| if k { factorial_u128(c.count()) } else { 1 })
            .collect();
        let total = radices
            .iter()
            .try_fold(1u128, |acc, &r| acc.checked_mul(r))
            .unwrap_or(u128::MAX);
        if total <= 1 || total > EXHAUSTIVE_LIMIT {
            continue;
        }
        let decode = |mut index: u128| -> Assignment {
            clusters
                .iter()
                .zip(&kept)
                .zip(&radices)
                .map(|((c, &k), &r)| {
                    let digit = index % r;
                    index /= r;
                    k.then(|| nth_permutation(c.count(), digit))
                })
                .collect()
        };
        let found = (0..total as u64)
            .into_par_iter()
            .filter_map(|i| {
                let a = decode(i as u128);
                lower_image(&clusters, &a, p).map(|img| (img, i))
            })
            .reduce_with(|l, r| {
                if lex_less(&r.0, &l.0) || (r.0 == l.0 && r.1 < l.1) {
                    r
                } else {
                    l
                }
            });
        if let Some((img, i)) = found {
            consider(img, decode(i as u128));
        }
    }

    Ok(best.map(|(img, a)| {
        let relabeling = to_relabeling(&clusters, &a);
        (LowerSet::from_sorted_unchecked(m, img), relabeling)
    }))
}

/// True iff some relabeling maps `x` onto exactly the elements of `l`.
///
/// Axis modes are fixed by `l`: an axis whose distinct-value count matches
/// the number of distinct labels in `l` is relabeled bijectively, an axis
/// where `l` is identically zero may be collapsed. The per-axis bijections
/// are then found by backtracking over the points, with every partial image
/// required to lie in `l` and respect label multiplicities.
pub fn is_equivalent(x: &PointSet, l: &LowerSet) -> Result<bool> {
    if x.len() != l.len() {
        return Err(Error::SizeMismatch(format!(
            "{} points against a lower set of {} elements",
            x.len(),
            l.len()
        )));
    }
    if x.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: l.dim(),
        });
    }
    x.check_distinct()?;
    let p = x.len();
    let m = x.dim();
    let clusters: Vec<AxisClusters> = (0..m).map(|j| AxisClusters::new(x, j)).collect();

    // label multiplicities along each axis of l
    let mut label_mult: Vec<Vec<usize>> = Vec::with_capacity(m);
    for j in 0..m {
        let k = l.iter().map(|a| a.exponents()[j]).max().unwrap_or(0) as usize + 1;
        let mut mult = vec![0usize; k];
        for a in l.iter() {
            mult[a.exponents()[j] as usize] += 1;
        }
        label_mult.push(mult);
    }

    let mut collapsed = vec![false; m];
    for j in 0..m {
        let labels = label_mult[j].len();
        if labels == clusters[j].count() {
            let mut a = clusters[j].multiplicity.clone();
            let mut b = label_mult[j].clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Ok(false);
            }
        } else if labels == 1 {
            collapsed[j] = true;
        } else {
            return Ok(false);
        }
    }

    struct Search<'a> {
        clusters: &'a [AxisClusters],
        label_mult: &'a [Vec<usize>],
        collapsed: &'a [bool],
        target: &'a LowerSet,
        // cluster -> label, label -> cluster
        forward: Vec<Vec<Option<u32>>>,
        backward: Vec<Vec<Option<usize>>>,
        used: HashSet<MultiIndex>,
        p: usize,
    }

    impl Search<'_> {
        fn point_image(&self, i: usize) -> Option<MultiIndex> {
            let mut v = Vec::with_capacity(self.clusters.len());
            for (j, c) in self.clusters.iter().enumerate() {
                if self.collapsed[j] {
                    v.push(0);
                } else {
                    v.push(self.forward[j][c.of_point[i]]?);
                }
            }
            Some(MultiIndex::new(v))
        }

        fn first_unassigned(&self, i: usize) -> Option<(usize, usize)> {
            self.clusters.iter().enumerate().find_map(|(j, c)| {
                let id = c.of_point[i];
                (!self.collapsed[j] && self.forward[j][id].is_none()).then_some((j, id))
            })
        }

        fn run(&mut self, i: usize) -> bool {
            if i == self.p {
                return true;
            }
            if let Some((j, id)) = self.first_unassigned(i) {
                let mult = self.clusters[j].multiplicity[id];
                for label in 0..self.label_mult[j].len() {
                    if self.backward[j][label].is_some() || self.label_mult[j][label] != mult {
                        continue;
                    }
                    self.forward[j][id] = Some(label as u32);
                    self.backward[j][label] = Some(id);
                    if self.run(i) {
                        return true;
                    }
                    self.forward[j][id] = None;
                    self.backward[j][label] = None;
                }
                return false;
            }
            let Some(img) = self.point_image(i) else {
                return false;
            };
            if !self.target.contains(&img) || self.used.contains(&img) {
                return false;
            }
            self.used.insert(img.clone());
            if self.run(i + 1) {
                return true;
            }
            self.used.remove(&img);
            false
        }
    }

    let mut search = Search {
        clusters: &clusters,
        label_mult: &label_mult,
        collapsed: &collapsed,
        target: l,
        forward: clusters.iter().map(|c| vec![None; c.count()]).collect(),
        backward: label_mult.iter().map(|lm| vec![None; lm.len()]).collect(),
        used: HashSet::with_capacity(p),
        p,
    };
    Ok(search.run(0))
}
