//! Integer lattice geometry: states, scope boxes, move sets, regions and
//! discrete trajectories.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the integer state lattice.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(Vec<i64>);

impl StateVec {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &[i64]) -> StateVec {
        debug_assert_eq!(self.dim(), other.len());
        StateVec(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &[i64]) -> StateVec {
        debug_assert_eq!(self.dim(), other.len());
        StateVec(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    /// Keeps only the listed axes, in the listed order.
    pub fn project(&self, axes: &[usize]) -> StateVec {
        StateVec(axes.iter().map(|&a| self.0[a]).collect())
    }
}

impl Deref for StateVec {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl Borrow<[i64]> for StateVec {
    fn borrow(&self) -> &[i64] {
        &self.0
    }
}

impl Index<usize> for StateVec {
    type Output = i64;

    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

impl From<Vec<i64>> for StateVec {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[i64; N]> for StateVec {
    fn from(v: [i64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Debug for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Sup-norm of an integer vector.
pub fn norm_inf(v: &[i64]) -> u64 {
    v.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

/// Chebyshev distance between two lattice points.
pub fn chebyshev(a: &[i64], b: &[i64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).unsigned_abs())
        .max()
        .unwrap_or(0)
}

/// Finite axis-aligned box with inclusive bounds.
///
/// Cells are addressed row-major with the last axis varying fastest.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ScopeBox {
    lo: StateVec,
    hi: StateVec,
}

impl ScopeBox {
    pub fn new(lo: impl Into<StateVec>, hi: impl Into<StateVec>) -> Result<Self> {
        let (lo, hi) = (lo.into(), hi.into());
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                got: hi.dim(),
            });
        }
        if lo.dim() == 0 {
            return Err(Error::InvalidScope("zero-dimensional box".into()));
        }
        if let Some(axis) = (0..lo.dim()).find(|&a| lo[a] > hi[a]) {
            return Err(Error::InvalidScope(format!(
                "lo {lo} exceeds hi {hi} on axis {axis}"
            )));
        }
        let b = Self { lo, hi };
        b.checked_cell_count()
            .ok_or_else(|| Error::InvalidScope("cell count overflows usize".into()))?;
        Ok(b)
    }

    pub fn lo(&self) -> &StateVec {
        &self.lo
    }

    pub fn hi(&self) -> &StateVec {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    fn checked_cell_count(&self) -> Option<usize> {
        (0..self.dim()).try_fold(1usize, |acc, a| {
            let e = usize::try_from(self.hi[a].checked_sub(self.lo[a])?.checked_add(1)?).ok()?;
            acc.checked_mul(e)
        })
    }

    pub fn cell_count(&self) -> usize {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|a| self.lo[a] <= x[a] && x[a] <= self.hi[a])
    }

    pub fn contains_box(&self, other: &ScopeBox) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    /// Row-major index of an in-box point.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for (a, &c) in x.iter().enumerate() {
            idx = idx * self.extent(a) + (c - self.lo[a]) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> StateVec {
        let mut coords = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let e = self.extent(a);
            coords[a] = self.lo[a] + (idx % e) as i64;
            idx /= e;
        }
        StateVec(coords)
    }

    pub fn iter(&self) -> impl Iterator<Item = StateVec> + '_ {
        (0..self.cell_count()).map(move |i| self.point(i))
    }

    /// Grows the box by `margin` cells per axis and side, clipped to `clip`.
    pub fn dilate(&self, margin: i64, clip: Option<&ScopeBox>) -> ScopeBox {
        let mut lo: Vec<i64> = self.lo.iter().map(|c| c - margin).collect();
        let mut hi: Vec<i64> = self.hi.iter().map(|c| c + margin).collect();
        if let Some(c) = clip {
            for a in 0..self.dim() {
                lo[a] = lo[a].max(c.lo[a]);
                hi[a] = hi[a].min(c.hi[a]);
            }
        }
        ScopeBox {
            lo: lo.into(),
            hi: hi.into(),
        }
    }

    /// Smallest box containing all points.
    pub fn bounding<'a>(points: impl IntoIterator<Item = &'a StateVec>) -> Option<ScopeBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.0.clone(), first.0.clone());
        for p in it {
            for a in 0..lo.len() {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some(ScopeBox {
            lo: lo.into(),
            hi: hi.into(),
        })
    }

    pub fn union_hull(&self, other: &ScopeBox) -> ScopeBox {
        ScopeBox::bounding([&self.lo, &self.hi, &other.lo, &other.hi]).expect("non-empty")
    }

    pub fn project(&self, axes: &[usize]) -> ScopeBox {
        ScopeBox {
            lo: self.lo.project(axes),
            hi: self.hi.project(axes),
        }
    }

    /// Largest per-axis extent minus one.
    pub fn diameter(&self) -> u64 {
        (0..self.dim())
            .map(|a| (self.hi[a] - self.lo[a]) as u64)
            .max()
            .unwrap_or(0)
    }
}

/// A finite set of integer offset vectors, kept sorted lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct MoveSet {
    moves: Vec<StateVec>,
}

impl MoveSet {
    pub fn new(moves: impl IntoIterator<Item = StateVec>) -> Result<Self> {
        let mut moves: Vec<StateVec> = moves.into_iter().collect();
        let Some(dim) = moves.first().map(StateVec::dim) else {
            return Err(Error::InvalidGame("empty move set".into()));
        };
        if let Some(m) = moves.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
        moves.sort();
        moves.dedup();
        Ok(Self { moves })
    }

    /// The box `[-b_j, +b_j]` per component.
    pub fn centered_box(bounds: &[i64]) -> Self {
        let b = ScopeBox::new(
            bounds.iter().map(|b| -b.abs()).collect::<Vec<_>>(),
            bounds.iter().map(|b| b.abs()).collect::<Vec<_>>(),
        )
        .expect("centered box is valid");
        Self {
            moves: b.iter().collect(),
        }
    }

    /// The box `[-b, +b]^dim`.
    pub fn cube(dim: usize, bound: i64) -> Self {
        Self::centered_box(&vec![bound; dim])
    }

    /// Only the zero vector.
    pub fn zero(dim: usize) -> Self {
        Self {
            moves: vec![StateVec::zeros(dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.moves[0].dim()
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[StateVec] {
        &self.moves
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StateVec> {
        self.moves.iter()
    }

    pub fn get(&self, i: usize) -> &StateVec {
        &self.moves[i]
    }

    pub fn index_of(&self, m: &[i64]) -> Option<usize> {
        self.moves.binary_search_by(|probe| probe.coords().cmp(m)).ok()
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        self.index_of(m).is_some()
    }

    pub fn contains_zero(&self) -> bool {
        self.moves.iter().any(StateVec::is_zero)
    }
}

/// Extensional finite set of lattice cells.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Region {
    dim: usize,
    cells: BTreeSet<StateVec>,
}

impl Region {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            cells: BTreeSet::new(),
        }
    }

    pub fn from_cells(dim: usize, cells: impl IntoIterator<Item = StateVec>) -> Result<Self> {
        let mut r = Self::empty(dim);
        for c in cells {
            r.insert(c)?;
        }
        Ok(r)
    }

    pub fn from_box(b: &ScopeBox) -> Self {
        Self {
            dim: b.dim(),
            cells: b.iter().collect(),
        }
    }

    pub fn from_boxes<'a>(dim: usize, boxes: impl IntoIterator<Item = &'a ScopeBox>) -> Result<Self> {
        let mut r = Self::empty(dim);
        for b in boxes {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.dim(),
                });
            }
            r.cells.extend(b.iter());
        }
        Ok(r)
    }

    pub fn insert(&mut self, c: StateVec) -> Result<bool> {
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: c.dim(),
            });
        }
        Ok(self.cells.insert(c))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.cells.contains(x)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateVec> {
        self.cells.iter()
    }

    pub fn cells(&self) -> &BTreeSet<StateVec> {
        &self.cells
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.cells.is_disjoint(&other.cells)
    }

    pub fn union(&self, other: &Region) -> Region {
        Region {
            dim: self.dim,
            cells: self.cells.union(&other.cells).cloned().collect(),
        }
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region {
            dim: self.dim,
            cells: self.cells.intersection(&other.cells).cloned().collect(),
        }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region {
            dim: self.dim,
            cells: self.cells.difference(&other.cells).cloned().collect(),
        }
    }

    pub fn clip(&self, b: &ScopeBox) -> Region {
        Region {
            dim: self.dim,
            cells: self.cells.iter().filter(|c| b.contains(c)).cloned().collect(),
        }
    }

    pub fn project(&self, axes: &[usize]) -> Region {
        Region {
            dim: axes.len(),
            cells: self.cells.iter().map(|c| c.project(axes)).collect(),
        }
    }

    pub fn bounding_box(&self) -> Option<ScopeBox> {
        ScopeBox::bounding(self.cells.iter())
    }
}

impl FromIterator<StateVec> for Region {
    /// Panics on mixed dimensions; use [`Region::from_cells`] for checked input.
    fn from_iter<I: IntoIterator<Item = StateVec>>(iter: I) -> Self {
        let cells: BTreeSet<StateVec> = iter.into_iter().collect();
        let dim = cells.first().map(StateVec::dim).unwrap_or(0);
        assert!(cells.iter().all(|c| c.dim() == dim), "mixed dimensions");
        Region { dim, cells }
    }
}

/// Minkowski sum `region ⊕ delta`, optionally clipped to an ambient box.
pub fn minkowski_dilate(region: &Region, delta: &MoveSet, clip: Option<&ScopeBox>) -> Result<Region> {
    if !region.is_empty() && region.dim() != delta.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: delta.dim(),
        });
    }
    let mut out = Region::empty(region.dim());
    for a in region.iter() {
        for b in delta.iter() {
            let c = a.add(b);
            if clip.is_none_or(|bx| bx.contains(&c)) {
                out.cells.insert(c);
            }
        }
    }
    Ok(out)
}

/// A non-empty finite sequence of lattice points of one dimension.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Trajectory {
    points: Vec<StateVec>,
}

impl Trajectory {
    pub fn new(points: Vec<StateVec>) -> Result<Self> {
        let Some(dim) = points.first().map(StateVec::dim) else {
            return Err(Error::InvalidGame("empty trajectory".into()));
        };
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[StateVec] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Every consecutive difference lies in `delta`.
    pub fn is_delta_trajectory(&self, delta: &MoveSet) -> Result<bool> {
        if delta.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: delta.dim(),
            });
        }
        Ok(self.points.windows(2).all(|w| delta.contains(&w[1].sub(&w[0]))))
    }

    /// Unit-step continuity, i.e. a `[±1]^m`-trajectory.
    pub fn is_continuous(&self) -> bool {
        self.points.windows(2).all(|w| chebyshev(&w[0], &w[1]) <= 1)
    }

    /// Shortest continuous trajectory containing `self` as a subsequence.
    ///
    /// Between consecutive points, every component that has not yet reached
    /// its target moves one unit per step, so each gap is bridged in exactly
    /// Chebyshev-distance steps.
    pub fn continuous_completion(&self) -> Trajectory {
        let mut out = vec![self.points[0].clone()];
        for w in self.points.windows(2) {
            let mut cur = w[0].clone();
            while cur != w[1] {
                for a in 0..cur.dim() {
                    cur.0[a] += (w[1][a] - cur[a]).signum();
                }
                out.push(cur.clone());
            }
        }
        Trajectory { points: out }
    }

    pub fn project(&self, axes: &[usize]) -> Trajectory {
        Trajectory {
            points: self.points.iter().map(|p| p.project(axes)).collect(),
        }
    }
}

/// Cells strictly between `from` and `to` on their continuous completion.
pub fn crossing_cells(from: &[i64], to: &[i64]) -> Vec<StateVec> {
    let mut cur = from.to_vec();
    let mut out = Vec::new();
    loop {
        for a in 0..cur.len() {
            cur[a] += (to[a] - cur[a]).signum();
        }
        if cur == to {
            return out;
        }
        out.push(StateVec(cur.clone()));
    }
}
