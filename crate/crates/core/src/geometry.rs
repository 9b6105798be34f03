//! Points, axis-aligned boxes, placed tiles, patches and unions of lattice
//! unit cubes, all over exact scalars.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point<S> {
    pub coords: Vec<S>,
}

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Self {
        Point { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Point { coords: vec![S::zero(); dim] }
    }

    pub fn from_i64s(values: &[i64]) -> Self {
        Point { coords: values.iter().map(|&v| S::from_i64(v)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn scale(&self, factor: &S) -> Self {
        Point { coords: self.coords.iter().map(|c| c.clone() * factor.clone()).collect() }
    }

    pub fn norm_squared(&self) -> S {
        self.coords.iter().fold(S::zero(), |acc, c| acc + c.clone() * c.clone())
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }
}

impl<S: Scalar> Add for &Point<S> {
    type Output = Point<S>;
    fn add(self, rhs: &Point<S>) -> Point<S> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }
}

impl<S: Scalar> Sub for &Point<S> {
    type Output = Point<S>;
    fn sub(self, rhs: &Point<S>) -> Point<S> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }
}

impl<S: Scalar> Neg for &Point<S> {
    type Output = Point<S>;
    fn neg(self) -> Point<S> {
        Point { coords: self.coords.iter().map(|c| -c.clone()).collect() }
    }
}

impl<S: Scalar> fmt::Display for Point<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A closed axis-aligned box `min + [0, extents]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Aabb<S> {
    pub min: Point<S>,
    pub extents: Vec<S>,
}

impl<S: Scalar> Aabb<S> {
    pub fn new(min: Point<S>, extents: Vec<S>) -> Result<Self> {
        if min.dim() != extents.len() {
            return Err(Error::DimensionMismatch { expected: min.dim(), found: extents.len() });
        }
        if extents.iter().any(|e| !e.is_positive()) {
            return Err(Error::NonPositiveExtent);
        }
        Ok(Aabb { min, extents })
    }

    pub fn from_corners(min: Point<S>, max: Point<S>) -> Result<Self> {
        let extents = (&max - &min).coords;
        Self::new(min, extents)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn max(&self) -> Point<S> {
        Point {
            coords: self.min.coords.iter().zip(&self.extents).map(|(m, e)| m.clone() + e.clone()).collect(),
        }
    }

    pub fn hi(&self, axis: usize) -> S {
        self.min.coords[axis].clone() + self.extents[axis].clone()
    }

    pub fn lo(&self, axis: usize) -> &S {
        &self.min.coords[axis]
    }

    pub fn volume(&self) -> S {
        self.extents.iter().fold(S::one(), |acc, e| acc * e.clone())
    }

    /// Sum of the `(d-1)`-volumes of the `2d` facets.
    pub fn boundary_measure(&self) -> S {
        let d = self.dim();
        if d == 1 {
            return S::from_i64(2);
        }
        let mut total = S::zero();
        for skip in 0..d {
            let facet = self
                .extents
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != skip)
                .fold(S::one(), |acc, (_, e)| acc * e.clone());
            total = total + facet;
        }
        total * S::from_i64(2)
    }

    pub fn diameter_squared(&self) -> S {
        self.extents.iter().fold(S::zero(), |acc, e| acc + e.clone() * e.clone())
    }

    pub fn translate(&self, by: &Point<S>) -> Self {
        Aabb { min: &self.min + by, extents: self.extents.clone() }
    }

    /// Image under `x -> factor * x` for a positive factor.
    pub fn scale(&self, factor: &S) -> Self {
        Aabb {
            min: self.min.scale(factor),
            extents: self.extents.iter().map(|e| e.clone() * factor.clone()).collect(),
        }
    }

    pub fn center(&self) -> Point<S> {
        Point {
            coords: self
                .min
                .coords
                .iter()
                .zip(&self.extents)
                .map(|(m, e)| m.clone() + e.clone() * S::half())
                .collect(),
        }
    }

    pub fn contains_point(&self, p: &Point<S>) -> bool {
        (0..self.dim()).all(|j| &p.coords[j] >= self.lo(j) && p.coords[j] <= self.hi(j))
    }

    pub fn contains_point_strictly(&self, p: &Point<S>) -> bool {
        (0..self.dim()).all(|j| &p.coords[j] > self.lo(j) && p.coords[j] < self.hi(j))
    }

    /// Closed-set intersection: touching faces count.
    pub fn intersects(&self, other: &Aabb<S>) -> bool {
        (0..self.dim()).all(|j| self.lo(j) <= &other.hi(j) && other.lo(j) <= &self.hi(j))
    }

    /// Positive-measure overlap.
    pub fn interiors_overlap(&self, other: &Aabb<S>) -> bool {
        (0..self.dim()).all(|j| self.lo(j) < &other.hi(j) && other.lo(j) < &self.hi(j))
    }

    pub fn contains_box(&self, inner: &Aabb<S>) -> bool {
        (0..self.dim()).all(|j| self.lo(j) <= inner.lo(j) && inner.hi(j) <= self.hi(j))
    }

    /// `inner` lies in the open interior, i.e. it is disjoint from the boundary.
    pub fn contains_box_strictly(&self, inner: &Aabb<S>) -> bool {
        (0..self.dim()).all(|j| self.lo(j) < inner.lo(j) && inner.hi(j) < self.hi(j))
    }

    pub fn hull(&self, other: &Aabb<S>) -> Aabb<S> {
        let min = Point {
            coords: (0..self.dim()).map(|j| self.lo(j).clone().min(other.lo(j).clone())).collect(),
        };
        let max = Point {
            coords: (0..self.dim()).map(|j| self.hi(j).max(other.hi(j))).collect(),
        };
        Aabb { extents: (&max - &min).coords, min }
    }

    /// Smallest facet distance from `inner` to the boundary of `self`
    /// (negative when `inner` pokes out).
    pub fn clearance(&self, inner: &Aabb<S>) -> S {
        (0..self.dim())
            .flat_map(|j| [inner.lo(j).clone() - self.lo(j).clone(), self.hi(j) - inner.hi(j)])
            .min()
            .expect("positive dimension")
    }
}

impl<S: Scalar> fmt::Display for Aabb<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.dim()).map(|j| format!("[{}, {}]", self.lo(j), self.hi(j))).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

/// Translation-class representative of a tile: a box anchored at the origin.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Prototile<S> {
    pub name: String,
    pub extents: Vec<S>,
    pub volume: S,
}

impl<S: Scalar> Prototile<S> {
    pub fn new(name: impl Into<String>, extents: Vec<S>) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::Invalid("prototile needs at least one extent".into()));
        }
        if extents.iter().any(|e| !e.is_positive()) {
            return Err(Error::NonPositiveExtent);
        }
        let volume = extents.iter().fold(S::one(), |acc, e| acc * e.clone());
        Ok(Prototile { name: name.into(), extents, volume })
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn support_at(&self, offset: &Point<S>) -> Aabb<S> {
        Aabb { min: offset.clone(), extents: self.extents.clone() }
    }

    pub fn diameter_squared(&self) -> S {
        self.extents.iter().fold(S::zero(), |acc, e| acc + e.clone() * e.clone())
    }
}

/// A translated copy of a prototile. Ordering is the canonical patch order:
/// offset coordinates first, prototile index second.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlacedTile<S> {
    pub offset: Point<S>,
    pub prototile: usize,
}

impl<S: Scalar> PlacedTile<S> {
    pub fn new(prototile: usize, offset: Point<S>) -> Self {
        PlacedTile { offset, prototile }
    }

    pub fn support(&self, shapes: &[Prototile<S>]) -> Result<Aabb<S>> {
        let proto = shapes.get(self.prototile).ok_or(Error::UnknownPrototile(self.prototile))?;
        Ok(proto.support_at(&self.offset))
    }

    pub fn translate(&self, by: &Point<S>) -> Self {
        PlacedTile { offset: &self.offset + by, prototile: self.prototile }
    }
}

/// A finite collection of placed tiles.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Patch<S> {
    pub tiles: Vec<PlacedTile<S>>,
}

impl<S: Scalar> Patch<S> {
    pub fn new(tiles: Vec<PlacedTile<S>>) -> Self {
        Patch { tiles }
    }

    pub fn empty() -> Self {
        Patch { tiles: Vec::new() }
    }

    pub fn single(prototile: usize, offset: Point<S>) -> Self {
        Patch { tiles: vec![PlacedTile::new(prototile, offset)] }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Sort into canonical order and drop exact duplicates.
    pub fn canonicalize(&mut self) {
        self.tiles.sort();
        self.tiles.dedup();
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn translate(&self, by: &Point<S>) -> Self {
        Patch { tiles: self.tiles.iter().map(|t| t.translate(by)).collect() }
    }

    pub fn check_ids(&self, shapes: &[Prototile<S>]) -> Result<()> {
        match self.tiles.iter().find(|t| t.prototile >= shapes.len()) {
            Some(t) => Err(Error::UnknownPrototile(t.prototile)),
            None => Ok(()),
        }
    }

    /// Per-prototile tile counts.
    pub fn census(&self, n_prototiles: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n_prototiles];
        for t in &self.tiles {
            counts[t.prototile] += 1;
        }
        counts
    }

    pub fn volume(&self, shapes: &[Prototile<S>]) -> Result<S> {
        self.check_ids(shapes)?;
        Ok(self.tiles.iter().fold(S::zero(), |acc, t| acc + shapes[t.prototile].volume.clone()))
    }

    /// Bounding box of the support; `None` for the empty patch.
    pub fn bounding_box(&self, shapes: &[Prototile<S>]) -> Result<Option<Aabb<S>>> {
        let mut acc: Option<Aabb<S>> = None;
        for t in &self.tiles {
            let b = t.support(shapes)?;
            acc = Some(match acc {
                None => b,
                Some(a) => a.hull(&b),
            });
        }
        Ok(acc)
    }

    /// The support as a box, when the patch exactly tiles its bounding box.
    pub fn box_support(&self, shapes: &[Prototile<S>]) -> Result<Aabb<S>> {
        let bbox = self
            .bounding_box(shapes)?
            .ok_or_else(|| Error::SupportNotBox("empty patch".into()))?;
        match exact_cover_check(shapes, self, &bbox)? {
            CoverReport::Ok => Ok(bbox),
            violation => Err(Error::SupportNotBox(violation.to_string())),
        }
    }

    /// `[b]^P`: tiles whose closed support meets the closed box `b`.
    pub fn tiles_intersecting(&self, shapes: &[Prototile<S>], b: &Aabb<S>) -> Result<Patch<S>> {
        let mut out = Vec::new();
        for t in &self.tiles {
            if t.support(shapes)?.intersects(b) {
                out.push(t.clone());
            }
        }
        Ok(Patch { tiles: out })
    }
}

/// Outcome of [`exact_cover_check`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoverReport<S> {
    Ok,
    /// Two tiles (indices into the patch) share interior points.
    Overlap { first: usize, second: usize },
    /// Tile `tile` is not contained in the region.
    OutsideRegion { tile: usize },
    VolumeMismatch { expected: S, actual: S },
}

impl<S: Scalar> CoverReport<S> {
    pub fn is_ok(&self) -> bool {
        matches!(self, CoverReport::Ok)
    }
}

impl<S: Scalar> fmt::Display for CoverReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverReport::Ok => write!(f, "ok"),
            CoverReport::Overlap { first, second } => write!(f, "tiles {first} and {second} overlap"),
            CoverReport::OutsideRegion { tile } => write!(f, "tile {tile} leaves the region"),
            CoverReport::VolumeMismatch { expected, actual } => {
                write!(f, "covered volume {actual} differs from region volume {expected}")
            }
        }
    }
}

/// Checks that `patch` tiles `region` exactly: interiors pairwise disjoint,
/// every tile inside the region, and total volume equal to the region's.
pub fn exact_cover_check<S: Scalar>(
    shapes: &[Prototile<S>],
    patch: &Patch<S>,
    region: &Aabb<S>,
) -> Result<CoverReport<S>> {
    let boxes: Vec<Aabb<S>> = patch.tiles.iter().map(|t| t.support(shapes)).collect::<Result<_>>()?;
    if let Some(b) = boxes.iter().find(|b| b.dim() != region.dim()) {
        return Err(Error::DimensionMismatch { expected: region.dim(), found: b.dim() });
    }

    // sweep along the first axis
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[a].lo(0).cmp(boxes[b].lo(0)));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let start = boxes[i].lo(0).clone();
        active.retain(|&j| boxes[j].hi(0) > start);
        if let Some(&j) = active.iter().find(|&&j| boxes[j].interiors_overlap(&boxes[i])) {
            let (first, second) = if j < i { (j, i) } else { (i, j) };
            return Ok(CoverReport::Overlap { first, second });
        }
        active.push(i);
    }

    if let Some(tile) = boxes.iter().position(|b| !region.contains_box(b)) {
        return Ok(CoverReport::OutsideRegion { tile });
    }

    let actual = boxes.iter().fold(S::zero(), |acc, b| acc + b.volume());
    let expected = region.volume();
    if actual != expected {
        return Ok(CoverReport::VolumeMismatch { expected, actual });
    }
    Ok(CoverReport::Ok)
}

/// Range of lattice centers `x` whose half-open cell `[x - 1/2, x + 1/2)`
/// meets the closed interval `[lo, hi]`.
pub fn cell_range_closed<S: Scalar>(lo: &S, hi: &S) -> (BigInt, BigInt) {
    let h = S::half();
    let first = (lo.clone() - h.clone()).floor_big() + BigInt::one();
    let last = (hi.clone() + h).floor_big();
    (first, last)
}

/// Same as [`cell_range_closed`] for the half-open interval `[lo, hi)`.
pub fn cell_range_half_open<S: Scalar>(lo: &S, hi: &S) -> (BigInt, BigInt) {
    let h = S::half();
    let first = (lo.clone() - h.clone()).floor_big() + BigInt::one();
    let last = (hi.clone() + h).ceil_big() - BigInt::one();
    (first, last)
}

/// A finite union of lattice-centred half-open unit cubes `C(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeUnion {
    dim: usize,
    centers: BTreeSet<Vec<i64>>,
}

impl CubeUnion {
    pub fn new(dim: usize) -> Self {
        CubeUnion { dim, centers: BTreeSet::new() }
    }

    pub fn from_centers(dim: usize, centers: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        let mut u = CubeUnion::new(dim);
        for c in centers {
            u.insert(c)?;
        }
        Ok(u)
    }

    pub fn insert(&mut self, center: Vec<i64>) -> Result<bool> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: center.len() });
        }
        Ok(self.centers.insert(center))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn contains(&self, center: &[i64]) -> bool {
        self.centers.contains(center)
    }

    pub fn centers(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.centers.iter()
    }

    /// Closed hull of the cubes as a box.
    pub fn bounding_box<S: Scalar>(&self) -> Option<Aabb<S>> {
        let first = self.centers.iter().next()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for c in &self.centers {
            for j in 0..self.dim {
                lo[j] = lo[j].min(c[j]);
                hi[j] = hi[j].max(c[j]);
            }
        }
        let min = Point { coords: lo.iter().map(|&v| S::from_i64(v) - S::half()).collect() };
        let extents = lo.iter().zip(&hi).map(|(&l, &h)| S::from_i64(h - l + 1)).collect();
        Some(Aabb { min, extents })
    }

    /// Whether the closed box `b` meets at least one cube of the union.
    pub fn meets_box<S: Scalar>(&self, b: &Aabb<S>) -> bool {
        let mut ranges = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let (first, last) = cell_range_closed(b.lo(j), &b.hi(j));
            let (Some(first), Some(last)) = (first.to_i64(), last.to_i64()) else {
                return false;
            };
            if first > last {
                return false;
            }
            ranges.push((first, last));
        }
        let cells: u128 = ranges.iter().map(|&(a, b)| (b - a + 1) as u128).product();
        if cells <= self.centers.len() as u128 {
            let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                if self.centers.contains(&cur) {
                    return true;
                }
                let mut axis = 0;
                loop {
                    if axis == self.dim {
                        return false;
                    }
                    if cur[axis] < ranges[axis].1 {
                        cur[axis] += 1;
                        break;
                    }
                    cur[axis] = ranges[axis].0;
                    axis += 1;
                }
            }
        } else {
            self.centers
                .iter()
                .any(|c| c.iter().zip(&ranges).all(|(&x, &(a, b))| a <= x && x <= b))
        }
    }
}

/// All cubes `C(x)`, `x` in `Z^d`, that meet the closed box `b`.
pub fn cube_cover<S: Scalar>(b: &Aabb<S>) -> Result<CubeUnion> {
    let ranges: Vec<(BigInt, BigInt)> = (0..b.dim()).map(|j| cell_range_closed(b.lo(j), &b.hi(j))).collect();
    cubes_from_ranges(b.dim(), &ranges)
}

/// All cubes `C(x)` that meet the half-open box `prod [lo, hi)`.
pub fn cube_cover_half_open<S: Scalar>(b: &Aabb<S>) -> Result<CubeUnion> {
    let ranges: Vec<(BigInt, BigInt)> = (0..b.dim()).map(|j| cell_range_half_open(b.lo(j), &b.hi(j))).collect();
    cubes_from_ranges(b.dim(), &ranges)
}

const MAX_EXPLICIT_CUBES: u128 = 50_000_000;

fn cubes_from_ranges(dim: usize, ranges: &[(BigInt, BigInt)]) -> Result<CubeUnion> {
    let mut small = Vec::with_capacity(dim);
    let mut total: u128 = 1;
    for (a, b) in ranges {
        let (Some(a), Some(b)) = (a.to_i64(), b.to_i64()) else {
            return Err(Error::BudgetExceeded { needed: "beyond i64 range".into(), budget: MAX_EXPLICIT_CUBES as u64 });
        };
        if a > b {
            return Ok(CubeUnion::new(dim));
        }
        total = total.saturating_mul((b - a + 1) as u128);
        small.push((a, b));
    }
    if total > MAX_EXPLICIT_CUBES {
        return Err(Error::BudgetExceeded { needed: total.to_string(), budget: MAX_EXPLICIT_CUBES as u64 });
    }
    let mut union = CubeUnion::new(dim);
    let mut cur: Vec<i64> = small.iter().map(|r| r.0).collect();
    loop {
        union.centers.insert(cur.clone());
        let mut axis = 0;
        loop {
            if axis == dim {
                return Ok(union);
            }
            if cur[axis] < small[axis].1 {
                cur[axis] += 1;
                break;
            }
            cur[axis] = small[axis].0;
            axis += 1;
        }
    }
}

/// `(d-1)`-measure of the boundary of the closed union of cubes.
///
/// Each axis-parallel line of cubes contributes two facets per maximal run
/// of consecutive centres.
pub fn boundary_measure<S: Scalar>(a: &CubeUnion) -> Result<S> {
    if a.is_empty() {
        return Err(Error::EmptyCubeUnion);
    }
    let mut facets: u64 = 0;
    for axis in 0..a.dim {
        let mut lines: BTreeMap<Vec<i64>, Vec<i64>> = BTreeMap::new();
        for c in &a.centers {
            let mut key = c.clone();
            let v = key.remove(axis);
            lines.entry(key).or_default().push(v);
        }
        for values in lines.values_mut() {
            values.sort_unstable();
            let runs = 1 + values.windows(2).filter(|w| w[1] != w[0] + 1).count() as u64;
            facets += 2 * runs;
        }
    }
    Ok(S::from_i64(facets as i64))
}

/// A box-shaped block of cubes, `prod [first_j, last_j]` in centre
/// coordinates, for covers too large to list explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeBlock {
    pub ranges: Vec<(BigInt, BigInt)>,
}

impl CubeBlock {
    pub fn cover<S: Scalar>(b: &Aabb<S>) -> Self {
        CubeBlock { ranges: (0..b.dim()).map(|j| cell_range_closed(b.lo(j), &b.hi(j))).collect() }
    }

    pub fn side_lengths(&self) -> Vec<BigInt> {
        self.ranges.iter().map(|(a, b)| b - a + BigInt::one()).collect()
    }

    pub fn cube_count(&self) -> BigInt {
        self.side_lengths().iter().product()
    }

    pub fn boundary_measure(&self) -> BigInt {
        let sides = self.side_lengths();
        let d = sides.len();
        if d == 1 {
            return BigInt::from(2);
        }
        let mut total = BigInt::zero();
        for skip in 0..d {
            total += sides.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, s)| s.clone()).product::<BigInt>();
        }
        total * 2
    }

    pub fn bounding_box<S: Scalar>(&self) -> Option<Aabb<S>>
    where
        S: From<BigInt>,
    {
        let min = Point { coords: self.ranges.iter().map(|(a, _)| S::from(a.clone()) - S::half()).collect() };
        let extents: Vec<S> = self.side_lengths().into_iter().map(S::from).collect();
        Aabb::new(min, extents).ok()
    }
}
