//! Laczkovich divergence quotients, divergence tables with their algebraic
//! lower bound, and bounded-displacement matching on finite point sets.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::construction::{anchored_support, Letter, NestedFamily, OmegaWord, TilingWindow};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, CubeBlock, Patch, Point, Prototile};
use crate::scalar::Scalar;
use crate::spectral::{substitution_matrix, CountVector, SpectralReport};
use crate::Rational;

/// Geometric rows are skipped once a window would hold more tiles than this.
pub const DEFAULT_ROW_BUDGET: u64 = 10_000_000;

/// Binary digits kept when bounding a square root from above.
const SQRT_BITS: usize = 64;

/// A real interval with optionally open endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Interval {
    lo: Rational,
    lo_closed: bool,
    hi: Rational,
    hi_closed: bool,
}

impl Interval {
    fn closed(lo: Rational, hi: Rational) -> Self {
        Interval { lo, lo_closed: true, hi, hi_closed: true }
    }

    fn half_open(lo: Rational, hi: Rational) -> Self {
        Interval { lo, lo_closed: true, hi, hi_closed: false }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.cmp(&other.lo) {
            std::cmp::Ordering::Greater => (self.lo.clone(), self.lo_closed),
            std::cmp::Ordering::Less => (other.lo.clone(), other.lo_closed),
            std::cmp::Ordering::Equal => (self.lo.clone(), self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.cmp(&other.hi) {
            std::cmp::Ordering::Less => (self.hi.clone(), self.hi_closed),
            std::cmp::Ordering::Greater => (other.hi.clone(), other.hi_closed),
            std::cmp::Ordering::Equal => (self.hi.clone(), self.hi_closed && other.hi_closed),
        };
        Interval { lo, lo_closed, hi, hi_closed }
    }

    /// `self ⊆ other`, for nonempty `self`.
    fn subset_of(&self, other: &Interval) -> bool {
        let lo_ok = self.lo > other.lo || (self.lo == other.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok = self.hi < other.hi || (self.hi == other.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }
}

type BoxSet = Vec<Interval>;

fn closed_box(b: &Aabb<Rational>) -> BoxSet {
    (0..b.dim()).map(|j| Interval::closed(b.lo(j).clone(), b.hi(j))).collect()
}

fn block_set(block: &CubeBlock) -> BoxSet {
    let half = Rational::half();
    block
        .ranges
        .iter()
        .map(|(a, b)| {
            Interval::half_open(Rational::from_integer(a.clone()) - &half, Rational::from_integer(b.clone()) + &half)
        })
        .collect()
}

fn meets(x: &BoxSet, y: &BoxSet) -> bool {
    x.iter().zip(y).all(|(a, b)| !a.intersect(b).is_empty())
}

/// Whether `x ∩ (y \ z)` is nonempty.
fn meets_difference(x: &BoxSet, y: &BoxSet, z: &BoxSet) -> bool {
    let cut: Vec<Interval> = x.iter().zip(y).map(|(a, b)| a.intersect(b)).collect();
    if cut.iter().any(Interval::is_empty) {
        return false;
    }
    cut.iter().zip(z).any(|(c, w)| !c.subset_of(w))
}

/// Number of tiles of `patch` meeting the union of cubes in `block`.
pub fn count_meeting_block(patch: &Patch<Rational>, shapes: &[Prototile<Rational>], block: &CubeBlock) -> Result<usize> {
    let a = block_set(block);
    let mut n = 0;
    for t in &patch.tiles {
        if meets(&closed_box(&t.support(shapes)?), &a) {
            n += 1;
        }
    }
    Ok(n)
}

/// A single Laczkovich quotient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quotient {
    pub cubes: BigInt,
    pub boundary: BigInt,
    pub count_first: BigInt,
    pub count_second: BigInt,
    pub quotient: Rational,
}

/// `|#[A]^T1 - #[A]^T2| / mu(dA)` with `A` the cubes meeting `region`.
pub fn laczkovich_quotient(
    shapes: &[Prototile<Rational>],
    first: &dyn TilingWindow,
    second: &dyn TilingWindow,
    region: &Aabb<Rational>,
) -> Result<Quotient> {
    let block = CubeBlock::cover(region);
    let hull: Aabb<Rational> = block.bounding_box().ok_or_else(|| Error::Invalid("empty cube cover".into()))?;
    let c1 = count_meeting_block(&first.window(&hull)?, shapes, &block)?;
    let c2 = count_meeting_block(&second.window(&hull)?, shapes, &block)?;
    let boundary = block.boundary_measure();
    let diff = (BigInt::from(c1) - BigInt::from(c2)).abs();
    Ok(Quotient {
        cubes: block.cube_count(),
        quotient: Rational::new(diff, boundary.clone()),
        boundary,
        count_first: BigInt::from(c1),
        count_second: BigInt::from(c2),
    })
}

/// Exact counts measured on one tiling for a geometric row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeometricSide {
    /// `#[A_m]^T`.
    pub count: BigInt,
    /// `#[A_m △ supp P]^T` for the nested patch `P` of the row.
    pub collar_count: BigInt,
    /// `|#[A_m]^T - #P| <= #[A_m △ supp P]^T`.
    pub decomposition_holds: bool,
    /// `#[A_m △ supp P]^T <= c2 lambda1^k' mu(dA_m)`.
    pub collar_bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeometricRow {
    pub omega: GeometricSide,
    pub eta: GeometricSide,
    pub quotient: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivergenceRow {
    pub m: usize,
    /// Index `i_m` of the `m`-th disagreement.
    pub index: usize,
    /// `k_(i_m)`.
    pub k: u64,
    /// `k_(i_m - 1)`, zero for the first index.
    pub k_prev: u64,
    pub cubes: BigInt,
    pub boundary: BigInt,
    pub nested_omega: BigInt,
    pub nested_eta: BigInt,
    /// `|#P_omega - #P_eta|` for the two nested patches, from matrix powers.
    pub nested_difference: BigInt,
    /// Right-hand side of the divergence lower bound.
    pub lower_bound: Rational,
    pub geometric: Option<GeometricRow>,
}

/// Constants entering the lower bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivergenceConstants {
    pub c0: Rational,
    pub c1_squared: Rational,
    pub c2: Rational,
    pub c3: Rational,
    /// `|lambda_t| / lambda1^((d-1)/d)`; exact when `exact_ratio`.
    pub ratio: Rational,
    pub exact_ratio: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivergenceTable {
    pub omega: OmegaWord,
    pub eta: OmegaWord,
    pub constants: DivergenceConstants,
    pub rows: Vec<DivergenceRow>,
}

/// Rational `r` with `sqrt(x) <= r <= sqrt(x) + 2^-SQRT_BITS`-ish, exact when
/// `x` is a perfect square.
pub fn sqrt_upper(x: &Rational) -> Rational {
    if let Some(s) = exact_sqrt(x) {
        return s;
    }
    let scale = BigInt::one() << SQRT_BITS;
    let n = x.numer() * x.denom() * &scale * &scale;
    let root = n.sqrt() + BigInt::one();
    Rational::new(root, x.denom() * scale)
}

/// `sqrt(x)` when it is rational.
pub fn exact_sqrt(x: &Rational) -> Option<Rational> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    (&n * &n == *x.numer() && &d * &d == *x.denom()).then(|| Rational::new(n, d))
}

/// Exact `d`-th root of a non-negative rational, when rational.
fn exact_root(x: &Rational, d: u32) -> Option<Rational> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().nth_root(d);
    let m = x.denom().nth_root(d);
    (num_traits::pow(n.clone(), d as usize) == *x.numer() && num_traits::pow(m.clone(), d as usize) == *x.denom())
        .then(|| Rational::new(n, m))
}

/// Constants for the bundled recipe: `c0` from the count differences,
/// `c2 = 2 d sqrt(d) c1^d / v_min`, `c3` from the box perimeter plus cube
/// rounding.
pub fn divergence_constants(family: &NestedFamily, report: &SpectralReport) -> Result<DivergenceConstants> {
    let lt = report.lambda_t().ok_or_else(|| Error::NotContinuumRegime(report.classification.to_string()))?;
    let d = family.dimension() as u32;
    let xi = &family.rule.inflation;
    let (lt_abs, lt_exact) = match &lt.exact_value {
        Some(v) => (v.abs(), true),
        None => (Rational::from_float(lt.modulus()).ok_or_else(|| Error::Invariant("non-finite eigenvalue".into()))?, false),
    };
    let denom = exact_root(&report.lambda1.pow_u32(d - 1), d);
    let (ratio, exact_ratio) = match denom {
        Some(den) if lt_exact => (&lt_abs / den, true),
        _ => {
            let approx = lt.modulus() / report.threshold;
            (Rational::from_float(approx).ok_or_else(|| Error::Invariant("non-finite ratio".into()))?, false)
        }
    };

    let m = substitution_matrix(&family.rule);
    let vp = CountVector::from_census(&family.p.patch.census(family.rule.len()));
    let vq = CountVector::from_census(&family.q.patch.census(family.rule.len()));
    let mut w = vp.sub(&vq);
    let mut c0: Option<Rational> = None;
    for j in 0..=(10 + m.size() as u32) {
        let value = Rational::from_integer(w.total().abs()) / lt_abs.pow_u32(j + 1);
        c0 = Some(match c0 {
            Some(c) if c <= value => c,
            _ => value,
        });
        w = m.mul_vec(&w);
    }
    let c0 = c0.unwrap_or_else(Rational::zero);

    let c1_squared = family.c1_squared();
    let c1_pow_d = if d % 2 == 0 { c1_squared.pow_u32(d / 2) } else { c1_squared.pow_u32(d / 2) * sqrt_upper(&c1_squared) };
    let dd = Rational::from_i64(d as i64);
    let cd = Rational::from_i64(2 * d as i64) * sqrt_upper(&dd);
    let c2 = cd * c1_pow_d / family.rule.min_prototile_volume();

    let two_over_xi = Rational::from_i64(2) / xi;
    let sides: Vec<Rational> = family.p.support.extents.iter().map(|e| e / xi + &two_over_xi).collect();
    let mut c3 = Rational::zero();
    for skip in 0..sides.len() {
        let prod = sides
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != skip)
            .fold(Rational::one(), |acc, (_, s)| acc * s);
        c3 += prod;
    }
    c3 *= Rational::from_i64(2);

    Ok(DivergenceConstants { c0, c1_squared, c2, c3, ratio, exact_ratio })
}

fn lower_bound(constants: &DivergenceConstants, lambda1: &Rational, k: u64, k_prev: u64) -> Result<Rational> {
    let k = u32::try_from(k).map_err(|_| Error::Invalid("level too large for the lower bound".into()))?;
    let k_prev = u32::try_from(k_prev).map_err(|_| Error::Invalid("level too large for the lower bound".into()))?;
    let growth = &constants.c0 / &constants.c3 * constants.ratio.pow_u32(k);
    Ok(growth - Rational::from_i64(2) * &constants.c2 * lambda1.pow_u32(k_prev))
}

/// Rows `m = 1..=m_max` over the disagreement positions of the two words.
pub fn divergence_table(
    family: &NestedFamily,
    report: &SpectralReport,
    omega: &OmegaWord,
    eta: &OmegaWord,
    m_max: usize,
    budget: u64,
) -> Result<DivergenceTable> {
    let horizon = omega.len().max(eta.len()) + m_max;
    let positions = omega.disagreements(eta, horizon);
    if positions.is_empty() {
        return Err(Error::IdenticalWords);
    }
    let constants = divergence_constants(family, report)?;
    let ks = crate::construction::k_schedule(family.h, horizon)?;
    let chosen: Vec<(usize, usize)> = positions.into_iter().take(m_max).enumerate().map(|(j, i)| (j + 1, i)).collect();
    let rows = chosen
        .par_iter()
        .map(|&(m, index)| divergence_row(family, report, &constants, omega, eta, &ks, m, index, budget))
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceTable { omega: omega.clone(), eta: eta.clone(), constants, rows })
}

#[allow(clippy::too_many_arguments)]
fn divergence_row(
    family: &NestedFamily,
    report: &SpectralReport,
    constants: &DivergenceConstants,
    omega: &OmegaWord,
    eta: &OmegaWord,
    ks: &[u64],
    m: usize,
    index: usize,
    budget: u64,
) -> Result<DivergenceRow> {
    let k = ks[index - 1];
    let k_prev = if index >= 2 { ks[index - 2] } else { 0 };
    let depth = u32::try_from(k - 1).map_err(|_| Error::Invalid("level too large".into()))?;
    let region = anchored_support(&family.p, &family.rule.inflation, depth);
    let block = CubeBlock::cover(&region);
    let boundary = block.boundary_measure();

    let count_of = |letter: Letter| -> BigInt {
        let m = substitution_matrix(&family.rule);
        let v = CountVector::from_census(&family.base(letter).patch.census(family.rule.len()));
        crate::spectral::count_vector(&m, &v, depth as u64).total()
    };
    let nested_omega = count_of(omega.letter(index));
    let nested_eta = count_of(eta.letter(index));
    let nested_difference = (&nested_omega - &nested_eta).abs();
    let lower = lower_bound(constants, &report.lambda1, k, k_prev)?;

    let estimate = region.volume() / family.rule.min_prototile_volume();
    let geometric = if k <= 16 && estimate.to_integer().to_u64().is_some_and(|n| n.saturating_mul(4) <= budget) {
        Some(geometric_row(family, constants, &report.lambda1, omega, eta, index, k_prev, &block, &boundary)?)
    } else {
        None
    };

    Ok(DivergenceRow {
        m,
        index,
        k,
        k_prev,
        cubes: block.cube_count(),
        boundary,
        nested_omega,
        nested_eta,
        nested_difference,
        lower_bound: lower,
        geometric,
    })
}

#[allow(clippy::too_many_arguments)]
fn geometric_row(
    family: &NestedFamily,
    constants: &DivergenceConstants,
    lambda1: &Rational,
    omega: &OmegaWord,
    eta: &OmegaWord,
    index: usize,
    k_prev: u64,
    block: &CubeBlock,
    boundary: &BigInt,
) -> Result<GeometricRow> {
    let a_set = block_set(block);
    let hull: Aabb<Rational> = block.bounding_box().ok_or_else(|| Error::Invalid("empty cube cover".into()))?;
    let collar_limit = &constants.c2
        * lambda1.pow_u32(u32::try_from(k_prev).map_err(|_| Error::Invalid("level too large".into()))?)
        * Rational::from_integer(boundary.clone());
    let side = |word: &OmegaWord| -> Result<GeometricSide> {
        let placement = family.build_nested(&word.prefix(index))?;
        let level = placement.top();
        let nested_count = family.level_counts(level).total();
        let s_set = closed_box(&level.support);
        let query = hull.hull(&level.support);
        let tiling = family.omega(word.clone());
        let patch = tiling.window(&query)?;
        let mut count = 0u64;
        let mut collar = 0u64;
        for t in &patch.tiles {
            let tb = closed_box(&t.support(&family.rule.prototiles)?);
            if meets(&tb, &a_set) {
                count += 1;
            }
            if meets_difference(&tb, &a_set, &s_set) || meets_difference(&tb, &s_set, &a_set) {
                collar += 1;
            }
        }
        let count = BigInt::from(count);
        let collar_count = BigInt::from(collar);
        Ok(GeometricSide {
            decomposition_holds: (&count - &nested_count).abs() <= collar_count,
            collar_bound_holds: Rational::from_integer(collar_count.clone()) <= collar_limit,
            count,
            collar_count,
        })
    };
    let omega_side = side(omega)?;
    let eta_side = side(eta)?;
    let quotient = Rational::new((&omega_side.count - &eta_side.count).abs(), boundary.clone());
    Ok(GeometricRow { omega: omega_side, eta: eta_side, quotient })
}

/// A finite bounded-displacement probe: is there a bijection moving every
/// point by at most `cap`?
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingInstance {
    pub left: Vec<Point<Rational>>,
    pub right: Vec<Point<Rational>>,
    pub cap: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A set on one side whose neighbourhood is strictly smaller than it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HallCertificate {
    pub side: Side,
    pub subset: Vec<usize>,
    pub neighbourhood: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingOutcome {
    pub feasible: bool,
    /// `matching[i]` is the right point paired with left point `i`.
    pub matching: Option<Vec<usize>>,
    pub certificate: Option<HallCertificate>,
    pub sizes_differ: bool,
}

fn within_sq(a: &Point<Rational>, b: &Point<Rational>, cap_sq: &Rational) -> bool {
    (a - b).norm_squared() <= *cap_sq
}

/// Both point sets rescaled by the least common denominator `l` of all
/// coordinates, so distances become integers.
struct IntegerPoints {
    left: Vec<Vec<BigInt>>,
    right: Vec<Vec<BigInt>>,
    scale: BigInt,
}

impl IntegerPoints {
    fn new(left: &[Point<Rational>], right: &[Point<Rational>]) -> Self {
        let scale = left
            .iter()
            .chain(right)
            .flat_map(|p| p.coords.iter())
            .fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let conv = |pts: &[Point<Rational>]| -> Vec<Vec<BigInt>> {
            pts.iter().map(|p| p.coords.iter().map(|c| (c * &scale).to_integer()).collect()).collect()
        };
        IntegerPoints { left: conv(left), right: conv(right), scale }
    }

    fn dist_sq(a: &[BigInt], b: &[BigInt]) -> BigInt {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Largest integer squared distance within the rational squared cap.
    fn cap_bound(&self, cap_sq: &Rational) -> BigInt {
        (cap_sq * Rational::from_integer(&self.scale * &self.scale)).floor().to_integer()
    }

    /// Grid-bucketed adjacency for integer squared radius `bound`.
    fn edges(&self, bound: &BigInt) -> Vec<Vec<usize>> {
        if bound.is_negative() {
            return vec![Vec::new(); self.left.len()];
        }
        if bound.is_zero() {
            let mut index: HashMap<&Vec<BigInt>, Vec<usize>> = HashMap::new();
            for (j, p) in self.right.iter().enumerate() {
                index.entry(p).or_default().push(j);
            }
            return self.left.iter().map(|p| index.get(p).cloned().unwrap_or_default()).collect();
        }
        let cell = bound.sqrt() + BigInt::one();
        let key = |p: &Vec<BigInt>| -> Vec<BigInt> { p.iter().map(|c| c.div_floor(&cell)).collect() };
        let mut grid: HashMap<Vec<BigInt>, Vec<usize>> = HashMap::new();
        for (j, p) in self.right.iter().enumerate() {
            grid.entry(key(p)).or_default().push(j);
        }
        let dim = self.left.first().or(self.right.first()).map_or(0, Vec::len);
        self.left
            .iter()
            .map(|p| {
                let base = key(p);
                let mut out = Vec::new();
                let mut offs = vec![-1i64; dim];
                loop {
                    let k: Vec<BigInt> = base.iter().zip(&offs).map(|(b, o)| b + BigInt::from(*o)).collect();
                    if let Some(js) = grid.get(&k) {
                        out.extend(js.iter().copied().filter(|&j| Self::dist_sq(p, &self.right[j]) <= *bound));
                    }
                    let mut axis = 0;
                    loop {
                        if axis == dim {
                            out.sort_unstable();
                            return out;
                        }
                        if offs[axis] < 1 {
                            offs[axis] += 1;
                            break;
                        }
                        offs[axis] = -1;
                        axis += 1;
                    }
                }
            })
            .collect()
    }
}

/// Adjacency by checking every pair; the reference for [`matching_edges`].
pub fn naive_edges(left: &[Point<Rational>], right: &[Point<Rational>], cap: &Rational) -> Vec<Vec<usize>> {
    let cap_sq = cap * cap;
    left.iter()
        .map(|p| (0..right.len()).filter(|&j| within_sq(p, &right[j], &cap_sq)).collect())
        .collect()
}

/// Grid-bucketed adjacency for `cap`.
pub fn matching_edges(inst: &MatchingInstance) -> Vec<Vec<usize>> {
    let pts = IntegerPoints::new(&inst.left, &inst.right);
    pts.edges(&pts.cap_bound(&(&inst.cap * &inst.cap)))
}

/// Hopcroft-Karp maximum matching; returns `(match_left, match_right)`.
pub fn maximum_matching(adj: &[Vec<usize>], n_right: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n_left = adj.len();
    let mut ml: Vec<Option<usize>> = vec![None; n_left];
    let mut mr: Vec<Option<usize>> = vec![None; n_right];
    let mut dist = vec![u32::MAX; n_left];
    loop {
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if ml[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match mr[v] {
                    None => found = true,
                    Some(w) if dist[w] == u32::MAX => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut next_edge = vec![0usize; n_left];
        for u in 0..n_left {
            if ml[u].is_none() {
                augment(u, adj, &mut ml, &mut mr, &mut dist, &mut next_edge);
            }
        }
    }
    (ml, mr)
}

fn augment(
    start: usize,
    adj: &[Vec<usize>],
    ml: &mut [Option<usize>],
    mr: &mut [Option<usize>],
    dist: &mut [u32],
    next_edge: &mut [usize],
) -> bool {
    // iterative DFS along the BFS layers
    let mut stack: Vec<usize> = vec![start];
    let mut via: Vec<usize> = Vec::new();
    while let Some(&u) = stack.last() {
        if next_edge[u] == adj[u].len() {
            dist[u] = u32::MAX;
            stack.pop();
            via.pop();
            continue;
        }
        let v = adj[u][next_edge[u]];
        next_edge[u] += 1;
        match mr[v] {
            None => {
                via.push(v);
                for (&l, &r) in stack.iter().zip(&via) {
                    ml[l] = Some(r);
                    mr[r] = Some(l);
                }
                return true;
            }
            Some(w) if dist[w] == dist[u] + 1 => {
                via.push(v);
                stack.push(w);
            }
            _ => {}
        }
    }
    false
}

/// Vertices reachable by alternating paths from the unmatched vertices of
/// `side`; their `side` part is a Hall violator.
fn hall_certificate(
    adj: &[Vec<usize>],
    n_right: usize,
    ml: &[Option<usize>],
    mr: &[Option<usize>],
    side: Side,
) -> HallCertificate {
    let n_left = adj.len();
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n_right];
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            radj[v].push(u);
        }
    }
    let (from_adj, from_match, to_match, n_from, n_to) = match side {
        Side::Left => (adj, ml, mr, n_left, n_right),
        Side::Right => (&radj[..], mr, ml, n_right, n_left),
    };
    let mut seen_from = vec![false; n_from];
    let mut seen_to = vec![false; n_to];
    let mut queue: VecDeque<usize> = (0..n_from).filter(|&u| from_match[u].is_none()).collect();
    for &u in &queue {
        seen_from[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &from_adj[u] {
            if !seen_to[v] {
                seen_to[v] = true;
                if let Some(w) = to_match[v] {
                    if !seen_from[w] {
                        seen_from[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
    }
    HallCertificate {
        side,
        subset: (0..n_from).filter(|&u| seen_from[u]).collect(),
        neighbourhood: (0..n_to).filter(|&v| seen_to[v]).collect(),
    }
}

/// Feasibility of a perfect matching within `cap`, with the matching or a
/// Hall-violating certificate.
pub fn bd_matching_feasible(inst: &MatchingInstance) -> MatchingOutcome {
    let adj = matching_edges(inst);
    outcome_from_edges(&adj, inst.left.len(), inst.right.len())
}

fn outcome_from_edges(adj: &[Vec<usize>], n_left: usize, n_right: usize) -> MatchingOutcome {
    let (ml, mr) = maximum_matching(adj, n_right);
    let matched = ml.iter().filter(|m| m.is_some()).count();
    let sizes_differ = n_left != n_right;
    if !sizes_differ && matched == n_left {
        return MatchingOutcome {
            feasible: true,
            matching: Some(ml.into_iter().map(|m| m.expect("perfect matching")).collect()),
            certificate: None,
            sizes_differ,
        };
    }
    let side = if matched < n_left { Side::Left } else { Side::Right };
    MatchingOutcome { feasible: false, matching: None, certificate: Some(hall_certificate(adj, n_right, &ml, &mr, side)), sizes_differ }
}

/// Whether `cert` really is a deficient set for `inst`.
pub fn verify_certificate(inst: &MatchingInstance, cert: &HallCertificate) -> bool {
    let adj = naive_edges(&inst.left, &inst.right, &inst.cap);
    let mut nbhd: Vec<usize> = match cert.side {
        Side::Left => cert.subset.iter().flat_map(|&u| adj[u].iter().copied()).collect(),
        Side::Right => (0..inst.left.len())
            .filter(|&u| adj[u].iter().any(|v| cert.subset.contains(v)))
            .collect(),
    };
    nbhd.sort_unstable();
    nbhd.dedup();
    nbhd == cert.neighbourhood && nbhd.len() < cert.subset.len()
}

/// The least cap admitting a perfect matching, as its square plus the
/// exact value when that is rational.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Displacement {
    pub squared: Rational,
    pub exact: Option<Rational>,
}

impl Displacement {
    pub fn approx(&self) -> f64 {
        self.squared.approx_f64().sqrt()
    }
}

pub fn min_displacement(left: &[Point<Rational>], right: &[Point<Rational>]) -> Result<Displacement> {
    if left.len() != right.len() {
        return Err(Error::Invalid(format!("point sets differ in size ({} vs {})", left.len(), right.len())));
    }
    if left.is_empty() {
        return Err(Error::Invalid("point sets are empty".into()));
    }
    let pts = IntegerPoints::new(left, right);
    let dists: Vec<Vec<BigInt>> =
        pts.left.iter().map(|p| pts.right.iter().map(|q| IntegerPoints::dist_sq(p, q)).collect()).collect();
    // lower bound: largest nearest-partner distance on either side
    let row_min = dists.iter().map(|row| row.iter().min().expect("nonempty")).max().expect("nonempty");
    let col_min = (0..right.len()).map(|j| dists.iter().map(|row| &row[j]).min().expect("nonempty")).max().expect("nonempty");
    let floor = row_min.max(col_min).clone();
    let mut candidates: Vec<BigInt> = dists
        .into_iter()
        .flatten()
        .filter(|d| *d >= floor)
        .collect::<std::collections::HashSet<_>>()
        .into_iter()
        .collect();
    candidates.sort();
    let feasible = |bound: &BigInt| -> bool {
        let (ml, _) = maximum_matching(&pts.edges(bound), right.len());
        ml.iter().all(Option::is_some)
    };
    // gallop up from the lower bound, then bisect
    let last = candidates.len() - 1;
    let (mut lo, mut hi) = (0usize, 0usize);
    while hi < last && !feasible(&candidates[hi]) {
        lo = hi + 1;
        hi = (2 * hi + 1).min(last);
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(&candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let squared = Rational::new(candidates[lo].clone(), &pts.scale * &pts.scale);
    Ok(Displacement { exact: exact_sqrt(&squared), squared })
}

/// One point per tile, at the centre of its support.
pub fn tile_centers(patch: &Patch<Rational>, shapes: &[Prototile<Rational>]) -> Result<Vec<Point<Rational>>> {
    patch.tiles.iter().map(|t| Ok(t.support(shapes)?.center())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i64, y: i64) -> Point<Rational> {
        Point::from_i64s(&[x, y])
    }

    #[test]
    fn interval_algebra() {
        let a = Interval::half_open(Rational::zero(), Rational::one());
        let b = Interval::closed(Rational::one(), Rational::from_i64(2));
        assert!(a.intersect(&b).is_empty());
        let c = Interval::closed(Rational::zero(), Rational::one());
        assert!(!c.intersect(&b).is_empty());
        assert!(a.subset_of(&c));
        assert!(!c.subset_of(&a));
    }

    #[test]
    fn sqrt_bounds() {
        assert_eq!(exact_sqrt(&Rational::from_frac(9, 4)), Some(Rational::from_frac(3, 2)));
        assert_eq!(exact_sqrt(&Rational::from_i64(2)), None);
        let s = sqrt_upper(&Rational::from_i64(2));
        assert!(&s * &s >= Rational::from_i64(2));
        assert!((s.approx_f64() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(exact_root(&Rational::from_i64(9), 2), Some(Rational::from_i64(3)));
        assert_eq!(exact_root(&Rational::from_i64(81), 4), Some(Rational::from_i64(3)));
    }

    #[test]
    fn identity_matching_at_zero_cap() {
        let pts: Vec<_> = (0..5).map(|i| p(i, 2 * i)).collect();
        let out = bd_matching_feasible(&MatchingInstance { left: pts.clone(), right: pts, cap: Rational::zero() });
        assert!(out.feasible);
        assert_eq!(out.matching.unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn half_shift_matching() {
        let left: Vec<_> = (0..10).map(|i| p(i, 0)).collect();
        let right: Vec<_> = left.iter().map(|q| Point::new(vec![&q.coords[0] + Rational::half(), Rational::zero()])).collect();
        let out = bd_matching_feasible(&MatchingInstance { left, right, cap: Rational::half() });
        assert!(out.feasible);
    }

    #[test]
    fn clustered_points_fail_with_certificate() {
        let left = vec![p(0, 0), Point::new(vec![Rational::half(), Rational::zero()]), p(0, 1), p(1, 1)];
        let right = vec![p(3, 0), p(20, 0), p(20, 5), p(25, 25)];
        let inst = MatchingInstance { left, right, cap: Rational::from_i64(5) };
        let out = bd_matching_feasible(&inst);
        assert!(!out.feasible);
        let cert = out.certificate.unwrap();
        assert!(verify_certificate(&inst, &cert));
        assert_eq!(cert.neighbourhood, vec![0]);
    }

    #[test]
    fn unequal_sizes_are_infeasible() {
        let inst = MatchingInstance { left: vec![p(0, 0), p(1, 0)], right: vec![p(0, 0)], cap: Rational::from_i64(10) };
        let out = bd_matching_feasible(&inst);
        assert!(!out.feasible && out.sizes_differ);
        assert!(verify_certificate(&inst, &out.certificate.unwrap()));
        let inst = MatchingInstance { left: vec![p(0, 0)], right: vec![p(0, 0), p(1, 0)], cap: Rational::from_i64(10) };
        let out = bd_matching_feasible(&inst);
        let cert = out.certificate.unwrap();
        assert_eq!(cert.side, Side::Right);
        assert!(verify_certificate(&inst, &cert));
    }

    #[test]
    fn displacement_examples() {
        let pts = vec![p(0, 0), p(3, 1)];
        assert_eq!(min_displacement(&pts, &pts).unwrap().squared, Rational::zero());
        let d = min_displacement(&[p(0, 0)], &[Point::new(vec![Rational::from_frac(7, 2), Rational::zero()])]).unwrap();
        assert_eq!(d.exact, Some(Rational::from_frac(7, 2)));
        let d = min_displacement(&[p(0, 0)], &[p(1, 1)]).unwrap();
        assert_eq!(d.squared, Rational::from_i64(2));
        assert_eq!(d.exact, None);
        assert!(min_displacement(&[p(0, 0)], &[]).is_err());
    }
}
