//! Substitution rules on box prototiles: validation, patch substitution, lazy
//! window expansion of `rho^k(T)` and occurrence search.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{exact_cover_check, Aabb, CoverReport, Patch, PlacedTile, Point, Prototile};
use crate::scalar::{format_rational, Scalar};

/// Tile budget for full expansions.
pub const DEFAULT_TILE_BUDGET: u64 = 10_000_000;

/// Frontiers at least this large are filtered on the rayon pool.
const PARALLEL_FRONTIER: usize = 512;

/// A substitution rule: inflate prototile `i` by `inflation`, then tile the
/// inflated box by `children[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionRule<S> {
    pub dimension: usize,
    pub inflation: S,
    pub prototiles: Vec<Prototile<S>>,
    pub children: Vec<Vec<PlacedTile<S>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleViolation<S> {
    InflationNotExpanding { inflation: S },
    NoPrototiles,
    ChildListCount { prototiles: usize, lists: usize },
    PrototileDimension { prototile: usize, found: usize },
    UnknownChild { prototile: usize, child: usize },
    Cover { prototile: usize, report: CoverReport<S>, witness: Vec<PlacedTile<S>> },
}

impl<S: Scalar> fmt::Display for RuleViolation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tile = |t: &PlacedTile<S>| {
            let coords: Vec<String> = t.offset.coords.iter().map(format_rational).collect();
            format!("tile {} at ({})", t.prototile, coords.join(", "))
        };
        match self {
            RuleViolation::InflationNotExpanding { inflation } => {
                write!(f, "inflation factor {inflation} must exceed 1")
            }
            RuleViolation::NoPrototiles => write!(f, "rule has no prototiles"),
            RuleViolation::ChildListCount { prototiles, lists } => {
                write!(f, "{prototiles} prototiles but {lists} child lists")
            }
            RuleViolation::PrototileDimension { prototile, found } => {
                write!(f, "prototile {prototile} has dimension {found}")
            }
            RuleViolation::UnknownChild { prototile, child } => {
                write!(f, "prototile {prototile}: unknown child prototile {child}")
            }
            RuleViolation::Cover { prototile, report, witness } => {
                let names: Vec<String> = witness.iter().map(tile).collect();
                write!(f, "prototile {prototile}: {report}")?;
                if !names.is_empty() {
                    write!(f, " [{}]", names.join("; "))?;
                }
                Ok(())
            }
        }
    }
}

/// A level-`level` supertile `rho^level(T_prototile)` whose lower-left corner
/// sits at `origin`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Supertile<S> {
    pub prototile: usize,
    pub level: u32,
    pub origin: Point<S>,
}

/// Hierarchical coordinates into `rho^level(T_seed)`: `path[j]` picks a child
/// of the supertile reached after `j` steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SupertileAddress {
    pub seed: usize,
    pub level: u32,
    pub path: Vec<usize>,
}

/// A translated copy of a needle patch inside a haystack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence<S> {
    pub offset: Point<S>,
    pub content: Patch<S>,
}

/// Result of [`SubstitutionRule::interior_copy_level`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteriorCopies<S> {
    pub level: u32,
    /// Lexicographically smallest offset of a boundary-disjoint copy of `p`.
    pub self_offset: Point<S>,
    /// Same for `q`.
    pub other_offset: Point<S>,
}

impl<S: Scalar> SubstitutionRule<S> {
    pub fn new(
        inflation: S,
        prototiles: Vec<Prototile<S>>,
        children: Vec<Vec<PlacedTile<S>>>,
    ) -> Result<Self> {
        let dimension = prototiles.first().map(Prototile::dim).ok_or_else(|| Error::Invalid("no prototiles".into()))?;
        let mut rule = SubstitutionRule { dimension, inflation, prototiles, children };
        for list in &mut rule.children {
            list.sort();
        }
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.prototiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototiles.is_empty()
    }

    pub fn prototile_index(&self, name: &str) -> Option<usize> {
        self.prototiles.iter().position(|p| p.name == name)
    }

    /// All violations of the rule's invariants; empty when the rule is valid.
    pub fn validate(&self) -> Vec<RuleViolation<S>> {
        let mut out = Vec::new();
        if self.inflation <= S::one() {
            out.push(RuleViolation::InflationNotExpanding { inflation: self.inflation.clone() });
        }
        if self.prototiles.is_empty() {
            out.push(RuleViolation::NoPrototiles);
            return out;
        }
        if self.children.len() != self.prototiles.len() {
            out.push(RuleViolation::ChildListCount { prototiles: self.prototiles.len(), lists: self.children.len() });
            return out;
        }
        for (i, p) in self.prototiles.iter().enumerate() {
            if p.dim() != self.dimension {
                out.push(RuleViolation::PrototileDimension { prototile: i, found: p.dim() });
            }
        }
        if !out.is_empty() {
            return out;
        }
        for (i, kids) in self.children.iter().enumerate() {
            let mut ids_ok = true;
            for c in kids {
                if c.prototile >= self.prototiles.len() {
                    out.push(RuleViolation::UnknownChild { prototile: i, child: c.prototile });
                    ids_ok = false;
                } else if c.offset.dim() != self.dimension {
                    out.push(RuleViolation::PrototileDimension { prototile: i, found: c.offset.dim() });
                    ids_ok = false;
                }
            }
            if !ids_ok {
                continue;
            }
            let region = self.prototiles[i].support_at(&Point::origin(self.dimension)).scale(&self.inflation);
            let patch = Patch::new(kids.clone());
            match exact_cover_check(&self.prototiles, &patch, &region) {
                Ok(CoverReport::Ok) => {}
                Ok(report) => {
                    let witness = match &report {
                        CoverReport::Overlap { first, second } => vec![kids[*first].clone(), kids[*second].clone()],
                        CoverReport::OutsideRegion { tile } => vec![kids[*tile].clone()],
                        _ => Vec::new(),
                    };
                    out.push(RuleViolation::Cover { prototile: i, report, witness });
                }
                Err(_) => out.push(RuleViolation::PrototileDimension { prototile: i, found: 0 }),
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// `xi^k` for `k = 0..=max_level`.
    pub fn inflation_powers(&self, max_level: u32) -> Vec<S> {
        let mut powers = Vec::with_capacity(max_level as usize + 1);
        powers.push(S::one());
        for j in 1..=max_level as usize {
            let next = powers[j - 1].clone() * self.inflation.clone();
            powers.push(next);
        }
        powers
    }

    /// Apply the rule to every tile of `p`.
    pub fn substitute(&self, p: &Patch<S>) -> Result<Patch<S>> {
        p.check_ids(&self.prototiles)?;
        let mut out = Vec::with_capacity(p.tiles.iter().map(|t| self.children[t.prototile].len()).sum());
        for t in &p.tiles {
            let base = t.offset.scale(&self.inflation);
            for c in &self.children[t.prototile] {
                out.push(c.translate(&base));
            }
        }
        Ok(Patch::new(out))
    }

    /// `rho^levels(p)`, built by repeated substitution.
    pub fn substitute_n(&self, p: &Patch<S>, levels: u32, budget: u64) -> Result<Patch<S>> {
        p.check_ids(&self.prototiles)?;
        let needed = self.tile_count_after(&p.census(self.len()), levels);
        if needed > budget as u128 {
            return Err(Error::BudgetExceeded { needed: needed.to_string(), budget });
        }
        let mut cur = p.clone();
        for _ in 0..levels {
            cur = self.substitute(&cur)?;
        }
        Ok(cur)
    }

    /// Tile count of `rho^levels` applied to a patch with the given census
    /// (saturating).
    pub fn tile_count_after(&self, census: &[u64], levels: u32) -> u128 {
        let n = self.len();
        let matrix = self.column_counts();
        let mut v: Vec<u128> = census.iter().map(|&c| c as u128).collect();
        for _ in 0..levels {
            let mut next = vec![0u128; n];
            for (j, &vj) in v.iter().enumerate() {
                for (i, &a) in matrix[j].iter().enumerate() {
                    next[i] = next[i].saturating_add(vj.saturating_mul(a as u128));
                }
            }
            v = next;
            if v.iter().any(|&x| x == u128::MAX) {
                break;
            }
        }
        v.iter().fold(0u128, |acc, &x| acc.saturating_add(x))
    }

    /// `column_counts()[j][i]` = number of type-`i` children of prototile `j`.
    pub fn column_counts(&self) -> Vec<Vec<u64>> {
        self.children
            .iter()
            .map(|kids| {
                let mut counts = vec![0u64; self.len()];
                for c in kids {
                    counts[c.prototile] += 1;
                }
                counts
            })
            .collect()
    }

    pub fn supertile_support(&self, st: &Supertile<S>, powers: &[S]) -> Aabb<S> {
        let scale = &powers[st.level as usize];
        Aabb {
            min: st.origin.clone(),
            extents: self.prototiles[st.prototile].extents.iter().map(|e| e.clone() * scale.clone()).collect(),
        }
    }

    /// Level-`level` supertile grown from a seed tile placed at `offset`.
    pub fn supertile_from_seed(&self, seed: &PlacedTile<S>, level: u32) -> Supertile<S> {
        let scale = self.inflation.pow_u32(level);
        Supertile { prototile: seed.prototile, level, origin: seed.offset.scale(&scale) }
    }

    pub fn supertile_children(&self, st: &Supertile<S>, powers: &[S]) -> Vec<Supertile<S>> {
        debug_assert!(st.level > 0);
        let scale = &powers[st.level as usize - 1];
        self.children[st.prototile]
            .iter()
            .map(|c| Supertile {
                prototile: c.prototile,
                level: st.level - 1,
                origin: &st.origin + &c.offset.scale(scale),
            })
            .collect()
    }

    /// Tiles of the union of the given supertiles that meet `query`, found by
    /// descending only into supertiles whose support meets `query`.
    pub fn expand_supertiles(&self, tops: Vec<Supertile<S>>, query: &Aabb<S>) -> Result<Patch<S>> {
        for st in &tops {
            if st.prototile >= self.len() {
                return Err(Error::UnknownPrototile(st.prototile));
            }
            if st.origin.dim() != self.dimension || query.dim() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, found: st.origin.dim() });
            }
        }
        let max_level = tops.iter().map(|s| s.level).max().unwrap_or(0);
        let powers = self.inflation_powers(max_level);
        let mut frontier: Vec<Supertile<S>> = tops
            .into_iter()
            .filter(|st| self.supertile_support(st, &powers).intersects(query))
            .collect();
        let mut done: Vec<PlacedTile<S>> = Vec::new();
        while !frontier.is_empty() {
            let (leaves, inner): (Vec<_>, Vec<_>) = frontier.into_iter().partition(|st| st.level == 0);
            done.extend(leaves.into_iter().map(|st| PlacedTile::new(st.prototile, st.origin)));
            let step = |st: &Supertile<S>| -> Vec<Supertile<S>> {
                self.supertile_children(st, &powers)
                    .into_iter()
                    .filter(|c| self.supertile_support(c, &powers).intersects(query))
                    .collect()
            };
            frontier = if inner.len() >= PARALLEL_FRONTIER {
                inner.par_iter().flat_map_iter(step).collect()
            } else {
                inner.iter().flat_map(step).collect()
            };
        }
        Ok(Patch::new(done).canonical())
    }

    /// Tiles of `rho^k(seed)` whose support meets `query`.
    pub fn expand_window(&self, seed: &PlacedTile<S>, k: u32, query: &Aabb<S>) -> Result<Patch<S>> {
        if seed.prototile >= self.len() {
            return Err(Error::UnknownPrototile(seed.prototile));
        }
        self.expand_supertiles(vec![self.supertile_from_seed(seed, k)], query)
    }

    /// The whole of `rho^k(seed)`, subject to a tile budget.
    pub fn expand_full(&self, seed: &PlacedTile<S>, k: u32, budget: u64) -> Result<Patch<S>> {
        Ok(self.substitute_n(&Patch::new(vec![seed.clone()]), k, budget)?.canonical())
    }

    pub fn resolve_address(&self, address: &SupertileAddress, seed_offset: &Point<S>) -> Result<Supertile<S>> {
        if address.seed >= self.len() {
            return Err(Error::UnknownPrototile(address.seed));
        }
        if address.path.len() > address.level as usize {
            return Err(Error::Invalid(format!(
                "address path of length {} exceeds level {}",
                address.path.len(),
                address.level
            )));
        }
        let powers = self.inflation_powers(address.level);
        let mut st = self.supertile_from_seed(&PlacedTile::new(address.seed, seed_offset.clone()), address.level);
        for &step in &address.path {
            let kids = self.supertile_children(&st, &powers);
            st = kids
                .into_iter()
                .nth(step)
                .ok_or_else(|| Error::Invalid(format!("child index {step} out of range")))?;
        }
        Ok(st)
    }

    /// All translates of `needle` that are sub-patches of `rho^m(T_seed)`.
    pub fn occurrences(&self, seed: usize, m: u32, needle: &Patch<S>, budget: u64) -> Result<Vec<Occurrence<S>>> {
        needle.check_ids(&self.prototiles)?;
        let haystack = self.expand_full(&PlacedTile::new(seed, Point::origin(self.dimension)), m, budget)?;
        Ok(find_copies(&haystack, needle)
            .into_iter()
            .map(|offset| Occurrence { content: needle.translate(&offset), offset })
            .collect())
    }

    /// Smallest `a0 >= 1` such that `rho^a0(p)` contains translated copies of
    /// both `p` and `q` whose supports avoid the boundary of
    /// `supp rho^a0(p)`. The support of `p` must be a box.
    pub fn interior_copy_level(&self, p: &Patch<S>, q: &Patch<S>, budget: u64) -> Result<InteriorCopies<S>> {
        p.check_ids(&self.prototiles)?;
        q.check_ids(&self.prototiles)?;
        if p.is_empty() || q.is_empty() {
            return Err(Error::Invalid("patches must be nonempty".into()));
        }
        let support = p.box_support(&self.prototiles)?;
        let p_box = support.clone();
        let q_box = q
            .bounding_box(&self.prototiles)?
            .ok_or_else(|| Error::Invalid("empty patch".into()))?;
        let mut level = 0u32;
        let mut image = p.clone();
        let mut container = support;
        loop {
            level += 1;
            let needed = self.tile_count_after(&p.census(self.len()), level);
            if needed > budget as u128 {
                return Err(Error::BudgetExceeded { needed: needed.to_string(), budget });
            }
            image = self.substitute(&image)?;
            container = container.scale(&self.inflation);
            let own = first_interior_copy(&image, p, &p_box, &container);
            let other = first_interior_copy(&image, q, &q_box, &container);
            if let (Some(self_offset), Some(other_offset)) = (own, other) {
                return Ok(InteriorCopies { level, self_offset, other_offset });
            }
        }
    }
}

/// Offsets `o` (sorted) such that `needle + o` is a sub-patch of `haystack`.
pub fn find_copies<S: Scalar>(haystack: &Patch<S>, needle: &Patch<S>) -> Vec<Point<S>> {
    let needle = needle.clone().canonical();
    let Some(anchor) = needle.tiles.first() else {
        return Vec::new();
    };
    let present: HashSet<&PlacedTile<S>> = haystack.tiles.iter().collect();
    let mut found: Vec<Point<S>> = haystack
        .tiles
        .iter()
        .filter(|h| h.prototile == anchor.prototile)
        .map(|h| &h.offset - &anchor.offset)
        .filter(|o| needle.tiles.iter().all(|t| present.contains(&t.translate(o))))
        .collect();
    found.sort();
    found.dedup();
    found
}

/// Lexicographically smallest offset of a copy of `needle` in `haystack`
/// whose support (bounding box `needle_box`, moved by the offset) lies in the
/// open interior of `container`.
pub fn first_interior_copy<S: Scalar>(
    haystack: &Patch<S>,
    needle: &Patch<S>,
    needle_box: &Aabb<S>,
    container: &Aabb<S>,
) -> Option<Point<S>> {
    find_copies(haystack, needle)
        .into_iter()
        .find(|o| container.contains_box_strictly(&needle_box.translate(o)))
}

impl<S: Scalar> SubstitutionRule<S> {
    /// `xi^d`, the volume inflation.
    pub fn volume_inflation(&self) -> S {
        self.inflation.pow_u32(self.dimension as u32)
    }

    pub fn min_prototile_volume(&self) -> S {
        self.prototiles.iter().map(|p| p.volume.clone()).min().unwrap_or_else(S::one)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use crate::bundled::example_rule;
    use crate::Rational;

    fn pt(x: i64, y: i64) -> Point<Rational> {
        Point::from_i64s(&[x, y])
    }

    fn bx(x0: i64, y0: i64, x1: i64, y1: i64) -> Aabb<Rational> {
        Aabb::from_corners(pt(x0, y0), pt(x1, y1)).unwrap()
    }

    #[test]
    fn bundled_rule_is_valid() {
        assert!(example_rule().validate().is_empty());
    }

    #[test]
    fn deleting_a_child_leaves_a_unit_deficit() {
        let mut rule = example_rule();
        rule.children[0].pop();
        let v = rule.validate();
        assert_eq!(v.len(), 1);
        match &v[0] {
            RuleViolation::Cover { prototile: 0, report: CoverReport::VolumeMismatch { expected, actual }, .. } => {
                assert_eq!(expected.clone() - actual.clone(), Rational::one());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shifted_child_overlaps() {
        let mut rule = example_rule();
        let idx = rule.children[0].iter().position(|c| c.offset == pt(1, 1)).unwrap();
        rule.children[0][idx].offset = Point::new(vec![Rational::from_frac(3, 2), Rational::one()]);
        let v = rule.validate();
        assert!(matches!(v.as_slice(), [RuleViolation::Cover { report: CoverReport::Overlap { .. }, .. }]), "{v:?}");
    }

    #[test]
    fn non_expanding_inflation_is_rejected() {
        let mut rule = example_rule();
        rule.inflation = Rational::one();
        assert!(rule
            .validate()
            .iter()
            .any(|v| matches!(v, RuleViolation::InflationNotExpanding { .. })));
    }

    #[test]
    fn single_substitutions_match_matrix_columns() {
        let rule = example_rule();
        let r1 = rule.substitute(&Patch::single(0, pt(0, 0))).unwrap();
        assert_eq!(r1.census(2), vec![7, 1]);
        let r2 = rule.substitute(&Patch::single(1, pt(0, 0))).unwrap();
        assert_eq!(r2.census(2), vec![2, 8]);
        assert_eq!(r2.box_support(&rule.prototiles).unwrap(), bx(0, 0, 6, 3));
        assert!(rule.substitute(&Patch::empty()).unwrap().is_empty());
        assert_eq!(rule.substitute(&Patch::single(7, pt(0, 0))), Err(Error::UnknownPrototile(7)));
    }

    #[test]
    fn window_over_whole_support_of_level_two() {
        let rule = example_rule();
        let seed = PlacedTile::new(1, pt(0, 0));
        let w = rule.expand_window(&seed, 2, &bx(0, 0, 18, 9)).unwrap();
        assert_eq!(w.len(), 96);
        assert_eq!(w.census(2), vec![30, 66]);
    }

    #[test]
    fn level_zero_window_is_the_seed_filter() {
        let rule = example_rule();
        let seed = PlacedTile::new(1, pt(4, 4));
        assert_eq!(rule.expand_window(&seed, 0, &bx(0, 0, 4, 4)).unwrap().len(), 1);
        assert!(rule.expand_window(&seed, 0, &bx(0, 0, 3, 3)).unwrap().is_empty());
    }

    #[test]
    fn occurrences_in_first_inflation_of_square() {
        let rule = example_rule();
        let single = Patch::single(0, pt(0, 0));
        assert_eq!(rule.occurrences(0, 1, &single, DEFAULT_TILE_BUDGET).unwrap().len(), 7);
        let pair = Patch::new(vec![PlacedTile::new(0, pt(0, 0)), PlacedTile::new(0, pt(1, 0))]);
        let pairs = rule.occurrences(0, 1, &pair, DEFAULT_TILE_BUDGET).unwrap();
        assert_eq!(pairs.iter().map(|o| o.offset.clone()).collect::<Vec<_>>(), vec![pt(0, 1), pt(0, 2), pt(1, 1), pt(1, 2)]);
    }

    #[test]
    fn occurrence_budget_is_enforced() {
        let rule = example_rule();
        let err = rule.occurrences(1, 12, &Patch::single(0, pt(0, 0)), 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn interior_square_appears_at_level_one() {
        let rule = example_rule();
        let t1 = Patch::single(0, pt(0, 0));
        let found = rule.interior_copy_level(&t1, &t1, DEFAULT_TILE_BUDGET).unwrap();
        assert_eq!(found.level, 1);
        assert_eq!(found.self_offset, pt(1, 1));
    }

    #[test]
    fn interior_copy_rejects_unknown_tiles() {
        let rule = example_rule();
        let bad = Patch::single(5, pt(0, 0));
        assert_eq!(
            rule.interior_copy_level(&bad, &bad, DEFAULT_TILE_BUDGET),
            Err(Error::UnknownPrototile(5))
        );
    }

    #[test]
    fn addresses_resolve_to_nested_supports() {
        let rule = example_rule();
        let addr = SupertileAddress { seed: 1, level: 2, path: vec![0, 0] };
        let st = rule.resolve_address(&addr, &pt(0, 0)).unwrap();
        assert_eq!(st.level, 0);
        assert_eq!(st.origin, pt(0, 0));
        let bad = SupertileAddress { seed: 1, level: 1, path: vec![0, 0] };
        assert!(rule.resolve_address(&bad, &pt(0, 0)).is_err());
    }
}
