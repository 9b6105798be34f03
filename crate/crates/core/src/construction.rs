//! Marked fixed points, the constants `a` and `h`, nested patch chains indexed
//! by words over `{P, Q}`, and windows of the resulting tilings.

use std::collections::BTreeMap;
use std::fmt;


use crate::error::{Error, Result};
use crate::geometry::{Aabb, Patch, Point};
use crate::scalar::{format_rational, Scalar};
use crate::spectral::{count_vector, substitution_matrix, Classification, CountVector, SpectralReport};
use crate::substitution::{first_interior_copy, Supertile, SubstitutionRule};
use crate::Rational;

/// Words longer than this are never built; `k_i` is astronomically large
/// long before.
const MAX_WORD_LEVELS: usize = 24;

/// Windows of a concrete tiling of `R^d`.
pub trait TilingWindow {
    /// All tiles whose support meets `query`, in canonical order.
    fn window(&self, query: &Aabb<Rational>) -> Result<Patch<Rational>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    P,
    Q,
}

impl Letter {
    pub fn other(self) -> Letter {
        match self {
            Letter::P => Letter::Q,
            Letter::Q => Letter::P,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Letter::P => "P",
            Letter::Q => "Q",
        })
    }
}

/// A nonempty finite word over `{P, Q}`, read as an infinite word by
/// repeating its last letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OmegaWord(Vec<Letter>);

impl OmegaWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Invalid("word must be nonempty".into()));
        }
        Ok(OmegaWord(letters))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let letters = text
            .trim()
            .chars()
            .map(|c| match c {
                'P' | 'p' => Ok(Letter::P),
                'Q' | 'q' => Ok(Letter::Q),
                other => Err(Error::Invalid(format!("word letter '{other}' is not P or Q"))),
            })
            .collect::<Result<Vec<_>>>()?;
        OmegaWord::new(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Letter `i` (1-based) of the extended word.
    pub fn letter(&self, i: usize) -> Letter {
        assert!(i >= 1, "letters are indexed from 1");
        *self.0.get(i - 1).unwrap_or_else(|| self.0.last().expect("nonempty word"))
    }

    /// The first `len` letters of the extended word.
    pub fn prefix(&self, len: usize) -> OmegaWord {
        OmegaWord((1..=len.max(1)).map(|i| self.letter(i)).collect())
    }

    /// Positions (1-based) up to `limit` where the extended words differ.
    pub fn disagreements(&self, other: &OmegaWord, limit: usize) -> Vec<usize> {
        (1..=limit).filter(|&i| self.letter(i) != other.letter(i)).collect()
    }
}

impl fmt::Display for OmegaWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A patch with box support and its marked point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedPatch {
    pub patch: Patch<Rational>,
    pub support: Aabb<Rational>,
    pub mark: Point<Rational>,
    /// Offset of the centered copy of `patch` inside `rho^a(patch)`.
    pub centered_offset: Point<Rational>,
}

impl MarkedPatch {
    /// The translate `P_x` that puts the mark at the origin.
    pub fn anchored(&self) -> Patch<Rational> {
        self.patch.translate(&-&self.mark)
    }
}

/// Mark of `p`: the fixed point of `x -> xi^(-a0) (x + o)`, where `p + o` is
/// the lexicographically first boundary-disjoint copy of `p` in `rho^a0(p)`.
pub fn fixed_point<S: Scalar>(rule: &SubstitutionRule<S>, p: &Patch<S>, a0: u32) -> Result<Point<S>> {
    let (offset, _) = centered_copy(rule, p, a0)?;
    let scale = rule.inflation.pow_u32(a0) - S::one();
    Ok(Point::new(offset.coords.into_iter().map(|c| c / scale.clone()).collect()))
}

/// `(o, supp p)` for the lexicographically first boundary-disjoint copy
/// `p + o` inside `rho^a0(p)`.
fn centered_copy<S: Scalar>(rule: &SubstitutionRule<S>, p: &Patch<S>, a0: u32) -> Result<(Point<S>, Aabb<S>)> {
    if a0 == 0 {
        return Err(Error::Invalid("level must be positive".into()));
    }
    let support = p.box_support(&rule.prototiles)?;
    let image = rule.substitute_n(p, a0, crate::substitution::DEFAULT_TILE_BUDGET)?;
    let container = support.scale(&rule.inflation.pow_u32(a0));
    let offset = first_interior_copy(&image, p, &support, &container).ok_or(Error::NoInteriorCopy { max_level: a0 })?;
    Ok((offset, support))
}

/// Whether two box supports differ by a translation.
pub fn supports_are_translates<S: Scalar>(rule: &SubstitutionRule<S>, p: &Patch<S>, q: &Patch<S>) -> Result<bool> {
    let sp = p.box_support(&rule.prototiles)?;
    let sq = q.box_support(&rule.prototiles)?;
    Ok(sp.extents == sq.extents)
}

/// `max` of the interior-copy levels of `(p, q)` and `(q, p)`.
pub fn compute_a<S: Scalar>(rule: &SubstitutionRule<S>, p: &Patch<S>, q: &Patch<S>, budget: u64) -> Result<u32> {
    if !supports_are_translates(rule, p, q)? {
        return Err(Error::SupportsNotTranslates);
    }
    let ap = rule.interior_copy_level(p, q, budget)?.level;
    let aq = rule.interior_copy_level(q, p, budget)?.level;
    Ok(ap.max(aq))
}

/// Smallest multiple `h` of `a` with `lambda1^(1/h) < |lambda_t| / lambda1^((d-1)/d)`.
pub fn compute_h(report: &SpectralReport, a: u32) -> Result<u32> {
    if a == 0 {
        return Err(Error::Invalid("a must be positive".into()));
    }
    if report.classification != Classification::Continuum {
        return Err(Error::NotContinuumRegime(report.classification.to_string()));
    }
    let lt = report.lambda_t().ok_or_else(|| Error::Invariant("continuum regime without lambda_t".into()))?;
    let d = report.dimension as u32;
    let lambda1 = &report.lambda1;
    let mut h = a;
    loop {
        // lambda1^(d + (d-1) h) < |lambda_t|^(d h)
        let holds = match &lt.exact_value {
            Some(v) => {
                let lhs = lambda1.pow_u32(d + (d - 1) * h);
                let rhs = num_traits::Signed::abs(v).pow_u32(d * h);
                lhs < rhs
            }
            None => {
                let lhs = (d + (d - 1) * h) as f64 * crate::scalar::big_ratio_to_f64(lambda1).ln();
                let rhs = (d * h) as f64 * lt.modulus().ln();
                if (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0) {
                    return Err(Error::Invalid(format!("h = {h} is too close to the threshold to decide in floating point")));
                }
                lhs < rhs
            }
        };
        if holds {
            return Ok(h);
        }
        h = h.checked_add(a).filter(|&v| v <= 1 << 20).ok_or_else(|| Error::Invalid("no admissible h below 2^20".into()))?;
    }
}

/// `k_i = h^(i-1)` for `i = 1..=count`, or an error on overflow.
pub fn k_schedule(h: u32, count: usize) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(count);
    let mut k: u64 = 1;
    for i in 0..count {
        if i > 0 {
            k = k.checked_mul(h as u64).ok_or_else(|| Error::Invalid("level schedule overflows".into()))?;
        }
        out.push(k);
    }
    Ok(out)
}

/// One level of a nested chain: the patch `rho^(k_i - 1)(X) + offset`, with
/// `X` the base patch of `letter`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPlacement {
    pub index: usize,
    pub letter: Letter,
    pub level: u64,
    pub offset: Point<Rational>,
    pub support: Aabb<Rational>,
    pub mark: Point<Rational>,
    /// Position of the previous level's patch relative to this level's
    /// untranslated `rho^(k_i - 1)(X)`.
    pub inner_offset: Option<Point<Rational>>,
}

impl LevelPlacement {
    /// Substitution depth applied to the base patch.
    pub fn depth(&self) -> u32 {
        (self.level - 1) as u32
    }
}

/// Outcome of checking the three chain properties.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ChainCheck {
    pub kinds_match: bool,
    pub nested: bool,
    pub contains_origin: bool,
    pub mark_bounds: bool,
    pub failures: Vec<String>,
}

impl ChainCheck {
    pub fn ok(&self) -> bool {
        self.kinds_match && self.nested && self.contains_origin && self.mark_bounds
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedPlacement {
    pub word: OmegaWord,
    pub chain: Vec<LevelPlacement>,
    pub check: ChainCheck,
}

impl NestedPlacement {
    pub fn top(&self) -> &LevelPlacement {
        self.chain.last().expect("chain is nonempty")
    }
}

/// The data behind the nested construction: base patches, their marks and
/// centered copies, and the constants `a` and `h`.
#[derive(Clone, Debug)]
pub struct NestedFamily {
    pub rule: SubstitutionRule<Rational>,
    pub p: MarkedPatch,
    pub q: MarkedPatch,
    pub a: u32,
    pub h: u32,
    /// `(outer, inner, depth) -> o` such that `inner + o` is the
    /// lexicographically first boundary-disjoint copy inside
    /// `rho^depth(outer)`.
    cross: BTreeMap<(Letter, Letter, u32), Point<Rational>>,
}

impl NestedFamily {
    /// Derive `a` from the patches and `h` from the spectral report.
    pub fn new(
        rule: &SubstitutionRule<Rational>,
        p: &Patch<Rational>,
        q: &Patch<Rational>,
        report: &SpectralReport,
        budget: u64,
    ) -> Result<Self> {
        let a = compute_a(rule, p, q, budget)?;
        let h = compute_h(report, a)?;
        NestedFamily::with_constants(rule, p, q, a, h, budget)
    }

    /// Base patches `rho(seed_p)` and `rho(seed_q)`.
    pub fn from_seeds(
        rule: &SubstitutionRule<Rational>,
        seed_p: &Patch<Rational>,
        seed_q: &Patch<Rational>,
        report: &SpectralReport,
        budget: u64,
    ) -> Result<Self> {
        let p = rule.substitute(seed_p)?.canonical();
        let q = rule.substitute(seed_q)?.canonical();
        NestedFamily::new(rule, &p, &q, report, budget)
    }

    pub fn with_constants(
        rule: &SubstitutionRule<Rational>,
        p: &Patch<Rational>,
        q: &Patch<Rational>,
        a: u32,
        h: u32,
        budget: u64,
    ) -> Result<Self> {
        if a == 0 || h == 0 || h % a != 0 {
            return Err(Error::Invalid(format!("h = {h} must be a positive multiple of a = {a}")));
        }
        if !supports_are_translates(rule, p, q)? {
            return Err(Error::SupportsNotTranslates);
        }
        let p = p.clone().canonical();
        let q = q.clone().canonical();
        let mark = |x: &Patch<Rational>| -> Result<MarkedPatch> {
            let (offset, support) = centered_copy(rule, x, a)?;
            let mark = fixed_point(rule, x, a)?;
            Ok(MarkedPatch { patch: x.clone(), support, mark, centered_offset: offset })
        };
        let mut family =
            NestedFamily { rule: rule.clone(), p: mark(&p)?, q: mark(&q)?, a, h, cross: BTreeMap::new() };
        let mut depths = vec![a];
        if let Some(first) = family.step_depth(1) {
            depths.push(first);
        }
        for depth in depths {
            for outer in [Letter::P, Letter::Q] {
                for inner in [Letter::P, Letter::Q] {
                    family.cross_copy(outer, inner, depth, budget)?;
                }
            }
        }
        Ok(family)
    }

    pub fn base(&self, letter: Letter) -> &MarkedPatch {
        match letter {
            Letter::P => &self.p,
            Letter::Q => &self.q,
        }
    }

    pub fn dimension(&self) -> usize {
        self.rule.dimension
    }

    /// `c1^2 = xi^(2a) diam(supp P)^2`.
    pub fn c1_squared(&self) -> Rational {
        self.rule.inflation.pow_u32(2 * self.a) * self.p.support.diameter_squared()
    }

    fn cross_copy(&mut self, outer: Letter, inner: Letter, depth: u32, budget: u64) -> Result<Point<Rational>> {
        if let Some(o) = self.cross.get(&(outer, inner, depth)) {
            return Ok(o.clone());
        }
        let container_patch = &self.base(outer).patch;
        let image = self.rule.substitute_n(container_patch, depth, budget)?;
        let container = self.base(outer).support.scale(&self.rule.inflation.pow_u32(depth));
        let needle = self.base(inner);
        let o = first_interior_copy(&image, &needle.patch, &needle.support, &container)
            .ok_or(Error::NoInteriorCopy { max_level: depth })?;
        self.cross.insert((outer, inner, depth), o.clone());
        Ok(o)
    }

    /// Depth `g` of the direct search in step `i -> i+1`; the remaining
    /// `k_(i+1) - k_i - g` levels are bridged by centered copies.
    fn step_depth(&self, i: usize) -> Option<u32> {
        let ks = k_schedule(self.h, i + 1).ok()?;
        let gap = ks[i] - ks[i - 1];
        let a = self.a as u64;
        if gap < a {
            return Some(gap as u32);
        }
        let q = (gap - a) / a;
        Some((gap - q * a) as u32)
    }

    /// Placement chain for the word, with all three properties checked.
    pub fn build_nested(&self, word: &OmegaWord) -> Result<NestedPlacement> {
        let len = word.len();
        if len > MAX_WORD_LEVELS {
            return Err(Error::Invalid(format!("words longer than {MAX_WORD_LEVELS} letters are not supported")));
        }
        let ks = k_schedule(self.h, len)?;
        if ks.iter().any(|&k| k - 1 > u32::MAX as u64) {
            return Err(Error::Invalid("level exceeds the supported range".into()));
        }
        let xi = &self.rule.inflation;
        let mut chain: Vec<LevelPlacement> = Vec::with_capacity(len);
        let first = self.base(word.letter(1));
        chain.push(LevelPlacement {
            index: 1,
            letter: word.letter(1),
            level: 1,
            offset: -&first.mark,
            support: first.support.translate(&-&first.mark),
            mark: Point::origin(self.dimension()),
            inner_offset: None,
        });
        for i in 1..len {
            let prev = &chain[i - 1];
            let x = word.letter(i + 1);
            let y = prev.letter;
            let e_in = (ks[i - 1] - 1) as u32;
            let e_out = (ks[i] - 1) as u32;
            let g = self.step_depth(i).ok_or_else(|| Error::Invalid("level schedule overflows".into()))?;
            let bridged = e_out - e_in - g;
            let o_x = &self.base(x).centered_offset;
            let mut inner = Point::origin(self.dimension());
            for m in 0..bridged / self.a {
                let scale = xi.pow_u32(e_out - (m + 1) * self.a);
                inner = &inner + &o_x.scale(&scale);
            }
            let cross = self
                .cross
                .get(&(x, y, g))
                .cloned()
                .ok_or_else(|| Error::Invariant(format!("missing centered copy at depth {g}")))?;
            inner = &inner + &cross.scale(&xi.pow_u32(e_in));
            let offset = &prev.offset - &inner;
            let base = self.base(x);
            let scale = xi.pow_u32(e_out);
            chain.push(LevelPlacement {
                index: i + 1,
                letter: x,
                level: ks[i],
                support: base.support.scale(&scale).translate(&offset),
                mark: &offset + &base.mark.scale(&scale),
                offset,
                inner_offset: Some(inner),
            });
        }
        let check = self.check_chain(word, &chain);
        Ok(NestedPlacement { word: word.clone(), chain, check })
    }

    fn check_chain(&self, word: &OmegaWord, chain: &[LevelPlacement]) -> ChainCheck {
        let mut check = ChainCheck { kinds_match: true, nested: true, contains_origin: true, mark_bounds: true, failures: Vec::new() };
        let origin = Point::origin(self.dimension());
        let c1_sq = self.c1_squared();
        for (j, level) in chain.iter().enumerate() {
            let base = self.base(level.letter);
            let expected = base.support.scale(&self.rule.inflation.pow_u32(level.depth())).translate(&level.offset);
            if level.letter != word.letter(j + 1) || level.support != expected {
                check.kinds_match = false;
                check.failures.push(format!("level {}: kind or support mismatch", j + 1));
            }
            if !level.support.contains_point(&origin) {
                check.contains_origin = false;
                check.failures.push(format!("level {}: origin outside support", j + 1));
            }
            if j > 0 {
                let prev = &chain[j - 1];
                if !level.support.contains_box_strictly(&prev.support) {
                    check.nested = false;
                    check.failures.push(format!("level {}: previous level touches the boundary", j + 1));
                }
                let bound = c1_sq.clone() * self.rule.inflation.pow_u32(2 * prev.level as u32);
                if level.mark.norm_squared() > bound {
                    check.mark_bounds = false;
                    check.failures.push(format!(
                        "level {}: |mark|^2 = {} exceeds {}",
                        j + 1,
                        format_rational(&level.mark.norm_squared()),
                        format_rational(&bound)
                    ));
                }
            }
        }
        check
    }

    /// Top-level supertiles making up the patch of `level`.
    pub fn level_supertiles(&self, level: &LevelPlacement) -> Vec<Supertile<Rational>> {
        let scale = self.rule.inflation.pow_u32(level.depth());
        self.base(level.letter)
            .patch
            .tiles
            .iter()
            .map(|t| Supertile { prototile: t.prototile, level: level.depth(), origin: &t.offset.scale(&scale) + &level.offset })
            .collect()
    }

    /// Tiles of the patch of `level` meeting `query`.
    pub fn level_window(&self, level: &LevelPlacement, query: &Aabb<Rational>) -> Result<Patch<Rational>> {
        self.rule.expand_supertiles(self.level_supertiles(level), query)
    }

    /// Census of the patch of `level`, from matrix powers.
    pub fn level_counts(&self, level: &LevelPlacement) -> CountVector {
        let m = substitution_matrix(&self.rule);
        let v = CountVector::from_census(&self.base(level.letter).patch.census(self.rule.len()));
        count_vector(&m, &v, level.depth() as u64)
    }

    pub fn omega(&self, word: OmegaWord) -> OmegaTiling<'_> {
        OmegaTiling { family: self, word }
    }
}

/// The tiling assembled from the nested chain of a word.
#[derive(Clone, Debug)]
pub struct OmegaTiling<'a> {
    pub family: &'a NestedFamily,
    pub word: OmegaWord,
}

impl OmegaTiling<'_> {
    /// Shortest chain whose top support strictly contains `query`.
    pub fn chain_covering(&self, query: &Aabb<Rational>) -> Result<NestedPlacement> {
        for len in 1..=MAX_WORD_LEVELS {
            let placement = self.family.build_nested(&self.word.prefix(len))?;
            if !placement.check.ok() {
                return Err(Error::Invariant(placement.check.failures.join("; ")));
            }
            if placement.top().support.contains_box_strictly(query) {
                return Ok(placement);
            }
        }
        Err(Error::Invalid("query is beyond the supported nesting depth".into()))
    }
}

impl TilingWindow for OmegaTiling<'_> {
    fn window(&self, query: &Aabb<Rational>) -> Result<Patch<Rational>> {
        let placement = self.chain_covering(query)?;
        self.family.level_window(placement.top(), query)
    }
}

/// The fixed-point tiling `U_m (rho^(m a)(P) - xi^(m a) x(P))`.
#[derive(Clone, Debug)]
pub struct FixedPointTiling {
    pub rule: SubstitutionRule<Rational>,
    pub base: MarkedPatch,
    pub a: u32,
}

impl FixedPointTiling {
    pub fn new(rule: &SubstitutionRule<Rational>, p: &Patch<Rational>, a: u32) -> Result<Self> {
        let (offset, support) = centered_copy(rule, p, a)?;
        let mark = fixed_point(rule, p, a)?;
        Ok(FixedPointTiling {
            rule: rule.clone(),
            base: MarkedPatch { patch: p.clone().canonical(), support, mark, centered_offset: offset },
            a,
        })
    }

    /// Support of the `m`-th nested patch.
    pub fn support(&self, m: u32) -> Aabb<Rational> {
        let scale = self.rule.inflation.pow_u32(m * self.a);
        self.base.support.translate(&-&self.base.mark).scale(&scale)
    }

    fn supertiles(&self, m: u32) -> Vec<Supertile<Rational>> {
        let depth = m * self.a;
        let scale = self.rule.inflation.pow_u32(depth);
        let shift = -&self.base.mark.scale(&scale);
        self.base
            .patch
            .tiles
            .iter()
            .map(|t| Supertile { prototile: t.prototile, level: depth, origin: &t.offset.scale(&scale) + &shift })
            .collect()
    }
}

impl TilingWindow for FixedPointTiling {
    fn window(&self, query: &Aabb<Rational>) -> Result<Patch<Rational>> {
        for m in 0..64 {
            if self.support(m).contains_box_strictly(query) {
                return self.rule.expand_supertiles(self.supertiles(m), query);
            }
        }
        Err(Error::Invalid("query is beyond the supported nesting depth".into()))
    }
}

/// `rho^k(p)` translated so that its mark `xi^k x(p)` sits at the origin.
pub fn anchored_support(base: &MarkedPatch, inflation: &Rational, depth: u32) -> Aabb<Rational> {
    base.support.translate(&-&base.mark).scale(&inflation.pow_u32(depth))
}

impl fmt::Display for LevelPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {} ({}, k = {}) at {}; support {}; mark {}", self.index, self.letter, self.level, self.offset, self.support, self.mark)
    }
}
