use std::collections::HashSet;
use std::time::Instant;

use bdtile_core::bundled::{example_patches, example_rule};
use bdtile_core::construction::{FixedPointTiling, Letter, NestedFamily, OmegaWord, TilingWindow};
use bdtile_core::geometry::{Aabb, Patch, Point};
use bdtile_core::spectral::{spectral_report, substitution_matrix, CountVector, SpectralReport, DEFAULT_TOLERANCE};
use bdtile_core::substitution::DEFAULT_TILE_BUDGET;
use bdtile_core::{RRule, Rational, Scalar};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(rule: &RRule) -> SpectralReport {
    let m = substitution_matrix(rule);
    let vols: Vec<Rational> = rule.prototiles.iter().map(|p| p.volume.clone()).collect();
    spectral_report(&m, &vols, rule.dimension, DEFAULT_TOLERANCE).unwrap()
}

fn example_family() -> NestedFamily {
    let rule = example_rule();
    let named = example_patches();
    NestedFamily::from_seeds(&rule, &named[0].1, &named[1].1, &report(&rule), DEFAULT_TILE_BUDGET).unwrap()
}

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| if rng.gen_bool(0.5) { 'P' } else { 'Q' }).collect()
}

fn closed_meet(a: &Aabb<Rational>, b: &Aabb<Rational>) -> bool {
    (0..a.dim()).all(|j| a.lo(j) <= &b.hi(j) && b.lo(j) <= &a.hi(j))
}

fn strictly_inside(outer: &Aabb<Rational>, inner: &Aabb<Rational>) -> bool {
    (0..outer.dim()).all(|j| outer.lo(j) < inner.lo(j) && inner.hi(j) < outer.hi(j))
}

fn filter(patch: &Patch<Rational>, rule: &RRule, query: &Aabb<Rational>) -> Patch<Rational> {
    Patch::new(
        patch.tiles.iter().filter(|t| closed_meet(&t.support(&rule.prototiles).unwrap(), query)).cloned().collect(),
    )
    .canonical()
}

#[test]
fn nested_chains_satisfy_the_three_properties() {
    let start = Instant::now();
    let fam = example_family();
    let xi = fam.rule.inflation.clone();
    let ext = &fam.p.support.extents;
    let c1_sq = xi.pow_u32(2 * fam.a) * ext.iter().map(|e| e * e).sum::<Rational>();
    let mut words: Vec<String> = ["PP", "PQ", "QP", "QQ"].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    words.extend((0..20).map(|_| random_word(&mut rng, 3)));
    for w in &words {
        let word = OmegaWord::parse(w).unwrap();
        let n = fam.build_nested(&word).unwrap();
        assert!(n.check.ok(), "{w}: {:?}", n.check.failures);
        let mut k_prev = 0u32;
        for (j, level) in n.chain.iter().enumerate() {
            let letter = word.letter(j + 1);
            assert_eq!(level.letter, letter);
            let k = 4u32.pow(j as u32);
            assert_eq!(level.level, k as u64);
            let base = fam.base(letter);
            let scale = xi.pow_u32(k - 1);
            let support = Aabb { min: &base.support.min.scale(&scale) + &level.offset, extents: base.support.extents.iter().map(|e| e * &scale).collect() };
            assert_eq!(level.support, support, "{w} level {}", j + 1);
            assert_eq!(level.mark, &level.offset + &base.mark.scale(&scale));
            assert!(level.support.contains_point(&Point::origin(2)));
            if j > 0 {
                assert!(strictly_inside(&level.support, &n.chain[j - 1].support), "{w} level {}", j + 1);
                assert!(level.mark.norm_squared() <= &c1_sq * xi.pow_u32(2 * k_prev), "{w} level {}", j + 1);
            } else {
                assert_eq!(level.mark, Point::origin(2));
            }
            k_prev = k;
        }
    }
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn level_counts_match_geometry() {
    let fam = example_family();
    for w in ["PP", "PQ", "QP", "QQ"] {
        let n = fam.build_nested(&OmegaWord::parse(w).unwrap()).unwrap();
        for level in &n.chain {
            let patch = fam.level_window(level, &level.support).unwrap();
            assert_eq!(CountVector::from_census(&patch.census(2)), fam.level_counts(level), "{w}");
        }
    }
}

#[test]
fn omega_windows_are_consistent() {
    let fam = example_family();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coord = |rng: &mut ChaCha8Rng, lo: i64, hi: i64| Rational::new(BigInt::from(rng.gen_range(lo * 2..=hi * 2)), BigInt::from(2));
    for _ in 0..50 {
        let tiling = fam.omega(OmegaWord::parse(&random_word(&mut rng, 6)).unwrap());
        let min = Point::new(vec![coord(&mut rng, -25, 5), coord(&mut rng, -25, 5)]);
        let big = Aabb { min: min.clone(), extents: vec![coord(&mut rng, 1, 25), coord(&mut rng, 1, 25)] };
        let inner_min = Point::new(
            (0..2).map(|j| big.lo(j) + &big.extents[j] * Rational::new(BigInt::from(rng.gen_range(0..=3)), BigInt::from(4))).collect(),
        );
        let small = Aabb {
            extents: (0..2).map(|j| (big.hi(j) - &inner_min.coords[j]) * Rational::new(BigInt::from(rng.gen_range(0..=4)), BigInt::from(4))).collect(),
            min: inner_min,
        };
        let w_big = tiling.window(&big).unwrap();
        let w_small = tiling.window(&small).unwrap();
        assert_eq!(filter(&w_big, &fam.rule, &small), w_small.canonical());
    }
}

#[test]
fn windows_from_longer_prefixes_agree() {
    let fam = example_family();
    let query = Aabb::new(Point::from_i64s(&[-3, -2]), vec![Rational::from_i64(6), Rational::from_i64(4)]).unwrap();
    for w in ["PQQPQP", "QQPPQP", "PPPPPP"] {
        let word = OmegaWord::parse(w).unwrap();
        let reference = fam.omega(word.clone()).window(&query).unwrap();
        for len in 2..=3 {
            let chain = fam.build_nested(&word.prefix(len)).unwrap();
            if strictly_inside(&chain.top().support, &query) {
                assert_eq!(fam.level_window(chain.top(), &query).unwrap(), reference, "{w} prefix {len}");
            }
        }
    }
}

#[test]
fn constant_word_window_matches_full_substitution() {
    let fam = example_family();
    let query = Aabb::new(Point::from_i64s(&[-1, -1]), vec![Rational::from_i64(2), Rational::from_i64(2)]).unwrap();
    let tiling = fam.omega(OmegaWord::parse("PPPP").unwrap());
    let chain = tiling.chain_covering(&query).unwrap();
    let top = chain.top();
    let full = fam.rule.substitute_n(&fam.base(top.letter).patch, top.depth(), DEFAULT_TILE_BUDGET).unwrap();
    let placed = full.translate(&top.offset);
    let expected = filter(&placed, &fam.rule, &query);
    assert!(!expected.is_empty());
    assert_eq!(tiling.window(&query).unwrap().canonical(), expected);
    let inner = fam.base(Letter::P).patch.translate(&chain.chain[0].offset);
    let present: HashSet<_> = placed.tiles.iter().collect();
    assert!(inner.tiles.iter().all(|t| present.contains(t)));
}

#[test]
fn constant_word_is_the_fixed_point_tiling_when_a_is_one() {
    let rule = example_rule();
    let square = Patch::single(0, Point::origin(2));
    let fam = NestedFamily::from_seeds(&rule, &square, &square, &report(&rule), DEFAULT_TILE_BUDGET).unwrap();
    assert_eq!(fam.a, 1);
    let fixed = FixedPointTiling::new(&rule, &fam.p.patch, 1).unwrap();
    let tiling = fam.omega(OmegaWord::parse("PPPP").unwrap());
    for (x, y, w, h) in [(-1, -1, 2, 2), (-10, -4, 15, 9), (-30, -20, 40, 50)] {
        let q = Aabb::new(Point::from_i64s(&[x, y]), vec![Rational::from_i64(w), Rational::from_i64(h)]).unwrap();
        assert_eq!(tiling.window(&q).unwrap().canonical(), fixed.window(&q).unwrap().canonical());
    }
}

#[test]
fn constant_word_matches_the_fixed_point_tiling_near_the_origin() {
    let fam = example_family();
    let fixed = FixedPointTiling::new(&fam.rule, &fam.p.patch, fam.a).unwrap();
    let tiling = fam.omega(OmegaWord::parse("PPPP").unwrap());
    for (x, y, w, h) in [(-1, -1, 2, 2), (-10, -4, 15, 9)] {
        let q = Aabb::new(Point::from_i64s(&[x, y]), vec![Rational::from_i64(w), Rational::from_i64(h)]).unwrap();
        assert_eq!(tiling.window(&q).unwrap().canonical(), fixed.window(&q).unwrap().canonical());
    }
}
