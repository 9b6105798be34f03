use std::time::Instant;

use bdtile_core::bundled::example_rule;
use bdtile_core::geometry::{Aabb, Patch, PlacedTile, Point};
use bdtile_core::spectral::{count_vector, substitution_matrix, CountVector};
use bdtile_core::{RRule, Rational, Scalar};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain recursive substitution: every tile of rho^level(T) at `origin`.
fn dfs(rule: &RRule, prototile: usize, origin: &Point<Rational>, level: u32, out: &mut Vec<PlacedTile<Rational>>) {
    if level == 0 {
        out.push(PlacedTile::new(prototile, origin.clone()));
        return;
    }
    let scale = rule.inflation.pow_u32(level - 1);
    for child in &rule.children[prototile] {
        let o = Point::new(origin.coords.iter().zip(&child.offset.coords).map(|(a, b)| a + b * &scale).collect());
        dfs(rule, child.prototile, &o, level - 1, out);
    }
}

fn closed_meet(a: &Aabb<Rational>, b: &Aabb<Rational>) -> bool {
    (0..a.dim()).all(|j| a.lo(j) <= &b.hi(j) && b.lo(j) <= &a.hi(j))
}

fn random_query(rng: &mut ChaCha8Rng, width: i64, height: i64) -> Aabb<Rational> {
    let q = |rng: &mut ChaCha8Rng, hi: i64| Rational::new(BigInt::from(rng.gen_range(-8..=hi * 4)), BigInt::from(4));
    let (x0, x1) = (q(rng, width), q(rng, width));
    let (y0, y1) = (q(rng, height), q(rng, height));
    let (x0, x1) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
    let (y0, y1) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
    Aabb { extents: vec![&x1 - &x0, &y1 - &y0], min: Point::new(vec![x0, y0]) }
}

#[test]
fn full_expansion_census_matches_matrix_powers() {
    let start = Instant::now();
    let rule = example_rule();
    let m = substitution_matrix(&rule);
    for seed in 0..rule.len() {
        for k in 0..=4u32 {
            let patch = rule.expand_full(&PlacedTile::new(seed, Point::origin(2)), k, 10_000_000).unwrap();
            let census = CountVector::from_census(&patch.census(rule.len()));
            assert_eq!(census, count_vector(&m, &CountVector::unit(rule.len(), seed), k as u64), "seed {seed}, k {k}");
        }
    }
    let two = rule.expand_full(&PlacedTile::new(1, Point::origin(2)), 2, 10_000_000).unwrap();
    assert_eq!(two.len(), 96);
    assert_eq!(two.census(2), vec![30, 66]);
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn full_expansion_equals_recursive_oracle() {
    let rule = example_rule();
    for seed in 0..rule.len() {
        for k in 0..=4u32 {
            let mut tiles = Vec::new();
            dfs(&rule, seed, &Point::origin(2), k, &mut tiles);
            let oracle = Patch::new(tiles).canonical();
            let full = rule.expand_full(&PlacedTile::new(seed, Point::origin(2)), k, 10_000_000).unwrap();
            assert_eq!(full, oracle, "seed {seed}, k {k}");
        }
    }
}

#[test]
fn windows_match_filtered_full_expansion() {
    let rule = example_rule();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..rule.len() {
        for k in 0..=4u32 {
            let mut tiles = Vec::new();
            dfs(&rule, seed, &Point::origin(2), k, &mut tiles);
            let width = 3i64.pow(k) * if seed == 1 { 2 } else { 1 };
            for _ in 0..12 {
                let query = random_query(&mut rng, width, 3i64.pow(k));
                let expected = Patch::new(
                    tiles.iter().filter(|t| closed_meet(&t.support(&rule.prototiles).unwrap(), &query)).cloned().collect(),
                )
                .canonical();
                let window = rule.expand_window(&PlacedTile::new(seed, Point::origin(2)), k, &query).unwrap();
                assert_eq!(window.canonical(), expected, "seed {seed}, k {k}, query {query}");
            }
        }
    }
}

#[test]
fn windows_do_not_depend_on_thread_count() {
    let rule = example_rule();
    let query = Aabb::new(Point::from_i64s(&[100, 50]), vec![Rational::from_i64(200), Rational::from_i64(90)]).unwrap();
    let seed = PlacedTile::new(1, Point::origin(2));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| rule.expand_window(&seed, 8, &query).unwrap())
    };
    let one = run(1);
    assert!(one.len() > 1000);
    assert_eq!(run(4), one);
    assert_eq!(run(8), one);
}

#[test]
fn deep_window_is_lazy() {
    let rule = example_rule();
    let start = Instant::now();
    let query = Aabb::new(Point::from_i64s(&[1000, 2000]), vec![Rational::from_i64(6), Rational::from_i64(5)]).unwrap();
    let patch = rule.expand_window(&PlacedTile::new(1, Point::origin(2)), 16, &query).unwrap();
    assert!(start.elapsed().as_secs() < 5);
    let area: Rational = patch.tiles.iter().map(|t| t.support(&rule.prototiles).unwrap().volume()).sum();
    assert!(area >= Rational::from_i64(30));
    for t in &patch.tiles {
        assert!(closed_meet(&t.support(&rule.prototiles).unwrap(), &query));
    }
}
