use bdtile_core::geometry::{boundary_measure, cube_cover, Aabb, CubeBlock, CubeUnion, Point};
use bdtile_core::{Rational, Scalar};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Facets whose neighbour across the facet is missing.
fn facet_census(u: &CubeUnion) -> i64 {
    let mut n = 0;
    for c in u.centers() {
        for axis in 0..u.dim() {
            for step in [-1, 1] {
                let mut nb = c.clone();
                nb[axis] += step;
                if !u.contains(&nb) {
                    n += 1;
                }
            }
        }
    }
    n
}

fn random_union(rng: &mut ChaCha8Rng, dim: usize, size: usize, spread: i64) -> CubeUnion {
    let mut u = CubeUnion::new(dim);
    let mut cur = vec![0i64; dim];
    while u.len() < size {
        if rng.gen_bool(0.05) {
            cur = (0..dim).map(|_| rng.gen_range(-spread..=spread)).collect();
        } else {
            let axis = rng.gen_range(0..dim);
            cur[axis] += if rng.gen_bool(0.5) { 1 } else { -1 };
        }
        u.insert(cur.clone()).unwrap();
    }
    u
}

#[test]
fn boundary_matches_facet_census() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (dim, size) in [(1, 50), (2, 1), (2, 300), (2, 10_000), (3, 2_000), (4, 500)] {
        for _ in 0..3 {
            let u = random_union(&mut rng, dim, size, 2 * (size as f64).sqrt() as i64 + 2);
            let b: Rational = boundary_measure(&u).unwrap();
            assert_eq!(b, Rational::from_i64(facet_census(&u)), "dim {dim}, size {size}");
        }
    }
}

#[test]
fn block_agrees_with_explicit_cover() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let dim = rng.gen_range(1..=3);
        let min: Vec<Rational> = (0..dim).map(|_| Rational::new(BigInt::from(rng.gen_range(-40..40)), BigInt::from(4))).collect();
        let ext: Vec<Rational> = (0..dim).map(|_| Rational::new(BigInt::from(rng.gen_range(1..60)), BigInt::from(4))).collect();
        let region = Aabb::new(Point::new(min), ext).unwrap();
        let explicit = cube_cover(&region).unwrap();
        let block = CubeBlock::cover(&region);
        assert_eq!(block.cube_count(), BigInt::from(explicit.len()));
        let b: Rational = boundary_measure(&explicit).unwrap();
        assert_eq!(Rational::from_integer(block.boundary_measure()), b);
        assert_eq!(block.bounding_box::<Rational>(), explicit.bounding_box());
    }
}

#[test]
fn cover_of_a_box_hits_every_touching_cube() {
    let region = Aabb::new(Point::from_i64s(&[0, 0]), vec![Rational::from_i64(1), Rational::from_frac(1, 2)]).unwrap();
    let u = cube_cover(&region).unwrap();
    let expected = CubeUnion::from_centers(2, [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
    assert_eq!(u, expected);
    assert!(boundary_measure::<Rational>(&CubeUnion::new(2)).is_err());
}
