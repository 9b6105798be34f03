use std::time::Instant;

use bdtile_core::analysis::{
    bd_matching_feasible, matching_edges, min_displacement, naive_edges, verify_certificate, MatchingInstance,
};
use bdtile_core::geometry::Point;
use bdtile_core::Rational;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points on the half-integer grid, also returned with doubled integer coordinates.
fn random_points(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Point<Rational>>, Vec<[i64; 2]>) {
    let raw: Vec<[i64; 2]> = (0..n).map(|_| [rng.gen_range(-8..=8), rng.gen_range(-8..=8)]).collect();
    let pts = raw
        .iter()
        .map(|c| Point::new(c.iter().map(|&v| Rational::new(BigInt::from(v), BigInt::from(2))).collect()))
        .collect();
    (pts, raw)
}

/// Least achievable maximum of `4 |l - r|^2` over all bijections, by
/// exhaustive search.
fn brute_force(left: &[[i64; 2]], right: &[[i64; 2]]) -> Option<i64> {
    fn go(i: usize, used: &mut [bool], cur: i64, best: &mut i64, d: &[Vec<i64>]) {
        if cur >= *best {
            return;
        }
        if i == d.len() {
            *best = cur;
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, used, cur.max(d[i][j]), best, d);
                used[j] = false;
            }
        }
    }
    if left.len() != right.len() {
        return None;
    }
    let d: Vec<Vec<i64>> = left
        .iter()
        .map(|a| right.iter().map(|b| (a[0] - b[0]).pow(2) + (a[1] - b[1]).pow(2)).collect())
        .collect();
    let mut best = i64::MAX;
    go(0, &mut vec![false; right.len()], 0, &mut best, &d);
    Some(if left.is_empty() { 0 } else { best })
}

#[test]
fn matching_equals_exhaustive_oracle() {
    let mut spent = std::time::Duration::ZERO;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..200 {
        let n = rng.gen_range(0..=8);
        let n_right = if trial % 10 == 0 { rng.gen_range(0..=8) } else { n };
        let (left, raw_left) = random_points(&mut rng, n);
        let (right, raw_right) = random_points(&mut rng, n_right);
        let best = brute_force(&raw_left, &raw_right);
        let mut was_feasible = false;
        for c in 0..=12i64 {
            let cap = Rational::new(BigInt::from(c), BigInt::from(2));
            let inst = MatchingInstance { left: left.clone(), right: right.clone(), cap: cap.clone() };
            let expected = best.is_some_and(|b| b <= c * c);
            let start = Instant::now();
            let out = bd_matching_feasible(&inst);
            spent += start.elapsed();
            assert_eq!(out.feasible, expected, "trial {trial}, cap {cap}");
            assert_eq!(matching_edges(&inst), naive_edges(&left, &right, &cap));
            assert!(!was_feasible || out.feasible, "feasibility is monotone in the cap");
            was_feasible = out.feasible;
            match out.matching {
                Some(m) => {
                    let mut seen = m.clone();
                    seen.sort_unstable();
                    seen.dedup();
                    assert_eq!(seen.len(), n);
                    for (i, &j) in m.iter().enumerate() {
                        assert!((&left[i] - &right[j]).norm_squared() <= &cap * &cap);
                    }
                }
                None => assert!(verify_certificate(&inst, out.certificate.as_ref().unwrap())),
            }
        }
        if n == n_right && n > 0 {
            let start = Instant::now();
            let d = min_displacement(&left, &right).unwrap();
            spent += start.elapsed();
            assert_eq!(d.squared, Rational::new(BigInt::from(best.unwrap()), BigInt::from(4)));
        }
    }
    assert!(spent.as_secs() < 10, "checker took {spent:?}");
}

#[test]
fn forged_certificates_are_rejected() {
    let pts: Vec<Point<Rational>> = (0..3).map(|i| Point::from_i64s(&[i, 0])).collect();
    let inst = MatchingInstance { left: pts.clone(), right: pts, cap: Rational::from_integer(BigInt::from(0)) };
    let fake = bdtile_core::analysis::HallCertificate {
        side: bdtile_core::analysis::Side::Left,
        subset: vec![0, 1],
        neighbourhood: vec![0],
    };
    assert!(!verify_certificate(&inst, &fake));
}

#[test]
fn larger_instances_match_shifted_lattices() {
    let left: Vec<Point<Rational>> = (0..30).flat_map(|x| (0..30).map(move |y| Point::from_i64s(&[x, y]))).collect();
    let shift = Rational::new(BigInt::from(1), BigInt::from(3));
    let right: Vec<Point<Rational>> =
        left.iter().map(|p| Point::new(p.coords.iter().map(|c| c + &shift).collect())).collect();
    let d = min_displacement(&left, &right).unwrap();
    assert_eq!(d.squared, Rational::new(BigInt::from(2), BigInt::from(9)));
}
