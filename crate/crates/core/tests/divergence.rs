use bdtile_core::analysis::{divergence_table, laczkovich_quotient, DEFAULT_ROW_BUDGET};
use bdtile_core::bundled::{example_patches, example_rule};
use bdtile_core::construction::{anchored_support, NestedFamily, OmegaWord, TilingWindow};
use bdtile_core::geometry::{boundary_measure, cube_cover, Aabb, Point};
use bdtile_core::spectral::{spectral_report, substitution_matrix, SpectralReport, DEFAULT_TOLERANCE};
use bdtile_core::substitution::DEFAULT_TILE_BUDGET;
use bdtile_core::{Error, Rational, Scalar};
use num_bigint::BigInt;
use num_traits::{One, Signed};

fn setup() -> (NestedFamily, SpectralReport) {
    let rule = example_rule();
    let m = substitution_matrix(&rule);
    let vols: Vec<Rational> = rule.prototiles.iter().map(|p| p.volume.clone()).collect();
    let report = spectral_report(&m, &vols, 2, DEFAULT_TOLERANCE).unwrap();
    let named = example_patches();
    let fam = NestedFamily::from_seeds(&rule, &named[0].1, &named[1].1, &report, DEFAULT_TILE_BUDGET).unwrap();
    (fam, report)
}

fn word(s: &str) -> OmegaWord {
    OmegaWord::parse(s).unwrap()
}

/// `#[A]^T` from an explicit cube list.
fn explicit_count(fam: &NestedFamily, tiling: &dyn TilingWindow, region: &Aabb<Rational>) -> usize {
    let cubes = cube_cover(region).unwrap();
    let hull: Aabb<Rational> = cubes.bounding_box().unwrap();
    let grown = Aabb {
        min: Point::new(hull.min.coords.iter().map(|c| c - Rational::one()).collect()),
        extents: hull.extents.iter().map(|e| e + Rational::from_i64(2)).collect(),
    };
    tiling
        .window(&grown)
        .unwrap()
        .tiles
        .iter()
        .filter(|t| cubes.meets_box(&t.support(&fam.rule.prototiles).unwrap()))
        .count()
}

#[test]
fn first_row_is_certified_geometrically() {
    let (fam, report) = setup();
    let table = divergence_table(&fam, &report, &word("PQQ"), &word("QQQ"), 6, DEFAULT_ROW_BUDGET).unwrap();
    assert_eq!(table.rows.len(), 1);
    let row = &table.rows[0];
    assert_eq!((row.m, row.index, row.k, row.k_prev), (1, 1, 1, 0));
    let geo = row.geometric.as_ref().expect("k = 1 fits the budget");
    assert!(geo.omega.decomposition_holds && geo.eta.decomposition_holds);
    assert!(geo.omega.collar_bound_holds && geo.eta.collar_bound_holds);

    let region = anchored_support(&fam.p, &fam.rule.inflation, 0);
    let cubes = cube_cover(&region).unwrap();
    let boundary: Rational = boundary_measure(&cubes).unwrap();
    assert_eq!(Rational::from_integer(row.boundary.clone()), boundary);
    assert_eq!(row.cubes, BigInt::from(cubes.len()));
    let omega = fam.omega(word("PQQ"));
    let eta = fam.omega(word("QQQ"));
    let c_omega = explicit_count(&fam, &omega, &region);
    let c_eta = explicit_count(&fam, &eta, &region);
    assert_eq!(geo.omega.count, BigInt::from(c_omega));
    assert_eq!(geo.eta.count, BigInt::from(c_eta));
    let expected = Rational::new(BigInt::from((c_omega as i64 - c_eta as i64).abs()), BigInt::one()) / boundary;
    assert_eq!(geo.quotient, expected);

    let q = laczkovich_quotient(&fam.rule.prototiles, &omega, &eta, &region).unwrap();
    assert_eq!(q.quotient, expected);
    assert_eq!(row.nested_difference, BigInt::from(6));
}

#[test]
fn nested_difference_at_k_four_is_1296() {
    let (fam, report) = setup();
    let table = divergence_table(&fam, &report, &word("P"), &word("Q"), 2, DEFAULT_ROW_BUDGET).unwrap();
    let row = &table.rows[1];
    assert_eq!(row.k, 4);
    assert_eq!(row.nested_difference, BigInt::from(1296));
    let full = |letter: bdtile_core::construction::Letter| {
        fam.rule.substitute_n(&fam.base(letter).patch, 3, DEFAULT_TILE_BUDGET).unwrap().len()
    };
    let oracle = full(bdtile_core::construction::Letter::Q) as i64 - full(bdtile_core::construction::Letter::P) as i64;
    assert_eq!(BigInt::from(oracle.abs()), row.nested_difference);
    let geo = row.geometric.as_ref().expect("k = 4 fits the budget");
    assert!(geo.omega.decomposition_holds && geo.eta.decomposition_holds);
}

#[test]
fn lower_bound_column_matches_hand_computation() {
    let (fam, report) = setup();
    let table = divergence_table(&fam, &report, &word("P"), &word("Q"), 6, DEFAULT_ROW_BUDGET).unwrap();
    let c = &table.constants;
    assert_eq!(c.c0, Rational::one());
    assert_eq!(c.c3, Rational::from_frac(26, 3));
    assert_eq!(c.ratio, Rational::from_i64(2));
    assert!(c.exact_ratio);
    assert_eq!(c.c1_squared, Rational::from_i64(3645));
    // c2 bounds 4 sqrt(2) * 3645 from above, tightly
    let target_sq = Rational::from_i64(32 * 3645 * 3645);
    assert!(&c.c2 * &c.c2 >= target_sq);
    assert!((c.c2.approx_f64() - 4.0 * 2f64.sqrt() * 3645.0).abs() < 1e-9);

    let two = Rational::from_i64(2);
    let nine = Rational::from_i64(9);
    for (m, row) in (1..).zip(&table.rows) {
        let k = 4u32.pow(m - 1);
        let k_prev = if m == 1 { 0 } else { 4u32.pow(m - 2) };
        let expected = Rational::from_frac(3, 26) * two.pow_u32(k) - Rational::from_i64(2) * &c.c2 * nine.pow_u32(k_prev);
        assert_eq!(row.lower_bound, expected, "m = {m}");
    }
    let lb: Vec<&Rational> = table.rows.iter().map(|r| &r.lower_bound).collect();
    assert!(lb[4] > lb[3] && lb[5] > lb[4]);
    assert!(lb[4].is_positive());
}

#[test]
fn exact_growth_ratio_is_unbounded() {
    let mut prev = Rational::from_i64(0);
    for k in 0..=20u32 {
        let diff = Rational::from_i64(6).pow_u32(k);
        let boundary = Rational::from_i64(6) * Rational::from_i64(3).pow_u32(k);
        let ratio = diff / boundary;
        assert_eq!(ratio, Rational::from_i64(2).pow_u32(k) / Rational::from_i64(6));
        assert!(ratio > prev);
        prev = ratio;
    }
}

#[test]
fn identical_words_are_refused() {
    let (fam, report) = setup();
    let err = divergence_table(&fam, &report, &word("PQ"), &word("PQQ"), 3, DEFAULT_ROW_BUDGET).unwrap_err();
    assert_eq!(err, Error::IdenticalWords);
}

#[test]
fn a_tiling_does_not_diverge_from_itself() {
    let (fam, _) = setup();
    let t = fam.omega(word("PQP"));
    let region = Aabb::new(Point::from_i64s(&[-7, -3]), vec![Rational::from_i64(20), Rational::from_i64(9)]).unwrap();
    let q = laczkovich_quotient(&fam.rule.prototiles, &t, &t, &region).unwrap();
    assert_eq!(q.quotient, Rational::from_i64(0));
    assert!(q.count_first > BigInt::from(0));
}

#[test]
fn table_does_not_depend_on_thread_count() {
    let (fam, report) = setup();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| divergence_table(&fam, &report, &word("PQ"), &word("QP"), 3, DEFAULT_ROW_BUDGET).unwrap())
    };
    assert_eq!(run(1), run(4));
}
