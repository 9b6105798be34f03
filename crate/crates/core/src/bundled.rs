//! The bundled two-tile example rule: a unit square `T1` and a `2 x 1`
//! domino `T2`, inflated by 3.

use crate::geometry::{Patch, PlacedTile, Point, Prototile};
use crate::substitution::SubstitutionRule;
use crate::Rational;
use crate::scalar::Scalar;

fn at(prototile: usize, x: i64, y: i64) -> PlacedTile<Rational> {
    PlacedTile::new(prototile, Point::from_i64s(&[x, y]))
}

pub fn example_rule() -> SubstitutionRule<Rational> {
    let one = Rational::from_i64(1);
    let two = Rational::from_i64(2);
    let prototiles = vec![
        Prototile::new("T1", vec![one.clone(), one.clone()]).expect("positive extents"),
        Prototile::new("T2", vec![two, one]).expect("positive extents"),
    ];
    let square = vec![
        at(1, 0, 0),
        at(0, 2, 0),
        at(0, 0, 1),
        at(0, 1, 1),
        at(0, 2, 1),
        at(0, 0, 2),
        at(0, 1, 2),
        at(0, 2, 2),
    ];
    let domino = vec![
        at(1, 0, 0),
        at(1, 2, 0),
        at(1, 4, 0),
        at(1, 0, 1),
        at(1, 2, 1),
        at(1, 4, 1),
        at(1, 0, 2),
        at(1, 2, 2),
        at(0, 4, 2),
        at(0, 5, 2),
    ];
    SubstitutionRule::new(Rational::from_i64(3), prototiles, vec![square, domino]).expect("nonempty rule")
}

/// Named seed patches shipped with the example: `R1` is one domino, `S1` two
/// squares side by side. Both have the same 2 x 1 support.
pub fn example_patches() -> Vec<(String, Patch<Rational>)> {
    vec![
        ("R1".to_string(), Patch::new(vec![at(1, 0, 0)])),
        ("S1".to_string(), Patch::new(vec![at(0, 0, 0), at(0, 1, 0)])),
    ]
}
