//! Exact engine for self-similar box tilings: substitution rules, their
//! spectra, nested-patch tilings built from two-letter words, and the
//! bounded-displacement diagnostics used to compare them.

pub mod analysis;
pub mod bundled;
pub mod construction;
pub mod error;
pub mod geometry;
pub mod io;
pub mod scalar;
pub mod spectral;
pub mod substitution;

use num_rational::BigRational;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Arbitrary-precision rational used throughout the concrete API.
pub type Rational = BigRational;

pub type RPoint = geometry::Point<Rational>;
pub type RAabb = geometry::Aabb<Rational>;
pub type RPrototile = geometry::Prototile<Rational>;
pub type RPlacedTile = geometry::PlacedTile<Rational>;
pub type RPatch = geometry::Patch<Rational>;
pub type RRule = substitution::SubstitutionRule<Rational>;
