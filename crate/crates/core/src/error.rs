use thiserror::Error;

/// Errors raised by the tiling engine.
///
/// Validation problems with a rule or a cover are reported as values
/// ([`crate::geometry::CoverReport`], [`crate::substitution::RuleViolation`]);
/// this type is for operations that cannot produce a result at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("box extents must be positive")]
    NonPositiveExtent,

    #[error("unknown prototile index {0}")]
    UnknownPrototile(usize),

    #[error("the boundary of an empty cube union is undefined")]
    EmptyCubeUnion,

    #[error("tile budget exceeded: {needed} tiles needed, budget is {budget}; use a smaller level")]
    BudgetExceeded { needed: String, budget: u64 },

    #[error("no boundary-disjoint copy found up to level {max_level}")]
    NoInteriorCopy { max_level: u32 },

    #[error("patch support is not a box: {0}")]
    SupportNotBox(String),

    #[error("substitution matrix is not primitive")]
    NotPrimitive,

    #[error("defective eigenspace for eigenvalue {eigenvalue} (algebraic multiplicity {algebraic}, geometric {geometric})")]
    DefectiveEigenspace { eigenvalue: String, algebraic: usize, geometric: usize },

    #[error("patches have different volumes ({left} vs {right})")]
    VolumeMismatch { left: String, right: String },

    #[error("supports do not differ by a translation")]
    SupportsNotTranslates,

    #[error("classification is {0}; the construction needs the continuum regime")]
    NotContinuumRegime(String),

    #[error("the two words coincide")]
    IdenticalWords,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
