//! Exact transform synthesis.
//!
//! Everything in here runs on arbitrary-precision rationals. Floating point
//! only appears when a [`TransformSet`] is exported or handed to the
//! convolution engine.

mod crt;
mod document;
mod poly;
mod transforms;

pub use crt::{crt_basis, fast_vector_convolve_crt, CrtBasis};
pub use document::parse_rational;
pub use poly::{poly_mul, RationalPoly};
pub use transforms::{
    avx_aware_size, default_points, matrix_sparsity, synthesize_transforms, validate_transforms, InterpolationPoint,
    TransformSet, ValidationReport, Violation,
};

use num_rational::BigRational;
use thiserror::Error;

/// Exact rational scalar used throughout synthesis.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("division by zero polynomial")]
    DivisionByZero,
    #[error("modulus {index} has degree {degree}; every modulus needs degree >= 1")]
    ConstantModulus { index: usize, degree: usize },
    #[error("moduli {first} and {second} are not coprime (gcd = {gcd})")]
    NotCoprime { first: usize, second: usize, gcd: String },
    #[error("modulus degree too small: deg m = {modulus_degree}, need > {product_degree}")]
    ModulusDegreeTooSmall {
        modulus_degree: usize,
        product_degree: usize,
    },
    #[error("output and kernel sizes must be positive (got S={s}, G={g})")]
    InvalidSize { s: usize, g: usize },
    #[error("expected {expected} interpolation points, got {actual}")]
    PointCount { expected: usize, actual: usize },
    #[error("duplicate interpolation point {0}")]
    DuplicatePoint(String),
    #[error("invalid interpolation point {0:?}")]
    InvalidPoint(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no tile size D <= {limit} satisfies the vector-width constraints for G={g}, N={ndim}, W={width}")]
    NoAvxSize {
        g: usize,
        ndim: usize,
        width: usize,
        limit: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed transform document: {0}")]
    Document(String),
}
