//! Exact transformations of computable measures on Cantor space by monotone
//! and prefix-free machines, stagewise synthesis of machines realizing
//! semicomputable semimeasures, universal mixtures and measure rebasing.
//!
//! Everything is generic over [`Scalar`]; the aliases below fix the exact
//! rational instance used by all contract computations.

pub mod approx;
pub mod bits;
pub mod construct;
pub mod cover;
pub mod error;
pub mod format;
pub mod machine;
pub mod measure;
pub mod mixture;
pub mod rebase;
pub mod scalar;
pub mod transform;
pub mod universal;

pub use bits::BitString;
pub use error::{Error, Result};
pub use machine::{MonotoneMachine, Pair, PairSet, PrefixFreeMachine};
pub use measure::ComputableMeasure;
pub use scalar::Scalar;

pub use num_bigint::BigInt;
pub use num_rational::BigRational;

/// Exact rational scalar.
pub type Rational = BigRational;
pub type Measure = ComputableMeasure<Rational>;
pub type MeasureF64 = ComputableMeasure<f64>;
pub type Approx = std::sync::Arc<dyn approx::SemimeasureApprox<Rational>>;
pub type Weights = mixture::WeightFunction<Rational>;
pub type Family = mixture::SemimeasureFamily<Rational>;

/// `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}
