//! Seeded sparse Johnson-Lindenstrauss embeddings built on bounded-independence
//! polynomial hashing, with a turnstile sketch, a dense warm-up family, a
//! seed-saving cascade, and diagnostics that measure the quantities
//! controlling the distortion tail.

pub mod cascade;
pub mod dense;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod hash;
pub mod multipoint;
pub mod numeric;
pub mod profile;
pub mod sparse;

pub use cascade::{crossover_table, plan_cascade, CascadePlan, CascadeTransform, CrossoverRow};
pub use dense::{plan_dense, DenseJLMatrix, DenseJLParams};
pub use error::{Error, Result};
pub use field::FieldPrime;
pub use hash::PolyHashFamily;
pub use profile::Profile;
pub use sparse::{
    plan_sparse, spread, SparseJLTransform, SparseParams, TransformDescriptor, TurnstileSketch,
};
