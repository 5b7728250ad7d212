//! Dense operator lab: fractional norms, the composite star space and
//! the uniform-in-h constants measured on it.

pub mod lemmas;
pub mod spectrum;
pub mod star;

pub use lemmas::*;
pub use spectrum::{decompose_dense, fractional_norm, spectral_decompose, Spectrum, DENSE_CAP};
pub use star::{embedding, star_norm, LerayProjector, StarSpace};
