//! Fixed-point iteration schemes on W-hyperbolic spaces, a first-class
//! calculus of quantitative rates (Cauchy rates, rates of metastability,
//! rate transformers for viscosity-type iterations), moduli of uniqueness
//! for uniformly accretive operators, and an empirical verifier that checks
//! every computed bound on concrete desk-scale instances.
//!
//! The crate is generic over the scalar type through [`scalar::Real`]
//! (any `num_traits::Float`); the modulus calculus in [`uniqueness`] is
//! additionally usable with exact rational scalars through
//! [`scalar::Field`]. Concrete `f64` aliases live at the crate root.

pub mod error;
pub mod geometry;
pub mod mappings;
pub mod rate_calculus;
pub mod report;
pub mod scalar;
pub mod schemes;
pub mod transformers;
pub mod uniqueness;
pub mod verifier;

pub use error::{Error, Result};

/// `f64` instantiations of the core geometric and scheme types.
pub type Point64 = geometry::Point<f64>;
pub type Space64 = geometry::Space<f64>;
pub type Map64 = mappings::MapDescriptor<f64>;
pub type Family64 = mappings::MapFamily<f64>;
pub type Trajectory64 = schemes::Trajectory<f64>;
pub type CauchyRate64 = rate_calculus::CauchyRate<f64>;
pub type MetaRate64 = rate_calculus::MetaRate<f64>;
pub type ShiftedMetaRate64 = rate_calculus::ShiftedMetaRate<f64>;
pub type ProductRate64 = rate_calculus::ProductRate<f64>;
