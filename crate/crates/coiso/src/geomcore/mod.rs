//! Exterior and multivector calculus on a single coordinate chart.
//!
//! Fields are pointwise evaluators. Exterior derivatives come from a
//! [`DiffBackend`]: central differences by default, or exact derivative
//! hooks supplied with the field.

mod alt;
mod calculus;
mod chart;
mod diff;
mod fields;
pub mod poly;

pub use alt::{binomial, AltTensor};
pub use calculus::{
    exterior_derivative, function_times, interior_product, jacobiator, lie_bracket, lin_comb,
    pullback_form, pullback_scalar, wedge, ChartMap,
};
pub use chart::{Chart, DomainFn, Point};
pub use diff::{DiffBackend, DiffMode};
pub use fields::{Bivector, KForm, ScalarField, VectorField};
