//! Closed differential algebra of compactly supported smooth functions.
//!
//! Layers, bottom up: [`atom`] holds the 1-D boundary-exponential atoms and
//! smooth steps; [`element`] assembles separable multi-axis terms with exact
//! partial derivatives of every order; [`func`] closes the algebra under
//! diagonal composition, pointwise products, and sums; [`seminorm`] computes
//! weighted derivative seminorms; [`units`] constructs and verifies
//! approximate units.

pub mod atom;
pub mod element;
pub mod func;
pub mod seminorm;
pub mod units;

pub use element::{Element, PlateauFunction};
pub use func::{Func, SupportInfo};
pub use seminorm::{seminorm, SeminormKind, SeminormParams, SeminormReport};
pub use units::{verify_unit, ApproximateUnit, Schedule, UnitKind};
