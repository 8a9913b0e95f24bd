//! Desk-scale numerical calculus for Roumieu-type ultradifferentiable classes.
//!
//! The library certifies weight-sequence conditions on finite prefixes, works
//! with the class 𝔕 of monotone sequences and their product sequences,
//! implements Komatsu-style growth/decay duality certificates, provides a
//! closed differential algebra of compactly supported bump functions with
//! exact derivatives of every order, builds and verifies 𝔕-approximate
//! units, evaluates sequential convolutions of concretely represented
//! ultradistributions in the four classical modes, and checks the exchange
//! identity P(D)(S∗T) = (P(D)S)∗T = S∗(P(D)T) for ultradifferential
//! operators with certified coefficient decay.
//!
//! All sequence arithmetic runs in the log domain; every fitted or searched
//! witness is re-verified by direct evaluation before a certificate is
//! issued.

pub mod bump;
pub mod diffop;
pub mod error;
pub mod exec;
pub mod komatsu;
pub mod mindex;
pub mod poly;
pub mod quad;
pub mod rclass;
pub mod runner;
pub mod ultradist;
pub mod weights;

pub use error::{Error, Result};

/// Complex scalar used throughout (the derivative convention D = -i∂ makes
/// odd-order quantities imaginary even for real data).
pub type C64 = num_complex::Complex64;

/// Relative tolerance for log-domain inequality comparisons; ties satisfy.
pub const LOG_REL_TOL: f64 = 1e-12;

/// Guard on polynomial coefficient magnitude during repeated differentiation.
pub const COEF_GUARD: f64 = 1e250;
