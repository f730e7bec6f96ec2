//! Bounded fractal strings and their zeta functions.
//!
//! The crate provides a symbolic algebra of fractal strings ([`string_core`]),
//! closed forms for generalized Cantor strings ([`cantor_atoms`]), certified
//! evaluation of geometric zeta functions ([`zeta_eval`]), an explicit
//! construction of strings with prescribed abscissae of paramorphic continuation,
//! meromorphic continuation and absolute convergence ([`prescriber`]), dimension
//! computations ([`dimension`]) and distance zeta functions of sets in `R^N`
//! ([`distance_zeta`]).

pub mod cantor_atoms;
pub mod dimension;
pub mod distance_zeta;
pub mod error;
pub mod prescriber;
pub mod string_core;
pub mod zeta_eval;

pub use error::{Error, Result};
pub use num_complex::Complex64;
