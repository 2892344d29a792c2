//! Periodic Lorentz gas under small stationary forces.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: torus table with circular scatterers, exact ray casts.
//! - [`dynamics`]: force models, flight integration, reflection and the
//!   collision map with its time-reversal inverse.
//! - [`measure`]: equilibrium sampling, Birkhoff and flow averages, marginal
//!   densities and the velocity field of the steady state.
//! - [`response`]: Jacobians of the collision map relative to the
//!   equilibrium measure, Kawasaki series, linear-response fits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod measure;
pub mod response;
pub mod rng;
pub mod stats;
pub mod vec2;

pub use error::{Error, Result};
pub use geometry::{BoundaryCoord, Disc, Table};
pub use vec2::Vec2;
