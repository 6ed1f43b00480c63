//! Coupled-channel engine for ultracold odd-partial-wave collisions with an
//! anisotropic dipole-dipole (1/x^3) tail on top of a van der Waals potential.
//!
//! The crate is organized around the reduced-unit radial problem
//!
//! ```text
//! [ -d^2/dx^2 + l(l+1)/x^2 - 1/x^6 + bw^4 x^2 - I q_{ll'}/x^3 - E ] u = 0
//! ```
//!
//! with short-range physics encoded by a nodal-line boundary condition.
//! `units` converts physical species data into the reduced units, `angular`
//! builds the channel bases and anisotropy couplings, `radial` propagates
//! coupled solutions, `scatter` extracts generalized scattering volumes and
//! locates their singularities, `trap` solves the harmonically trapped pair,
//! and `orient` analyzes the interparticle-axis orientation.

pub(crate) mod asymptotic;
pub mod angular;
pub mod csvfmt;
pub mod error;
pub mod orient;
pub mod radial;
pub mod scatter;
pub mod special;
pub mod trap;
pub mod units;

pub use error::{Error, Result};
