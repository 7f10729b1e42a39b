//! Density-based structural topology optimization.
//!
//! The crate minimizes the compliance of a linearly elastic structure under
//! a volume constraint. Each finite element carries a density in `[0, 1]`
//! that scales its stiffness through a penalized power law, steering the
//! optimizer toward crisp solid/void layouts. The pieces:
//!
//! * [`mesh`] — uniform quad/hex grids and box triangulations, element
//!   geometry, and degree-of-freedom numbering;
//! * [`material`] — the penalized modulus interpolation and constitutive
//!   matrices;
//! * [`fem`] — element stiffness integration, sparse assembly, boundary
//!   conditions, and linear solvers;
//! * [`filters`] — sensitivity, density, and projection filters that
//!   regularize the design field;
//! * [`optimize`] — the optimality-criteria and method-of-moving-asymptotes
//!   updates and the outer optimization driver;
//! * [`problems`] — canonical cantilever and half-beam benchmark setups;
//! * [`verify`] — finite-difference gradient checking utilities;
//! * [`cli`] — configuration parsing, output writers, and the command-line
//!   entry points.

pub mod cli;
pub mod error;
pub mod fem;
pub mod filters;
pub mod material;
pub mod mesh;
pub mod optimize;
pub mod problems;
pub mod verify;

pub use error::{Result, TopoError};
