//! Preconditioners for fractional Sobolev operators on nested Raviart-Thomas
//! discretizations of the unit square.
//!
//! The crate builds two preconditioners and the machinery to test them:
//!
//! * [`amg::AdditiveMg`]: an additive multigrid preconditioner for fractional
//!   powers `Λ^s`, `s ∈ [0, 1]`, of the `H(div)` inner-product operator, with
//!   vertex-patch fractional Schwarz smoothers and an exact coarse solve.
//! * [`auxprec::AuxSpacePreconditioner`]: a preconditioner for negative powers
//!   of the discrete Laplacian on piecewise constants, obtained by sandwiching
//!   an `H(div)` fractional map between the discrete gradient and its adjoint.
//!
//! Every finite element vector carries its space, level and representation
//! (coefficient or dual) in a [`fem::TaggedVector`]; operators map one
//! representation to the other, and the type system rejects mixing them.

pub mod amg;
pub mod auxprec;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fem;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod spectral;
pub mod verify;

pub use amg::AdditiveMg;
pub use auxprec::AuxSpacePreconditioner;
pub use error::{Error, Result};
pub use exec::Execution;
