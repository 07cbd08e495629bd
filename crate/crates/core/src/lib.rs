//! Exactly solvable birth and death chains built from the Askey scheme.

pub mod catalog;
pub mod chain;
pub mod error;
pub mod mirror;
pub mod oracle;
pub mod spectral;
pub mod specfun;

pub use catalog::{FamilyId, FamilySpec, LatticeKind, SetTag, ValidatedFamily};
pub use error::{Error, PoleError, Result};
