//! Grids, nodal fields and the discrete operators every solver is built from.

mod domain;
mod field;
mod io;
pub(crate) mod ops;

pub use domain::{Domain, Shape};
pub use field::{grad_magnitude, sup_norm, ScalarField, Weight};
pub use io::FieldEnvelope;
pub use ops::{load_scale, weak_defect, weak_residual, ResidualMode};

pub(crate) use field::sup_abs;
