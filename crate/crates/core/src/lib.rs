//! Numerical toolkit for positive solutions of gradient-dependent p-Laplacian Dirichlet
//! problems `-Delta_p u = f(x, u, grad u)` by the method of sub- and super-solutions.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod apps;
pub mod eigen;
pub mod error;
pub mod mesh;
pub mod plap;
pub mod report;
pub mod solve;
pub mod subsuper;

pub use error::{Error, Result};
