//! Numerical laboratory for non-symmetric Ornstein-Uhlenbeck semigroups on
//! finite-dimensional state spaces: exact path simulation, Feynman-Kac and
//! killed semigroup estimators, and Gaussian-weighted grid discretizations of
//! the associated Dirichlet operators.

pub mod error;
pub mod matkit;
pub mod model;
pub mod domains;
pub mod paths;
pub mod semigroups;
pub mod galerkin;
pub mod harness;

pub use error::{Error, Result};
