//! Cone-field (quadratic form) criteria for hyperbolicity of flows.
//!
//! The crate is organised bottom-up:
//!
//! * [`pseudo_metric`]: non-degenerate quadratic forms, adapted frames, cones,
//!   pseudo-adjoints.
//! * [`jsep_analysis`]: single-operator analysis relative to a form
//!   (separation, `L = RU` polar decomposition, monotonicity, pencil bounds).
//! * [`flow`]: vector fields, adaptive integration, the tangent cocycle,
//!   exterior powers, equilibria, periodic orbits and Lyapunov exponents.
//! * [`cone_field`]: form fields along orbits and the linear Poincaré flow.
//! * [`verifiers`]: certificates assembled from the layers above.

pub mod cone_field;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod jsep_analysis;
pub mod pseudo_metric;
pub mod verifiers;

pub use error::{Error, Result};
