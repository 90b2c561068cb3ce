//! Quadratic-form fields along orbits, the form derivative and the linear
//! Poincaré flow.

pub mod adapted;
pub mod derivative;
pub mod field;
pub mod floquet;
pub mod poincare;
pub mod separation;

pub use adapted::{adapted_form_search, AdaptedForm, AdaptedStrategy};
pub use derivative::{form_derivative, form_derivative_matrix, singularity_form_positivity, SingularityPositivity};
pub use field::{field_flow_derivative, numerical_flow_derivative, AffineField, ConstantField, CylindricalField, FormField, ScaledField};
pub use floquet::{period_map_monotonicity, FloquetField, PeriodMapReport};
pub use poincare::{
    check_lpf_strict_monotone, linear_poincare_flow, poincare_project, LinearPoincareFlow, MonotonicityReport, MonotonicityVerdict, OrbitSamples,
    PoincareProjection, ADMISSIBILITY_TOL,
};
pub(crate) use separation::adapted_transition;
pub use separation::{check_separation_along_orbit, GridOptions, IntervalVerdict, OrbitSeparationReport};
