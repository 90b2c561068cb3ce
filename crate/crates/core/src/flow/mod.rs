//! Vector fields, integration, the tangent cocycle and critical elements.

pub mod cocycle;
pub mod equilibria;
pub mod integrator;
pub mod lyapunov;
pub mod model;
pub mod periodic;
pub mod wedge;

pub use cocycle::{interval_cocycles, sample_cocycle, tangent_cocycle, CocycleSamples, CocycleSegment, IntervalCocycles};
pub use equilibria::{analyze_equilibrium, find_equilibria, lorenz_equilibria, spectrum, Eigenvalue, Equilibrium, EquilibriumOptions, EquilibriumSearch};
pub use integrator::{flow_to, integrate, IntegratorStats, Tolerances, Trajectory};
pub use lyapunov::{lyapunov_exponents, LyapunovEstimate, LyapunovOptions};
pub use model::{ModelKind, Monomial, VectorFieldModel};
pub use periodic::{classify_orbit, find_periodic_orbit, PeriodicOrbit, PeriodicOrbitOptions, Section};
pub use wedge::{compound_matrix, wedge_cocycle};
