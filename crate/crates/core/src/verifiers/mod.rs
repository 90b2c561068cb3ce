//! Theorem-level checks assembled from the lower modules.

mod bounds;
mod domination;
mod fit;
mod hyperbolic;
mod partial;
mod star;

pub use bounds::{wojtkowski_bounds_check, wojtkowski_bounds_on_orbit, BoundFamily, BoundInequality, BoundsOptions, ExponentBoundsReport, ExponentSource};
pub use domination::{
    verify_dominated_splitting, verify_volume_expansion, DominationReport, DominationVerdict, TransportOptions, VolumeExpansionReport,
    VolumeVerdict,
};
pub use fit::{fit_second_half, RateFit};
pub use hyperbolic::{verify_hyperbolic_orbit, HyperbolicOrbitReport, HyperbolicityVerdict, CENTRAL_TOL};
pub use partial::{verify_partial_hyperbolicity, OrbitSegment, PartialHyperbolicityReport, PartialHyperbolicityVerdict, SegmentCheck};
pub use star::{
    homogeneity_report, star_certificate, CriticalElement, DegenerateCase, ElementCertificate, ElementVerdict, FormChoice, HomogeneityReport,
    IndexedElement, SingularityComparison, StarCertificate, StarElement, StarOptions,
};
