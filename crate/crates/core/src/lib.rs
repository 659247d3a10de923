//! Multi-marginal optimal transport with the determinant objective.
//!
//! The crate covers three complementary routes to the same optimization
//! problem, `sup E_gamma[det(X_1, ..., X_d)]` over couplings of `d` probability
//! measures on `R^d`:
//!
//! * [`lp`]: an exact revised-simplex solver for finitely supported marginals,
//!   with dual potentials and duality-gap certification;
//! * [`radial`]: the closed-form solution for radially symmetric marginals
//!   (monotone rearrangement of the radii, uniform directions on nested
//!   sub-spheres, wedge-product closure for the last vector);
//! * [`optcheck`]: verifiers for the optimality conditions (tightness,
//!   subgradient inclusion, gradient system, marginal laws).

pub mod error;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod measures;
pub mod optcheck;
pub mod radial;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{Frame, Point};
pub use lp::{Coupling, Instance, Objective, PotentialSet, SolveOptions, SolveReport};
pub use measures::{DiscreteMeasure, MonotoneMap, RadialMeasure};
pub use optcheck::CertificateReport;
pub use radial::{CouplingSampler, RadialPotential, RadialSolution, Tuple};
pub use rng::RngState;
