//! The four consensus agents.

pub mod detector;
pub mod equilibrium;
pub mod reconstruction;
pub mod support;
pub mod tridiagonal;

pub use detector::{detector_agent, detector_prox_ray};
pub use equilibrium::{equilibrium_agent, EquilibriumOperator, EquilibriumSettings};
pub use reconstruction::{reconstruction_agent, QggmrfPrior, ReconSettings};
pub use support::support_agent;
