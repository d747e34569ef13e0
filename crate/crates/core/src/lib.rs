//! Residual strain tensor tomography from Bragg-edge strain sinograms.
//!
//! The reconstruction alternates four agents in a consensus loop: a per-ray
//! data fit, a per-component tomographic MAP reconstruction, a soft stress
//! equilibrium penalty, and projection onto the known sample support.

pub mod agents;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod field;
pub mod forward_model;
pub mod geometry;
pub mod io;
pub mod mace;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod render;
pub mod sinogram;
pub mod suite;

pub use elasticity::ElasticityModel;
pub use error::{Error, Result};
pub use field::{Component, ScalarField, ShapeMask, TensorField2D};
pub use forward_model::RayWeights;
pub use geometry::Geometry;
pub use projector::Projector;
pub use sinogram::{StrainSinogram, VirtualSinogramTensor};
