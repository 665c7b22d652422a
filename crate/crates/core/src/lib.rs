//! Numerical tools for quasi-local mass in spatial Schwarzschild manifolds:
//! inverse curvature flows of star-shaped surfaces, the scalar-flat warped
//! extension they sweep out, and the mass functionals built on both.

pub mod asymptotics;
pub mod background;
pub mod error;
pub mod extension;
pub mod flow;
pub mod mass;
pub mod oracle;
pub mod sphere_grid;
pub mod surface;

pub use background::{sphere_area, Background};
pub use error::{Error, Result};
pub use extension::{ExtensionRun, ExtensionSample, ExtensionState};
pub use flow::{FlowConfig, FlowTrajectory};
pub use mass::MassReport;
pub use sphere_grid::{Parity, ScalarField, SphereGrid};
pub use surface::{assemble, RadialGraph, SurfaceGeometry};
