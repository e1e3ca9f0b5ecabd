//! Taylor-Hood finite elements on a uniformly triangulated periodic square.

mod infsup;
mod mesh;
mod quadrature;
mod sparse;
mod stepper;
mod system;


pub use infsup::{infsup_analysis, infsup_ratio, supremizer, InfSup};
pub use mesh::{PeriodicMesh, Triangle};
pub use quadrature::{gauss_legendre, Quadrature};
pub use sparse::CsrMatrix;
pub use stepper::{fem_initial_value, run_fem_scheme, run_fem_with, FemStepStats, FemStepper, FemTrajectory};
pub use system::{FemField, FemPressure, FemSystem};
