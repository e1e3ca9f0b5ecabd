//! Divergence-free Fourier-Galerkin representation on the periodic square.

mod field;
mod grid;
mod nonlinear;
mod transform;

pub use field::SpectralField;
pub use grid::SpectralGrid;
pub use nonlinear::{advection, bilinear, trilinear_form};
pub use transform::{eval_shifted_grid, from_physical, to_physical, to_physical_at, PhysicalField};
