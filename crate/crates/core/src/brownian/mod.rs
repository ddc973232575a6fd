//! Classical Brownian machinery: exact kernels, a hybrid walk-on-spheres and
//! Euler exit sampler, harmonic-measure estimators and a finite-difference
//! Laplace solver.

pub mod analytic;
pub mod grid;
pub mod histogram;
pub mod rng;
pub mod sampler;

pub use analytic::{
    green_disk, green_halfplane, pk_boundary_halfplane, pk_halfplane, pk_halfplane_infinity, pk_halfplane_minus_disk,
    pk_halfstrip,
};
pub use grid::{grid_harmonic, harmonic_measure_grid, BoundaryProblem, GridConfig, GridSolution};
pub use histogram::Histogram;
pub use rng::RngStream;
pub use sampler::{harmonic_measure_hole, sample_bm_exit, Cell, ExitSample, Occupation, Region, StepPolicy};
