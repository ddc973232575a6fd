//! Excursion-reflected Brownian motion (ERBM) in finitely connected planar
//! domains, with the potential theory built on it.
//!
//! The crate is organised by subsystem:
//!
//! * [`geometry`]: domain descriptions and explicit conformal primitives.
//! * [`brownian`]: classical kernels, a walk-on-spheres exit sampler and a
//!   finite-difference Laplace solver.
//! * [`erbm`]: the ERBM sampler, the boundary Markov chain and Monte Carlo
//!   estimators of ER hitting and occupation densities.
//! * [`kernels`]: deterministic and composed evaluators for the ER Poisson
//!   kernel and Green's function, including a boundary-integral solver.
//! * [`confmap`]: complex Poisson kernel and canonical conformal maps.
//! * [`capacity`]: half-plane capacity and its ER analogue.
//! * [`loewner`]: classical and multiply connected chordal Loewner solvers.
//! * [`cli`]: the command-line harness and the `verify` suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brownian;
pub mod capacity;
pub mod cli;
pub mod confmap;
pub mod erbm;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod loewner;
pub mod numerics;
pub mod parallel;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
