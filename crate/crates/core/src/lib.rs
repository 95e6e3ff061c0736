//! Finite-volume simulation of ant-foraging chemotaxis systems and numerical
//! checks of their a priori estimates.
//!
//! The crate simulates the fast- and slow-pheromone foraging models and a
//! Keller–Segel reference system on a uniform rectangle with zero-flux walls,
//! and provides the diagnostics used to compare trajectories with the decay
//! envelopes, level-set energies and comparison lemmas of the analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod diagnostics;
pub mod elliptic;
pub mod grid;
pub mod heat_kernel;
pub mod io;
pub mod models;
pub mod ode;
pub mod scenario;
pub mod spectral;
pub mod stepper;
pub mod verify;

pub use grid::{
    gradient_faces, integrate, laplacian_neumann, lp_norm, make_grid, upwind_div, FaceVelocity, Field, Grid,
};
