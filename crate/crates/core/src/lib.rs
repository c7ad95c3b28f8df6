//! Spectral computations for one-dimensional periodic Schrödinger operators
//! `(Hu)(n) = u(n+1) + u(n-1) + V(n) u(n)`: band structure, integrated
//! density of states, Lyapunov exponents, and a certified stagewise
//! construction of periodic approximants whose IDS has a poor modulus of
//! continuity.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod cli;
pub mod construct;
pub mod error;
pub mod grid;
pub mod ids;
pub mod modulus;
pub mod thouless;
pub mod transfer;
pub mod tridiag;

pub use bands::{band_edges, distance_to_spectrum, spectrum_measure, Band, BandStructure};
pub use error::{Error, Result};
pub use grid::EnergyGrid;
pub use ids::{ids_finite_count, ids_periodic_exact, sample_curve, ExactIds, IdsCurve};
pub use transfer::{
    averaged_lyapunov, discriminant, lyapunov_periodic, monodromy, step_matrix, Convention, FiniteFamily, Mat2,
    PeriodicPotential,
};
