//! Numerical workbench for boundary control of degenerate diffusion equations
//! on the interval and the unit square.
//!
//! The crate is organized around the modal (tensor eigenbasis) model of the
//! operator `∂_x(x^α ∂_x ·)`:
//!
//! * [`special`] — gamma and Bessel functions of the first kind, their
//!   derivatives and positive zeros, evaluated from first principles.
//! * [`spectrum`] — eigenvalues, normalized eigenfunctions, boundary
//!   observation traces, gap checks and an independent Sturm-Liouville
//!   finite-volume oracle.
//! * [`kalman`] — block matrices of coupled systems, Kalman/Hautus rank
//!   tests, spectrum rearrangement and hypothesis checks for the
//!   biorthogonal machinery.
//! * [`solver1d`] — forward/adjoint modal solvers for the 1-d coupled
//!   system, modal norms, and a finite-volume oracle with boundary lifting.
//! * [`moment`] — Gram-based biorthogonal families of generalized
//!   exponentials and 1-d null-control synthesis with cost diagnostics.
//! * [`lr2d`] — the 2-d boundary controller on the unit square: restriction
//!   Gram matrices, spectral-inequality fits, dissipation and the
//!   time-splitting control loop.

pub mod bigfloat;
pub mod dd;
pub mod error;
pub mod hiprec;
pub mod kalman;
pub mod linalg;
pub mod lr2d;
pub mod mesh;
pub mod moment;
pub mod quad;
pub mod solver1d;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Complex dense matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
