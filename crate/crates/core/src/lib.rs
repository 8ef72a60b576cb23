//! Numerical tools for one-frequency analytic quasi-periodic matrix cocycles:
//! Lyapunov spectra and accelerations, rotation numbers, dominated splittings,
//! symplectic and Hermitian-symplectic block diagonalization, analytic
//! eigen-tracking with permutation monodromy, and perturbation probes.

// `!(x < tol)` is used on purpose so that NaN residuals fail checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod blockdiag_real;
pub mod error;
pub mod experiments;
pub mod families;
pub mod hermdiag;
pub mod linalg;
pub mod lyapunov;
pub mod splitting;
pub mod topology;
pub mod trigmat;

pub use error::{Error, Result};
