//! Coherent-classical estimation for linear quantum systems.
//!
//! - [`linalg`]: dense complex matrices, Lyapunov solves, definiteness tests.
//! - [`qsys`]: doubled-form and annihilation-only models, realizability.
//! - [`care`]: Newton–Kleinman solver for the filter Riccati equation.
//! - [`estimation`]: homodyne measurement, filter problems, costs, sweeps.
//! - [`scheme`]: named estimation schemes behind a common trait.

pub mod care;
pub mod estimation;
pub mod linalg;
pub mod qsys;
pub mod scheme;

pub use linalg::{ComplexMatrix, C64};
