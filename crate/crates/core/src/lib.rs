//! Workbench for studying adiabatic spectral gaps of QUBO-encoded linear
//! least-squares problems, and for seeding Krylov solvers with annealer-style
//! approximate solutions.
//!
//! The pipeline is:
//!
//! 1. [`problems`] generates planted LSE/LLS instances (optionally with a
//!    prescribed condition number).
//! 2. [`encoding`] compiles an instance into a QUBO over fixed-point encoded
//!    variables, converts it to Ising form and rescales it into the
//!    `h ∈ [-2, 2]`, `J ∈ [-1, 1]` hardware range.
//! 3. [`spectral`] builds the transverse-field annealing Hamiltonian as a
//!    matrix-free operator and scans the gap between its two lowest levels.
//! 4. [`sweeps`] aggregates minimum gaps over ensembles and fits decay and
//!    plateau curves.
//! 5. [`samplers`], [`krylov`] and [`hybrid`] implement the annealer-seeded
//!    solver and its comparison against a zero initial guess.

pub mod encoding;
pub mod error;
pub mod fmt;
pub mod hybrid;
pub mod krylov;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod samplers;
pub mod spectral;
pub mod sweeps;

pub use error::{Error, Result};
