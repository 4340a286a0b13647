//! Discrete quantum mechanics with real shifts.
//!
//! The crate assembles Jacobi-matrix Hamiltonians from birth/death rate
//! pairs `(B, D)`, deletes eigenlevels by Crum and Krein-Adler
//! transformations, and checks the resulting identities numerically:
//! Casoratian formulas, deformed polynomials, dual Christoffel
//! transformations and birth-death transition kernels.
//!
//! Module map:
//!
//! - [`params`]: parameter sets, grids, numeric policy
//! - [`families`]: the polynomial family catalog
//! - [`hamiltonian`]: Jacobi systems, factorization, eigensystems
//! - [`casorati`]: Casorati determinants and their identities
//! - [`crum`]: ground-state deletion chains and shape invariance
//! - [`adler`]: Krein-Adler deletion of admissible level sets
//! - [`christoffel`]: dual polynomials and the dual Christoffel transformation
//! - [`special`]: the closed-form `D = {1..l}` deletion
//! - [`bdp`]: birth-death transition kernels
//! - [`report`]: JSON report documents
//! - [`batch`]: data-parallel helpers with a sequential fallback

pub mod adler;
pub mod batch;
pub mod bdp;
pub mod casorati;
pub mod christoffel;
pub mod crum;
pub mod error;
pub mod families;
pub mod hamiltonian;
pub mod hyper;
pub mod linalg;
pub mod params;
pub mod report;
pub mod special;

pub use error::{DqmError, Result};
pub use families::{FamilyId, FamilySpec};
pub use params::{GridSpec, NumericPolicy, ParameterSet};
