//! Integrability obstructions for algebraic potentials.
//!
//! A potential `V` lives on the variety `S = {G_1 = .. = G_s = 0}` over
//! position variables `q` and extension variables `w`. The crate locates
//! Darboux points `grad V(c) = c`, computes the Hessian spectrum there and
//! compares eigenvalues against the table of integrable pairs `(k, lambda)`
//! for the homogeneity degree `k`.

pub mod calculus;
pub mod darboux;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod mrtable;
pub mod nbody;
pub mod ode;
pub mod varode;
pub mod parser;
pub mod pipeline;
pub mod poly;
pub mod report;
pub mod setup;
pub mod spectrum;
pub mod tolerances;
pub mod variety;

pub use error::{Error, Result};
pub use parser::{parse_expr, parse_setup};
pub use setup::AlgebraicSetup;
