//! Exact machinery for one-dimensional glued interval algebras.
//!
//! The crate models algebras of pairs `(f, a)` where `f` is a matrix-valued
//! function on finitely many intervals, `a` lives in a finite-dimensional
//! algebra, and the endpoint values of `f` are glued to `a` by multiplicity
//! matrices.  Everything symbolic is computed in exact rational arithmetic:
//! K-theory, spectra and closed subsets, eigenvalue patterns of
//! homomorphisms, discretization and restriction, and the rewriting driver
//! that replaces a chain of such algebras by one with injective connecting
//! maps.  Floating point appears only in the unitary-path verifier
//! ([`bridge`]), which is explicitly numerical.

pub mod error;
pub mod rational;
pub mod snf;

pub mod bridge;
pub mod cli;
pub mod discretize;
pub mod pattern;
pub mod perturb;
pub mod pl;
pub mod presentation;
pub mod restrict;
pub mod rewrite;
pub mod schema;
pub mod spectrum;
pub mod testfn;

pub use error::{Error, Result};
pub use presentation::{KTheory, Presentation, ValidationReport};
pub use rational::Q;
