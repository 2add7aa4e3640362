//! Exact-arithmetic engine for the genus-0 quantum cohomology of projective
//! hypersurfaces.
//!
//! For a degree-`k` hypersurface in `CP^{N-1}` this crate computes, over
//! arbitrary-precision rationals:
//!
//! - virtual structure constants of the quantum Kähler sub-ring, by a
//!   descending recursion seeded in the stable range `N >= 2k`
//!   ([`recursion`]);
//! - virtual Gromov-Witten invariants, reconstructed from their defining
//!   axioms by exact WDVV (associativity) elimination ([`gw`]);
//! - true structure constants, assembled from the virtual data through the
//!   generalized mirror transformation and its Calabi-Yau specialization
//!   ([`mirror`]).
//!
//! Everything is exact: no floating point is used anywhere.
//!
//! The underlying polynomial, series, and residue machinery lives in
//! [`rational`], [`multipoly`], and [`series`]. [`checks`] bundles the
//! verification suites used by the CLI and the acceptance tests.

pub mod checks;
pub mod gw;
pub mod mirror;
pub mod multipoly;
pub mod rational;
pub mod recursion;
pub mod residue;
pub mod series;

mod error;

pub use error::{Error, Result};
pub use gw::{CorrelatorKey, CorrelatorStore, WdvvEquation};
pub use multipoly::MultiPoly;
pub use rational::Rat;
pub use recursion::{ConstantsTable, HypersurfaceParams, TableKind};
pub use residue::ResidueFactor;
pub use series::RationalSeries;
