//! Interval exchange transformations and their renormalization.
//!
//! The crate is organised bottom-up:
//! [`combinatorics`] (permutations, Rauzy classes, the intersection form),
//! [`iet`] (evaluation, Birkhoff sums, discrepancy),
//! [`renorm`] (Rauzy-Veech and Zorich induction, toral dynamics),
//! [`twisted`] (twisted cocycle matrices),
//! [`lyapunov`] (Monte-Carlo exponent estimators),
//! [`suspension`] (the mod-p suspension IET and untwisting operators),
//! [`experiments`] (run drivers shared by the CLI and the Python bindings).

pub mod combinatorics;
pub mod cyclotomic;
pub mod error;
pub mod experiments;
pub mod iet;
pub mod linalg;
pub mod lyapunov;
pub mod numeric;
pub mod renorm;
pub mod surface;
pub mod suspension;
pub mod twisted;

pub use combinatorics::{
    genus_and_singularities, irreducible_classes, omega, rauzy_class, validate_permutation, MoveKind, Permutation, RauzyDiagram,
    SymplecticData,
};
pub use error::{Error, Result};
pub use iet::{IetMap, LocallyConstantFunction, TwistParameter};
pub use linalg::IntMatrix;
pub use numeric::Precision;
