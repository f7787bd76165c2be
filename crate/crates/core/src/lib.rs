//! Schatten-class diagnostics for composition operators and embeddings on
//! model spaces `K_ϑ = H² ⊖ ϑH²`.
//!
//! The crate evaluates inner functions and their level domains, builds
//! Whitney-type decompositions of those domains, computes Nevanlinna
//! counting functions and pullback measures of holomorphic self-maps, and
//! evaluates the integral and discrete Schatten criteria against exact
//! finite-rank singular values.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod inner;
pub mod level;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use inner::{Atom, BlaschkeZero, DiskPoint, InnerFunction, InnerSpec};
pub use level::{dist_and_surrogate, level_boundary, LevelDomain, LevelOptions};
pub use geometry::{ahlfors_ratio, build_whitney, overlap_multiplicity, validate_whitney, DyadicBox, WhitneyDecomposition, WhitneyParams};
pub use symbols::{pullback_measure, pullback_measure_adaptive, EmpiricalMeasure, Symbol};
pub use criteria::{ShellReport, Verdict, Weight};
pub use spectral::{compop_gram, embed_gram, hs_pullback, schatten_norm, PointMassMeasure, SingularSpectrum, Space};
