//! Maximum likelihood degree of Gaussian graphical models on the `n`-cycle.
//!
//! The ML-degree of the cycle model is `(n-3) 2^(n-2) + 1`. This crate
//! checks that count at desk scale from several directions:
//!
//! - [`intersect`] enumerates every point of `L^{-1} ∩ (Id + L^perp)` from
//!   the explicit census and compares the count with the formula;
//! - [`certify`] certifies each point as a transverse intersection through
//!   the rank of a Jacobian of vanishing 3x3 minors, and checks the quartic
//!   ideal identities;
//! - [`poly`] verifies the tridiagonal determinant identities exactly;
//! - [`mle`] solves the concave MLE problem and counts complex critical
//!   points for random data with a multi-start Newton oracle.

pub mod certify;
pub mod error;
pub mod intersect;
mod linalg;
pub mod mle;
pub mod model;
pub mod poly;

pub use certify::{
    certify_census, harvest_minors, jacobian_at, rank_certificate, rk_identity_check, Certificate,
    CertifySummary, MinorSpec,
};
pub use error::{Error, Result};
pub use intersect::{
    count_check, enumerate_points, ml_degree_formula, variety_degree_formula, CensusReport, Family,
    IntersectionPoint,
};
pub use mle::{critical_points_oracle, likelihood_gradient, log_lik, solve_mle, MleResult, OracleReport};
pub use model::{CycleModel, Shift, SignDiag, SymMatrix, Variant};
pub use poly::{Polynomial, RootSet};
