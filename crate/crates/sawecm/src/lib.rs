//! Cubature rules with shared integration points and subspace-adaptive weights.
//!
//! Given several families of integrand functions sampled at the Gauss points of
//! a full-order quadrature, this crate selects a single reduced set of points
//! together with one nonnegative weight vector per family, so that every family
//! keeps integrating exactly (up to the SVD truncation used to build its basis).
//!
//! Two solution strategies are provided:
//! - a greedy route ([`saw::saw_ecm`]) that chains an enhanced Empirical
//!   Cubature Method over the subspace bases, reusing previously selected
//!   points as candidates, and
//! - an l1-convexified route ([`lp`]) that assembles the block-diagonal
//!   standard-form LP and solves it with a built-in revised simplex.
//!
//! The [`problems`] module carries the polynomial benchmark families, a
//! synthetic snapshot-manifold generator for local-basis studies, and the
//! error metrics used to validate emitted rules. File formats for rules and
//! families live in [`io`]; the `sawecm` binary exposes everything as a CLI.

pub mod ecm;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod problems;
pub mod saw;

pub use ecm::{conical_hull_feasible, ecm_select, EcmInput, EcmOutput};
pub use error::Error;
pub use linalg::{
    augment_with_constant, augment_with_vector, truncated_svd, weighted_svd, LsState, TruncatedSvd,
};
pub use lp::{assemble_lp, solve_simplex, LpSolution, LpStatus, PivotRule, StandardFormLp};
pub use problems::{
    evaluate_rule, gauss_legendre, integrand_matrices, monomial_family, synthetic_manifold,
    vector_monomial_family, ClusterWindowing, ErrorReport, ManifoldMode, QuadratureGrid,
};
pub use saw::{
    global_dimension, global_ecm, independent_baseline, saw_ecm, AdaptiveRule, AugmentPolicy,
    BasisMode, SawOptions, SubspaceFamily, VisitOrder,
};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
