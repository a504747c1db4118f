use thiserror::Error;

use crate::lp::LpStatus;

/// Errors surfaced by the cubature pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The input matrix has zero Frobenius norm, so no basis can be extracted.
    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    /// A quadrature weight was zero or negative.
    #[error("weight {index} is not strictly positive (value {value})")]
    NonpositiveWeight { index: usize, value: f64 },

    /// The vector to append already lies in the span of the basis.
    #[error("vector already lies in the basis span (residual {residual:.3e})")]
    AlreadyContained { residual: f64 },

    /// Attempted to start a least-squares state from a zero row.
    #[error("candidate row has zero norm")]
    ZeroRow,

    /// The Gram matrix became numerically singular during an update.
    #[error("gram matrix update is numerically singular")]
    SingularGram,

    /// The greedy selection ran out of candidates before completing the rule.
    #[error(
        "candidate pool exhausted after {iterations} iterations \
         ({selected} of {target} points selected)"
    )]
    NoConvergence {
        iterations: usize,
        selected: usize,
        target: usize,
    },

    /// A per-subspace failure, annotated with the subspace index (0-based).
    #[error("subspace {subspace}: {source}")]
    Subspace {
        subspace: usize,
        #[source]
        source: Box<Error>,
    },

    /// All snapshots in a cluster window are identically zero.
    #[error("snapshot window {window} is identically zero")]
    DegenerateWindow { window: usize },

    /// The integral vector of a subspace vanishes; the basis must be augmented.
    #[error(
        "subspace {subspace}: right-hand side is numerically zero; \
         augment the basis so constants are integrated"
    )]
    ZeroRhs { subspace: usize },

    /// An LP solution was consumed in a non-optimal state.
    #[error("LP solution status is {status:?}, expected Optimal")]
    NotOptimal { status: LpStatus },

    /// A matrix/vector entry was NaN or infinite.
    #[error("non-finite entry encountered in {context}")]
    NonFinite { context: &'static str },

    /// Structurally inconsistent inputs (row counts, index ranges, ...).
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Malformed rule or family file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the subspace it occurred in (0-based index).
    pub fn for_subspace(self, subspace: usize) -> Self {
        Error::Subspace {
            subspace,
            source: Box::new(self),
        }
    }
}
