use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A structure-constant lookup outside the table's valid index window.
    /// Silent zero-extension is never performed; an out-of-window access is
    /// a bug in the caller's window provisioning and must be loud.
    #[error("index window miss: L[{kind}]^{{N={n_dim},k={k},d={d}}}_{{n={index}}} outside stored window")]
    WindowMiss {
        kind: &'static str,
        n_dim: i64,
        k: i64,
        d: i64,
        index: i64,
    },

    #[error("series has a non-invertible leading term")]
    NonInvertibleLeadingTerm,

    /// The iterated residue left terms that are not polynomial. This means
    /// the contour prescription is wrong for this integrand, not that the
    /// input was malformed.
    #[error("residue diagnostic: {0}")]
    ResidueDiagnostic(String),

    #[error("operation outside validated scope: {0}")]
    ScopeGate(String),

    #[error("correlator {0} is not pinned by any WDVV instance set")]
    Underdetermined(String),

    /// A structural invariant failed to hold on computed data.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("inconsistent WDVV system at {0}: two equations disagree")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
