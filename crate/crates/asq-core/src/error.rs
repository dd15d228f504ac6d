//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A vector or matrix has the wrong size for the operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A constructed operator failed its Hermiticity tolerance.
    #[error("matrix is not Hermitian: max deviation {deviation:.3e} (relative)")]
    NotHermitian { deviation: f64 },

    /// |effective total Josephson energy| fell below the perturbative floor.
    #[error("effective Josephson energy degenerate: |E~| = {magnitude:.3e} GHz < {threshold:.3e} GHz")]
    DegenerateEffectiveEj { magnitude: f64, threshold: f64 },

    /// An operation requires an aligned (or zero) Zeeman field.
    #[error("qubit {index}: operation requires an aligned Zeeman field (theta = 0 or pi), got theta = {theta}")]
    MisalignedZeeman { index: usize, theta: f64 },

    /// An iterative procedure failed to reach its tolerance.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// The classical potential scan found more than one local minimum.
    #[error("potential has multiple minima (coupling junction not dominant)")]
    MultipleMinima,

    /// Requested qubit count exceeds the dense-operator cap.
    #[error("qubit count {n} exceeds cap {cap}")]
    QubitCapExceeded { n: usize, cap: usize },

    /// A dressed eigenstate could not be matched to its bare branch.
    #[error("branch identification failed: best bare-state overlap {overlap:.3} < {threshold:.3}")]
    BranchIdentification { overlap: f64, threshold: f64 },

    /// A 1-D root find was given a bracket that does not straddle the root.
    #[error("root not bracketed in [{lo:.3e}, {hi:.3e}]")]
    RootNotBracketed { lo: f64, hi: f64 },

    /// A least-squares fit could not be carried out.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Two spin configurations that must be degenerate are not.
    #[error("readout degeneracy violated at up-count {up_count}: |{a:.9} - {b:.9}| GHz exceeds tolerance")]
    DegeneracyViolation { up_count: usize, a: f64, b: f64 },
}

impl Error {
    /// True for errors meaning "the numerics did not settle", as opposed to
    /// invalid input. The CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_)
                | Error::MultipleMinima
                | Error::BranchIdentification { .. }
                | Error::RootNotBracketed { .. }
                | Error::FitFailure(_)
        )
    }
}
