//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Failure modes of the core algorithms.
///
/// Errors split into two families: configuration errors (bad arguments,
/// mismatched dimensions, malformed definitions) and numerical errors
/// (ill-conditioned systems, non-convergent iterations, degenerate inputs).
/// [`Error::is_numerical`] reports the family so front ends can map them to
/// distinct exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violates a documented precondition.
    InvalidArgument(String),
    /// Two objects that must share a dimension do not.
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    /// Spectra or bases constructed on different wavelength grids were mixed.
    GridMismatch,
    /// A value that must be finite is NaN or infinite.
    NonFinite(String),
    /// Duplicate identifier where names must be unique.
    DuplicateName(String),
    /// A gas spectrum with zero norm cannot be normalized.
    DegenerateGas(String),
    /// An extinction-coefficient set of deficient rank cannot support the model.
    DegenerateLibrary(String),
    /// Fewer samples than the overdetermination bound requires.
    Underdetermined { samples: usize, needed: usize },
    /// A linear system was too ill-conditioned to solve reliably.
    Conditioning { what: String, condition: f64 },
    /// An iterative procedure failed to converge.
    Convergence { what: String, index: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for conditioning/convergence/degeneracy failures, false for
    /// configuration errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGas(_)
                | Error::DegenerateLibrary(_)
                | Error::Conditioning { .. }
                | Error::Convergence { .. }
        )
    }

    /// Short machine-parsable code for the error family.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::GridMismatch => "grid-mismatch",
            Error::NonFinite(_) => "non-finite",
            Error::DuplicateName(_) => "duplicate-name",
            Error::DegenerateGas(_) => "degenerate-gas",
            Error::DegenerateLibrary(_) => "degenerate-library",
            Error::Underdetermined { .. } => "underdetermined",
            Error::Conditioning { .. } => "conditioning",
            Error::Convergence { .. } => "convergence",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {got}"),
            Error::GridMismatch => write!(f, "wavelength grids do not match"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::DuplicateName(name) => write!(f, "duplicate name: {name}"),
            Error::DegenerateGas(name) => write!(f, "gas {name} has zero-norm spectrum"),
            Error::DegenerateLibrary(msg) => write!(f, "degenerate library: {msg}"),
            Error::Underdetermined { samples, needed } => write!(
                f,
                "underdetermined system: {samples} samples, at least {needed} required"
            ),
            Error::Conditioning { what, condition } => {
                write!(f, "ill-conditioned {what} (condition number {condition:.3e})")
            }
            Error::Convergence { what, index } => {
                write!(f, "{what} failed to converge at index {index}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
