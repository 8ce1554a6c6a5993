//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Errors carry
//! enough context (operation name, offending shapes or parameter names) to
//! diagnose a failure without a debugger.

use crate::tensor::Shape;

/// Errors produced by tensor operations, module construction, training, and
/// the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two tensors had incompatible shapes for the named operation.
    #[error("{op}: shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    /// An operation received an argument outside its documented domain.
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    /// `backward` was asked to differentiate a non-scalar value.
    #[error("backward: loss must be a 1x1x1x1 scalar, got {shape}")]
    NonScalarLoss { shape: Shape },

    /// A forward pass received non-finite input values.
    #[error("{op}: input contains non-finite values")]
    NonFiniteInput { op: &'static str },

    /// The training loss became NaN or infinite.
    #[error("training aborted: non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    /// A gradient became NaN or infinite during an optimizer update.
    #[error("training aborted: non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },

    /// An optimizer update was missing the gradient for a trainable parameter.
    #[error("optimizer: no gradient supplied for parameter `{param}`")]
    MissingGradient { param: String },

    /// A checkpoint file failed to parse or validate.
    #[error("checkpoint `{}`: {msg}", path.display())]
    Checkpoint { path: std::path::PathBuf, msg: String },

    /// A configuration key or value was rejected before any work started.
    #[error("config error: {msg}")]
    Config { msg: String },

    /// A dataset could not be assembled.
    #[error("dataset error: {msg}")]
    Dataset { msg: String },

    /// A self-check (gradient check, benchmark ordering, ...) failed.
    #[error("check failed: {msg}")]
    CheckFailed { msg: String },

    #[error("i/o error on `{}`: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on `{}`: {source}", path.display())]
    Image {
        path: std::path::PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// Shorthand used by tensor ops when two shapes disagree.
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Shorthand for domain errors.
    pub(crate) fn invalid(op: &'static str, msg: impl ToString) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.to_string(),
        }
    }

    /// Shorthand for configuration errors.
    pub(crate) fn config(msg: impl ToString) -> Self {
        Error::Config {
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
