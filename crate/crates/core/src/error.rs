use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// The `Display` output always starts with the variant name so that callers
/// (the CLI in particular) can surface it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("FileNotFound: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),
    #[error("EmptyStream: no frames")]
    EmptyStream,
    #[error("InsufficientFrames: need at least {needed}, got {got}")]
    InsufficientFrames { needed: usize, got: usize },
    #[error("NonFiniteInput: {0}")]
    NonFiniteInput(String),
    #[error("InvalidWeights: {0}")]
    InvalidWeights(String),
    #[error("InvalidBox: {0}")]
    InvalidBox(String),
    #[error("BoxTooLarge: square side {side} exceeds frame {frame_width}x{frame_height}")]
    BoxTooLarge {
        side: usize,
        frame_width: usize,
        frame_height: usize,
    },
    #[error("IncompleteTrainSet: class {0} has no training samples")]
    IncompleteTrainSet(usize),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("Malformed: {0}")]
    Malformed(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The variant name, as printed at the start of the `Display` output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "FileNotFound",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::EmptyStream => "EmptyStream",
            Error::InsufficientFrames { .. } => "InsufficientFrames",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::InvalidWeights(_) => "InvalidWeights",
            Error::InvalidBox(_) => "InvalidBox",
            Error::BoxTooLarge { .. } => "BoxTooLarge",
            Error::IncompleteTrainSet(_) => "IncompleteTrainSet",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Malformed(_) => "Malformed",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn io_at(path: &std::path::Path, err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path.to_path_buf())
        } else {
            Error::Io(err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_starts_with_variant_name() {
        let errors = [
            Error::FileNotFound("a.pgm".into()),
            Error::DimensionMismatch("x".into()),
            Error::EmptyStream,
            Error::InsufficientFrames { needed: 2, got: 1 },
            Error::BoxTooLarge {
                side: 9,
                frame_width: 4,
                frame_height: 4,
            },
            Error::IncompleteTrainSet(3),
        ];
        for e in errors {
            assert!(e.to_string().starts_with(e.name()), "{e}");
        }
    }
}
