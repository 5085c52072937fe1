use std::path::PathBuf;

use crate::episode::EpisodeResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "degenerate row: row {row} of the {matrix} matrix has no counts; raise smoothing above 0"
    )]
    DegenerateRow { matrix: &'static str, row: usize },

    #[error("misaligned sequences: {0}")]
    MisalignedSequences(String),

    #[error("index out of bounds: frame {index} in a {len}-frame video")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("frame already observed: {0}")]
    FrameAlreadyObserved(usize),

    #[error("budget exceeds frames: every frame is already observed")]
    BudgetExceedsFrames,

    #[error("observations have zero likelihood under the model")]
    ImpossibleEvidence,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no such video: {0}")]
    UnknownVideo(String),

    #[error("no frames of interest in training set")]
    NoFramesOfInterest,

    #[error("empty evaluation set after filtering")]
    EmptyEvaluationSet,

    #[error("transport error: {message}")]
    Transport {
        message: String,
        /// Queries completed before the failure, when raised from an episode.
        partial: Option<Box<EpisodeResult>>,
    },

    #[error("server error: {0}")]
    Remote(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn transport(message: impl Into<String>) -> Self {
        Error::Transport {
            message: message.into(),
            partial: None,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
