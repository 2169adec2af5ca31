use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("no region of interest: window {0} was rejected")]
    NoRegionOfInterest(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("timestamps must be strictly increasing (sample {index})")]
    NonMonotonic { index: usize },
    #[error("streams do not overlap in time")]
    NoOverlap,
    #[error("missing label for word {word_index} ({text:?}) of user {user_id} in {doc_id}")]
    MissingLabel {
        user_id: String,
        doc_id: String,
        word_index: usize,
        text: String,
    },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("degenerate training set: {0}")]
    Degenerate(String),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Tensor(#[from] lexgaze_tensor::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CoreError::Invalid(msg.into()))
}
