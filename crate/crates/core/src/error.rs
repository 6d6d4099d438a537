use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes, ranges or counts that violate an operation's precondition.
    InvalidInput(String),
    /// A configuration that cannot produce a meaningful run.
    Config(String),
    /// On-disk or in-memory dataset contents disagree with their declared shape.
    CorruptDataset(String),
    /// The loss became NaN or infinite.
    TrainingDiverged { epoch: usize, loss: f64 },
    /// A metric whose defining ratio has an empty denominator.
    UndefinedMetric(String),
    /// An environment without members in the current batch.
    EmptyEnvironment(usize),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::CorruptDataset(m) => write!(f, "corrupt dataset: {m}"),
            Error::TrainingDiverged { epoch, loss } => {
                write!(f, "training diverged in epoch {epoch} (loss = {loss})")
            }
            Error::UndefinedMetric(m) => write!(f, "undefined metric: {m}"),
            Error::EmptyEnvironment(k) => write!(f, "environment {k} has no members"),
        }
    }
}

impl core::error::Error for Error {}
