use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
    Rollout,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample weights sum to zero")]
    ZeroWeightSum,

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("degenerate direction: variance {variance:e} along principal axis {axis}")]
    DegenerateDirection { axis: usize, variance: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("requested {requested} neighbours from {available} points")]
    TooManyNeighbors { requested: usize, available: usize },

    #[error("chart {chart} has no dynamics data")]
    NoDynamicsData { chart: usize },

    #[error("rollout diverged at step {step}")]
    RolloutDiverged { step: usize },

    #[error("simulation unstable at step {step} (max |u| = {max_abs:e})")]
    Instability { step: usize, max_abs: f64 },

    #[error("phase undefined: first Fourier mode vanishes")]
    UndefinedPhase,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("in chart {chart}: {source}")]
    InChart {
        chart: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the id of the chart it came from.
    pub fn in_chart(self, chart: usize) -> Error {
        Error::InChart {
            chart,
            source: Box::new(self),
        }
    }

    /// Broad class of the failure, for exit codes and reporting.
    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::Config(_) | Error::InvalidArchitecture(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::TrainingDiverged { .. } | Error::DegenerateDirection { .. } | Error::NoDynamicsData { .. } | Error::ZeroWeightSum => {
                ErrorKind::Training
            }
            Error::RolloutDiverged { .. } => ErrorKind::Rollout,
            _ => ErrorKind::Data,
        }
    }

    /// Strips any chart context.
    pub fn root(&self) -> &Error {
        match self {
            Error::InChart { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
