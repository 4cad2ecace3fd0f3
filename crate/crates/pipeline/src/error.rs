use polytrinity_core::forest::ForestError;
use polytrinity_core::groups::GroupError;
use polytrinity_core::polygen::PolygenError;
use polytrinity_core::rompyro::SimError;
use polytrinity_core::twophase::TrainError;
use polytrinity_core::uqpcm::UqError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path} row {row}: {message}")]
    Unit {
        path: String,
        row: usize,
        message: String,
    },
    #[error("{0} has no data rows")]
    EmptyFile(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Lookup(String),
}

impl PipelineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Numerical(_) => 3,
            PipelineError::Lookup(_) => 4,
            _ => 2,
        }
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        PipelineError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<GroupError> for PipelineError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::UnknownGroup(_) => PipelineError::Lookup(e.to_string()),
            _ => PipelineError::schema("group table", e.to_string()),
        }
    }
}

impl From<PolygenError> for PipelineError {
    fn from(e: PolygenError) -> Self {
        match e {
            PolygenError::Group(g) => g.into(),
            other => PipelineError::schema("records", other.to_string()),
        }
    }
}

impl From<ForestError> for PipelineError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::SchemaError(_) | ForestError::EmptyData => {
                PipelineError::Config(e.to_string())
            }
            _ => PipelineError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for PipelineError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::DomainError(_) => PipelineError::Config(e.to_string()),
            SimError::NumericalInstability { .. } => PipelineError::Numerical(e.to_string()),
        }
    }
}

impl From<UqError> for PipelineError {
    fn from(e: UqError) -> Self {
        match e {
            UqError::ModelFailure { .. } => PipelineError::Numerical(e.to_string()),
            _ => PipelineError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for PipelineError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } | TrainError::ZeroTarget { .. } => {
                PipelineError::Numerical(e.to_string())
            }
            _ => PipelineError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
