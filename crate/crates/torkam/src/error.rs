use std::io;

/// Failures of an experiment run; [`RunError::exit_code`] maps them to the
/// process exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("blocked by failed conditions: {}", .0.join(", "))]
    Blocked(Vec<String>),
    #[error(transparent)]
    Pipeline(#[from] torkam_core::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    /// 2 for anything wrong with the configuration (including a strict-mode
    /// block), 1 for failures inside the pipeline or while writing output.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Blocked(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable name used in the diagnostic JSON.
    pub fn kind(&self) -> String {
        match self {
            RunError::Config(_) => "config".into(),
            RunError::Blocked(_) => "blocked".into(),
            RunError::Pipeline(e) => {
                let debug = format!("{e:?}");
                let name = debug.split([' ', '(', '{']).next().unwrap_or("pipeline");
                format!("pipeline.{name}")
            }
            RunError::Io(_) => "io".into(),
            RunError::Csv(_) => "csv".into(),
            RunError::Json(_) => "json".into(),
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;
