use thiserror::Error;

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] ambi_emph::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// Stable category name reported by the command-line front end.
    pub fn category(&self) -> &'static str {
        use ambi_emph::Error as E;
        match self {
            Self::Config(_) | Self::Core(E::InvalidParameter(_)) => "config",
            Self::Io(_) | Self::Core(E::Io(_)) | Self::Wav(hound::Error::IoError(_)) => "io",
            Self::Wav(_) | Self::Json(_) | Self::Core(E::Format(_)) => "format",
            Self::Core(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "format" => 4,
            _ => 5,
        }
    }
}
