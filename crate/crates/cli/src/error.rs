use std::path::Path;

use rubricnli::corpus::{CorpusError, SplitError, SynthError};
use rubricnli::entailment::{BackendError, PredictionFileError};
use rubricnli::evaluation::{ProtocolError, ReportError};
use rubricnli::scoring::ScoringError;

/// Error classes and their exit codes: data 1, config 2, backend 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Data(String),
    Config(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Data(_) => "data",
            CliError::Config(_) => "config",
            CliError::Backend(_) => "backend",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Data(m) | CliError::Config(m) | CliError::Backend(m) => m,
        }
    }

    /// The single stderr line, as a JSON object.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.class(),
            "exit_code": self.exit_code(),
            "message": self.message().replace('\n', " "),
        })
        .to_string()
    }

    pub fn context(self, prefix: impl std::fmt::Display) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("{prefix}: {m}")),
            CliError::Config(m) => CliError::Config(format!("{prefix}: {m}")),
            CliError::Backend(m) => CliError::Backend(format!("{prefix}: {m}")),
        }
    }

    pub fn write(path: &Path, source: std::io::Error) -> Self {
        CliError::Config(format!("cannot write {}: {source}", path.display()))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Config(e.to_string()),
            CorpusError::Parse { .. } | CorpusError::Invalid(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::TooFewResponses { .. } | SplitError::SingleQuestion => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(format!("synth parameters: {e}"))
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(_) | BackendError::MissingPlaceholder(_) => CliError::Config(e.to_string()),
            BackendError::Unlabeled { .. }
            | BackendError::EmptySet(_)
            | BackendError::EmptyHypothesis { .. }
            | BackendError::InputTooLong { .. } => CliError::Data(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Backend { context, source } => CliError::from(source).context(context),
            ProtocolError::Config(m) => CliError::Config(m),
            ProtocolError::Data { .. } | ProtocolError::Mismatch(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::UnknownFormat(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PredictionFileError> for CliError {
    fn from(e: PredictionFileError) -> Self {
        match e {
            PredictionFileError::Io { .. } => CliError::Config(e.to_string()),
            PredictionFileError::Parse { .. } => CliError::Data(e.to_string()),
        }
    }
}
