use std::fmt;
use std::path::Path;

use flowhunter::classifiers::{ClassifierError, CodecError};
use flowhunter::dataset::DatasetError;
use flowhunter::detector::{DetectError, RegistryError, StreamError};
use flowhunter::featsel::FeatselError;
use flowhunter::flow::FlowError;
use flowhunter::ingest::ExtractError;
use flowhunter::metrics::MetricsError;
use flowhunter::optimize::OptimizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

/// A single-line diagnostic plus the process exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(m: impl fmt::Display) -> Self {
        CliError { exit: Exit::Usage, message: m.to_string() }
    }

    pub fn data(m: impl fmt::Display) -> Self {
        CliError { exit: Exit::Data, message: m.to_string() }
    }

    pub fn runtime(m: impl fmt::Display) -> Self {
        CliError { exit: Exit::Runtime, message: m.to_string() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::data(format!("{}: no such file", path.display()))
        } else {
            CliError::data(format!("{}: {e}", path.display()))
        }
    }

    /// Prefixes the message with where it happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Diagnostics stay on one line.
        f.write_str(&self.message.replace('\n', " "))
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        CliError::data(e)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::data(e)
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::data(e)
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::data(e)
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Config(_) => CliError::usage(e),
            ExtractError::Pcap(_) => CliError::data(e),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::InvalidHyperparameter { .. } | ClassifierError::UnknownKind(_) => CliError::usage(e),
            ClassifierError::SingleClassDataset
            | ClassifierError::EmptyDataset
            | ClassifierError::DimensionMismatch { .. }
            | ClassifierError::NonFiniteInput => CliError::data(e),
            _ => CliError::runtime(e),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Dataset(d) => d.into(),
            MetricsError::Fold { fold, error } => CliError::from(error).context(format!("fold {}", fold + 1)),
            other => CliError::runtime(other),
        }
    }
}

impl From<FeatselError> for CliError {
    fn from(e: FeatselError) -> Self {
        match e {
            FeatselError::Classifier(c) => c.into(),
            FeatselError::Dataset(d) => d.into(),
            FeatselError::KTooLarge { .. } | FeatselError::WrongKind(_) => CliError::usage(e),
            other => CliError::data(other),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Dataset(d) => d.into(),
            OptimizeError::Metrics(m) => m.into(),
            OptimizeError::KindMismatch(..) | OptimizeError::LengthMismatch { .. } => CliError::runtime(e),
            other => CliError::usage(other),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::Config(_) => CliError::usage(e),
            DetectError::Capture(_) | DetectError::Worker(_) => CliError::runtime(e),
            _ => CliError::data(e),
        }
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        CliError::runtime(e)
    }
}
