use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A coefficient or sample vector has the wrong length.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Two values live in different ambient spaces.
    AmbientMismatch { left: usize, right: usize },
    /// Every frame element is (numerically) zero.
    DegenerateFrame,
    /// A frame must contain at least one element.
    EmptyFrame,
    /// An operation that needs probe functions got none.
    EmptyTestSet,
    /// Fewer samples than the Nyquist count 2K+1 for the requested bandwidth.
    SubNyquist { samples: usize, required: usize },
    /// Convolution kernel longer than the sample grid.
    KernelTooLong { kernel: usize, grid: usize },
    /// Resolution sweeps need odd grid sizes so symmetric grids align.
    EvenResolution(usize),
    /// Sensor count does not match the model's uniform sensor grid.
    SensorCount { expected: usize, got: usize },
    /// Training produced a non-finite loss.
    Divergence { epoch: usize },
    /// Backward called before forward, or tape misuse.
    TapeState(&'static str),
    /// Malformed container file or unsupported record.
    Format(String),
    /// Ambient space too small to hold the requested bandwidth.
    AmbientTooSmall { k_max: usize, required: usize },
    /// I/O failure, flattened to a message so Error stays comparable.
    Io(String),
    /// Invalid configuration value.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            Error::AmbientMismatch { left, right } => {
                write!(f, "ambient spaces differ: k_max {left} vs {right}")
            }
            Error::DegenerateFrame => write!(f, "frame has no nonzero element"),
            Error::EmptyFrame => write!(f, "frame must contain at least one element"),
            Error::EmptyTestSet => write!(f, "probe set must be nonempty"),
            Error::SubNyquist { samples, required } => write!(
                f,
                "{samples} samples below the Nyquist count {required} for this bandwidth"
            ),
            Error::KernelTooLong { kernel, grid } => {
                write!(f, "kernel length {kernel} exceeds grid length {grid}")
            }
            Error::EvenResolution(m) => write!(f, "resolution {m} is even; grids must be odd"),
            Error::SensorCount { expected, got } => {
                write!(f, "expected {expected} sensor values, got {got}")
            }
            Error::Divergence { epoch } => {
                write!(f, "training diverged: non-finite loss at epoch {epoch}")
            }
            Error::TapeState(msg) => write!(f, "tape: {msg}"),
            Error::Format(msg) => write!(f, "container: {msg}"),
            Error::AmbientTooSmall { k_max, required } => {
                write!(f, "ambient k_max {k_max} too small, need at least {required}")
            }
            Error::Io(msg) => write!(f, "io: {msg}"),
            Error::Config(msg) => write!(f, "config: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
