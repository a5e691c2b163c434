use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field contains non-finite values")]
    InvalidField,
    #[error("exponent p = {p} outside the admissible window for d = {d}")]
    InvalidExponent { d: u32, p: f64 },
    #[error("unsupported dimension d = {0}")]
    InvalidDimension(u32),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero field in a ratio")]
    DivisionByZeroField,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("no sign change found in the shooting bracket scan (omega = {omega})")]
    BracketFailure { omega: f64 },
    #[error("shooting produced an invalid profile: {0}")]
    ShootFailure(String),
    #[error("profile tail underflows on the fit window")]
    TailUnderflow,
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("gradient flow stalled after {iterations} iterations (residual {residual:e})")]
    FlowStalled { iterations: usize, residual: f64 },
    #[error("mass {mass} does not exceed the critical mass {critical}")]
    MassTooSmall { mass: f64, critical: f64 },
    #[error("no Pohozaev root for lambda in [1e-3, 1e3]")]
    NoPohozaevRoot,
    #[error("mass window violated: {0}")]
    WindowViolation(String),
    #[error("no sampled frequency has supercritical mass")]
    NoBigSolitonInRange,
    #[error("need at least 3 profiles, got {0}")]
    InsufficientSamples(usize),
    #[error("numerical blow-up at t = {time}")]
    NumericalBlowup { time: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("soliton {index} left the box at t = {time}")]
    BoxExit { index: usize, time: f64 },
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable class name written into run manifests.
    pub fn class_name(&self) -> &'static str {
        match self {
            Error::InvalidField => "InvalidField",
            Error::InvalidExponent { .. } => "InvalidExponent",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::DivisionByZeroField => "DivisionByZeroField",
            Error::GridMismatch => "GridMismatch",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::ShootFailure(_) => "ShootFailure",
            Error::TailUnderflow => "TailUnderflow",
            Error::ParamMismatch(_) => "ParamMismatch",
            Error::FlowStalled { .. } => "FlowStalled",
            Error::MassTooSmall { .. } => "MassTooSmall",
            Error::NoPohozaevRoot => "NoPohozaevRoot",
            Error::WindowViolation(_) => "WindowViolation",
            Error::NoBigSolitonInRange => "NoBigSolitonInRange",
            Error::InsufficientSamples(_) => "InsufficientSamples",
            Error::NumericalBlowup { .. } => "NumericalBlowup",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::BoxExit { .. } => "BoxExit",
            Error::SchemaError(_) => "SchemaError",
            Error::CorruptFile(_) => "CorruptFile",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
