use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants split into two families: configuration/input problems and
/// numerical failures. The CLI maps them to exit codes 1 and 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("variable index x{index} out of range [1, {m}]")]
    VariableOutOfRange { index: usize, m: usize },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("model '{model}' is missing parameter '{param}'")]
    MissingParameter { model: String, param: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("delay {index} ({delay}) is not an integer multiple of dt = {dt}")]
    DelayNotMultiple { index: usize, delay: f64, dt: f64 },

    #[error("stability check failed: {0}")]
    Stability(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("lyapunov solve failed: {0}")]
    Lyapunov(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("drift field has no populated cells")]
    NoPopulatedCells,

    #[error("config error at '{path}': {msg}")]
    Config { path: String, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Eval(_)
                | Error::Stability(_)
                | Error::NonFinite { .. }
                | Error::Lyapunov(_)
                | Error::NoPopulatedCells
        )
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::VariableOutOfRange { .. } => "variable_out_of_range",
            Error::Eval(_) => "eval",
            Error::UnknownModel(_) => "unknown_model",
            Error::MissingParameter { .. } => "missing_parameter",
            Error::Dimension(_) => "dimension",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DelayNotMultiple { .. } => "delay_not_multiple",
            Error::Stability(_) => "stability",
            Error::NonFinite { .. } => "non_finite",
            Error::Lyapunov(_) => "lyapunov",
            Error::EmptyEnsemble => "empty_ensemble",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::NoPopulatedCells => "no_populated_cells",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
