use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// The pre-disruption success count is zero, so the robustness ratio is undefined.
    #[error("no successfully communicating nodes before disruption; robustness is undefined")]
    NoSuccessBaseline,

    /// Both mean degrees are zero, so the degree ratio is undefined.
    #[error("mean degree before disruption is zero; degree ratio is undefined")]
    DegenerateDegree,

    /// Config text could not be parsed.
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
