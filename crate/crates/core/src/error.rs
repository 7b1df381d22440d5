use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step cap of {max_steps} exceeded{}", replicate.map(|r| format!(" in replicate {r}")).unwrap_or_default())]
    StepCapExceeded {
        max_steps: u64,
        replicate: Option<u64>,
    },

    #[error("numeric certificate not met: {0}")]
    Certificate(String),

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
