use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// Tree connectivity or edge lookup failure.
    #[error("invalid tree: {0}")]
    Structure(String),

    #[error("too many atoms for exhaustive search: {given} > {max}")]
    TooManyAtoms { given: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}
