use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid value for {field}: {value}")]
    InvalidField { field: &'static str, value: f64 },

    #[error("{what} out of range: {value} not in [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("assignment/population size mismatch: {assignment} labels for {population} users")]
    SizeMismatch { assignment: usize, population: usize },

    #[error("population file line {line}: {msg}")]
    PopulationFile { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
