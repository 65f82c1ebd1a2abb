use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("semantic description must not be empty")]
    EmptyDescription,
    #[error("agent-sequence must contain at least one agent")]
    EmptySequence,
    #[error("request must contain at least one non-empty set")]
    EmptyRequest,
    #[error("attribute id {0} outside [1, {1}]")]
    AttrIdOutOfRange(u32, u32),
    #[error("attribute value {0} outside [1, {1}]")]
    ValueOutOfRange(u32, u32),
    #[error("malformed request: {0}")]
    RequestShape(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvolveError {
    #[error("habitat has no agents")]
    EmptyPool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("a habitat network needs at least 2 users, got {0}")]
    TooFewUsers(usize),
    #[error("mean degree must be at least 1")]
    BadDegree,
    #[error("unknown habitat {0}")]
    UnknownHabitat(u32),
}

#[derive(Debug, Error, PartialEq)]
pub enum EcologyError {
    #[error("need at least {needed} {what}, got {got}")]
    TooFew { what: &'static str, needed: usize, got: usize },
    #[error("sample of {n} habitats requested but only {available} exist")]
    SampleTooLarge { n: usize, available: usize },
    #[error("non-positive value {0} cannot be log-transformed")]
    NonPositive(f64),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ecology(#[from] EcologyError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
