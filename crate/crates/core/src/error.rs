use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid reference path: {0}")]
    InvalidPath(String),
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
