use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown ref: {0}")]
    UnknownRef(String),
    #[error("cyclic frames through {0}")]
    CyclicFrames(String),
    #[error("mutation would break snapshot structure: {0}")]
    InvariantBreakingStructure(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("stale context: {0}")]
    StaleContext(String),
    #[error("no lowerer registered for actuator {0}")]
    MissingLowerer(String),
    #[error("no observation source registered for probe {0}")]
    MissingSource(String),
    #[error("unknown policy: {0}")]
    UnknownPolicy(String),
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),
    #[error("objective became non-finite at iteration {0}")]
    NonFinite(usize),
    #[error("malformed distribution: {0}")]
    MalformedDistribution(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}
